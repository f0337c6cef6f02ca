"""Kernel backend selection.

Two interchangeable implementations of the hot forward/backward kernels:

- ``_ckernels``: Cython + BLAS, compiled at install time
- ``_npkernels``: pure numpy, always available

The compiled backend is preferred when importable. Set PLUGSPELL_KERNELS to
``numpy`` or ``c`` to force one (``c`` raises if the extension is missing).
``set_backend`` swaps the active module at runtime for benchmarks and tests.
"""

from __future__ import annotations

import logging
import os

from . import _npkernels

logger = logging.getLogger(__name__)

_BACKENDS = {"numpy": _npkernels}

try:
    from . import _ckernels

    _BACKENDS["c"] = _ckernels
except ImportError as exc:  # extension not built; numpy fallback stays
    _ckernels = None
    _IMPORT_ERROR = exc

_forced = os.environ.get("PLUGSPELL_KERNELS", "auto").lower()
if _forced == "auto":
    _name = "c" if "c" in _BACKENDS else "numpy"
elif _forced in _BACKENDS:
    _name = _forced
elif _forced == "c":
    raise ImportError(f"PLUGSPELL_KERNELS=c but the compiled backend failed to import: {_IMPORT_ERROR}")
else:
    raise ValueError(f"PLUGSPELL_KERNELS={_forced!r}: expected 'auto', 'c', or 'numpy'")

_active = _BACKENDS[_name]
if _name == "numpy" and _forced == "auto":
    logger.info("compiled kernels unavailable, using numpy backend")


def get():
    """The active kernel module."""
    return _active


def name() -> str:
    return _name


def available() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(backend_name: str):
    return _BACKENDS[backend_name]


def set_backend(backend_name: str) -> str:
    """Swap the active backend; returns the previous name."""
    global _active, _name
    prev = _name
    _active = _BACKENDS[backend_name]
    _name = backend_name
    return prev
