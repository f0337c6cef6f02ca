"""Model configuration, named parameters, and initialization.

Parameters live in a flat name -> Parameter dict; names are slash-free dotted
paths ("enc.0.attn.wq") that double as the checkpoint manifest keys. Freezing
is the `trainable` flag: frozen parameters never receive gradient storage and
are never touched by the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np


@dataclass
class EncoderConfig:
    """Shape of one encoder stack (and of the embedding/head it feeds).

    Paper-scale would be model_dim=768, num_layers=12; the desk defaults keep
    CPU runs in the minutes range.
    """

    vocab_size: int
    model_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_dim: Optional[int] = None
    max_len: int = 64

    def __post_init__(self):
        if self.ffn_dim is None:
            self.ffn_dim = 4 * self.model_dim
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValueError(f"{f.name} must be an int, got {v!r}")
        if self.vocab_size < 4:
            raise ValueError("vocab_size must be >= 4")
        if min(self.model_dim, self.num_heads, self.max_len, self.ffn_dim) < 1 or self.num_layers < 0:
            raise ValueError("all dimensions must be positive (num_layers may be 0)")
        if self.model_dim % self.num_heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


@dataclass
class Parameter:
    """A named tensor with a trainable flag and a lazily allocated gradient."""

    name: str
    data: np.ndarray
    trainable: bool = True
    grad: Optional[np.ndarray] = None

    def accumulate(self, g: np.ndarray) -> None:
        if not self.trainable:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g


ParamDict = dict


def zero_grads(params: dict) -> None:
    for p in params.values():
        if p.trainable:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            else:
                p.grad.fill(0.0)
        else:
            p.grad = None


def freeze(params: dict) -> None:
    for p in params.values():
        p.trainable = False
        p.grad = None


def all_frozen(params: dict) -> bool:
    return all(not p.trainable for p in params.values())


def cast_params(params: dict, dtype) -> dict:
    """Copy a parameter dict to another float dtype (for 64-bit grad checks)."""
    return {
        name: Parameter(name, p.data.astype(dtype), p.trainable, None)
        for name, p in params.items()
    }


def _uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def init_encoder_stack(cfg: EncoderConfig, rng: np.random.Generator, prefix: str,
                       num_layers: Optional[int] = None) -> dict:
    """Parameters for a stack of pre-norm transformer layers.

    Weight matrices are uniform in +-1/sqrt(model_dim); biases start at zero,
    layer-norm gains at one. Draw order is fixed, so a seed pins every value.
    """
    d = cfg.model_dim
    f = cfg.ffn_dim
    bound = 1.0 / np.sqrt(d)
    layers = cfg.num_layers if num_layers is None else num_layers
    params: dict = {}

    def add(name, data, ones=False):
        params[name] = Parameter(name, data)

    for i in range(layers):
        base = f"{prefix}.{i}"
        add(f"{base}.ln1.g", np.ones(d, dtype=np.float32))
        add(f"{base}.ln1.b", np.zeros(d, dtype=np.float32))
        for proj in ("wq", "wk", "wv", "wo"):
            add(f"{base}.attn.{proj}", _uniform(rng, (d, d), bound))
        # no key bias: softmax scores are invariant to it, so it would be a
        # dead parameter with an exactly-zero gradient
        for bias in ("bq", "bv", "bo"):
            add(f"{base}.attn.{bias}", np.zeros(d, dtype=np.float32))
        add(f"{base}.ln2.g", np.ones(d, dtype=np.float32))
        add(f"{base}.ln2.b", np.zeros(d, dtype=np.float32))
        add(f"{base}.ffn.w1", _uniform(rng, (d, f), bound))
        add(f"{base}.ffn.b1", np.zeros(f, dtype=np.float32))
        add(f"{base}.ffn.w2", _uniform(rng, (f, d), bound))
        add(f"{base}.ffn.b2", np.zeros(d, dtype=np.float32))
    return params


def init_base_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict:
    """Embedding + positional table + encoder stack + correction head."""
    d = cfg.model_dim
    bound = 1.0 / np.sqrt(d)
    params: dict = {}
    params["emb.tok"] = Parameter("emb.tok", _uniform(rng, (cfg.vocab_size, d), bound))
    params["emb.pos"] = Parameter("emb.pos", _uniform(rng, (cfg.max_len, d), bound))
    params.update(init_encoder_stack(cfg, rng, "enc"))
    params["head.w"] = Parameter("head.w", _uniform(rng, (d, cfg.vocab_size), bound))
    params["head.b"] = Parameter("head.b", np.zeros(cfg.vocab_size, dtype=np.float32))
    return params
