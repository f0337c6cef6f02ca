"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import zero_grads


def finite_diff_check(params: dict, loss_fn: Callable[[], float],
                      backward_fn: Callable[[], float], *, epsilon: float = 1e-3,
                      num_coords: int = 200, rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn computes the loss from the current parameter values; backward_fn
    additionally fills Parameter.grad. Up to num_coords coordinates are
    sampled uniformly across all trainable parameters. With nothing trainable
    the check is vacuous and returns 0.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    zero_grads(params)
    backward_fn()
    analytic = {name: p.grad.copy() for name, p in params.items() if p.trainable}
    coords = [(name, i) for name, g in analytic.items() for i in range(g.size)]
    if not coords:
        return 0.0
    if rng is not None and len(coords) > num_coords:
        picks = rng.choice(len(coords), size=num_coords, replace=False)
        coords = [coords[i] for i in picks]
    elif rng is None and len(coords) > num_coords:
        coords = coords[:: max(1, len(coords) // num_coords)][:num_coords]

    worst = 0.0
    for name, i in coords:
        flat = params[name].data.reshape(-1)
        orig = flat[i]
        flat[i] = orig + epsilon
        loss_plus = loss_fn()
        flat[i] = orig - epsilon
        loss_minus = loss_fn()
        flat[i] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        a = float(analytic[name].reshape(-1)[i])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
