"""Base pretraining and frozen-base plugin training.

Adam with an exponential per-epoch learning-rate decay
(lr = lr_base * delta^(epoch-1)). The dataclass defaults mirror the reference
setup (5e-5, delta 0.9), which assumes a pretrained full-size model; training
the desk-scale model from scratch needs a larger lr_base, so the harnesses
pass their own. Batches reshuffle every epoch from the config seed; gradient
accumulation is sequential, keeping runs bitwise reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .datagen import PseudoSample
from .model import BaseCorrector, PluginModule, check_compatible, plugin_loss_and_grads
from .nn.core import zero_grads
from .nn.encoder import embed_forward, encoder_forward, loss_and_grads
from .text import ParallelPair

logger = logging.getLogger(__name__)


class FrozenBaseError(RuntimeError):
    """Plugin training started while some base parameter was still trainable."""


@dataclass
class TrainConfig:
    epochs: int
    lr_base: float = 5e-5
    delta: float = 0.9
    batch_size: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr_base > 0:
            raise ValueError("lr_base must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Exponential decay, epoch counted from 1."""
    if epoch < 1:
        raise ValueError("epoch must be >= 1")
    return cfg.lr_base * cfg.delta ** (epoch - 1)


class AdamState:
    """First/second moments for exactly the trainable parameters."""

    def __init__(self, params: dict):
        self.m = {n: np.zeros_like(p.data) for n, p in params.items() if p.trainable}
        self.v = {n: np.zeros_like(p.data) for n, p in params.items() if p.trainable}
        self.step = 0


def adam_step(params: dict, state: AdamState, lr: float, cfg: TrainConfig) -> None:
    """Standard Adam update; frozen parameters are never touched."""
    state.step += 1
    t = state.step
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    for name, p in params.items():
        if not p.trainable:
            continue
        g = p.grad
        if g is None:
            continue
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def format_epoch_line(epoch: int, lr: float, mean_loss: float) -> str:
    return f"{epoch}\t{lr:.10g}\t{mean_loss:.8f}"


def train_base(model: BaseCorrector, pairs: list[ParallelPair], cfg: TrainConfig,
               log_lines: list[str] | None = None) -> list[tuple[int, float, float]]:
    """Train every base parameter; returns (epoch, lr, mean_loss) per epoch."""
    if not pairs:
        raise ValueError("empty training data")
    data = [(np.asarray(p.source.ids, dtype=np.int64),
             np.asarray(p.target.ids, dtype=np.int64)) for p in pairs]
    state = AdamState(model.params)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, 20)))
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(cfg, epoch)
        total = 0.0
        for batch in _epoch_batches(len(data), cfg.batch_size, rng):
            zero_grads(model.params)
            for i in batch:
                ids_in, ids_tgt = data[i]
                total += loss_and_grads(model.params, model.cfg, ids_in, ids_tgt)
            inv = 1.0 / len(batch)
            for p in model.params.values():
                if p.trainable and p.grad is not None:
                    p.grad *= inv
            adam_step(model.params, state, lr, cfg)
        mean_loss = total / len(data)
        trace.append((epoch, lr, mean_loss))
        line = format_epoch_line(epoch, lr, mean_loss)
        if log_lines is not None:
            log_lines.append(line)
        logger.info("train-base %s", line)
    return trace


def train_plugin(base: BaseCorrector, plugin: PluginModule, data: list[PseudoSample],
                 cfg: TrainConfig, log_lines: list[str] | None = None) -> list[tuple[int, float, float]]:
    """Train the plugin against a fully frozen base.

    Refuses to start unless every base parameter is frozen; asserts afterwards
    that the base fingerprint did not change. The frozen embedding and base
    features are precomputed once per sample since they are constants.
    """
    if not data:
        raise ValueError("empty training data")
    if not base.frozen:
        raise FrozenBaseError("all base parameters must be frozen before plugin training")
    check_compatible(base, plugin)
    fp_before = base.fingerprint()

    prepared = []
    for s in data:
        ids_in = np.asarray(s.input.ids, dtype=np.int64)
        ids_tgt = np.asarray(s.label.ids, dtype=np.int64)
        emb = embed_forward(base.params, ids_in, base.cfg)
        base_feats = encoder_forward(base.params, "enc", base.cfg, emb)
        prepared.append((ids_tgt, emb, base_feats))

    state = AdamState(plugin.params)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, 21)))
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(cfg, epoch)
        total = 0.0
        for batch in _epoch_batches(len(prepared), cfg.batch_size, rng):
            zero_grads(plugin.params)
            for i in batch:
                ids_tgt, emb, base_feats = prepared[i]
                total += plugin_loss_and_grads(base, plugin, ids_tgt, emb, base_feats)
            inv = 1.0 / len(batch)
            for p in plugin.params.values():
                if p.trainable and p.grad is not None:
                    p.grad *= inv
            adam_step(plugin.params, state, lr, cfg)
        mean_loss = total / len(prepared)
        trace.append((epoch, lr, mean_loss))
        line = format_epoch_line(epoch, lr, mean_loss)
        if log_lines is not None:
            log_lines.append(line)
        logger.info("train-plugin %s", line)
    if base.fingerprint() != fp_before:
        raise RuntimeError("base parameters changed during plugin training")
    return trace
