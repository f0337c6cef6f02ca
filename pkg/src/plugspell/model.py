"""Base corrector, plugin encoders, and the two forward passes.

The base path is head(base_encoder(embed(ids))). With a plugin attached, both
encoder stacks consume the same embedding output and their final features are
added element-wise before the head; the plugin never has its own embedding.
Plugins carry a fingerprint of the base checkpoint they were trained against,
checked (warn, or reject at the CLI) on attach.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nn import checkpoint as ckpt
from .nn.core import EncoderConfig, freeze, init_base_params, init_encoder_stack
from .nn.encoder import (embed_forward, encoder_backward, encoder_forward,
                         head_backward, head_forward, softmax_xent_loss)
from .text import CharVocab

logger = logging.getLogger(__name__)

PLUGIN_PREFIX = "plg"


class PluginMismatchError(ValueError):
    """Plugin is incompatible with the loaded base model."""


@dataclass
class BaseCorrector:
    """Embedding + base encoder + correction head over a character vocab."""

    vocab: CharVocab
    cfg: EncoderConfig
    params: dict

    @classmethod
    def create(cls, vocab: CharVocab, cfg: EncoderConfig, seed: int) -> "BaseCorrector":
        if cfg.vocab_size != vocab.size:
            raise ValueError(f"config vocab_size {cfg.vocab_size} != vocab size {vocab.size}")
        params = init_base_params(cfg, np.random.default_rng(seed))
        return cls(vocab, cfg, params)

    def freeze(self) -> None:
        freeze(self.params)

    @property
    def frozen(self) -> bool:
        return all(not p.trainable for p in self.params.values())

    def fingerprint(self) -> str:
        return ckpt.fingerprint(self.params, self.cfg, "base", self._extras())

    def _extras(self) -> dict:
        return {"vocab_chars": "".join(self.vocab.chars)}

    def save(self, path) -> None:
        ckpt.save_checkpoint(self.params, self.cfg, path, "base", self._extras())

    @classmethod
    def load(cls, path) -> "BaseCorrector":
        params, cfg, kind, extras = ckpt.load_checkpoint(path)
        if kind != "base":
            raise ckpt.CheckpointError(f"expected a base checkpoint, got kind={kind!r}")
        vocab = CharVocab(extras["vocab_chars"])
        return cls(vocab, cfg, params)


@dataclass
class PluginModule:
    """A parallel encoder stack whose features add onto the base encoder's."""

    name: str
    cfg: EncoderConfig  # model_dim/num_heads must match the base; depth may differ
    params: dict
    base_fingerprint: str
    seed: Optional[int] = None

    @classmethod
    def create(cls, name: str, base: BaseCorrector, seed: int,
               num_layers: Optional[int] = None) -> "PluginModule":
        cfg_dict = base.cfg.to_dict()
        if num_layers is not None:
            cfg_dict["num_layers"] = num_layers
        cfg = EncoderConfig.from_dict(cfg_dict)
        params = init_encoder_stack(cfg, np.random.default_rng(seed), PLUGIN_PREFIX)
        return cls(name, cfg, params, base.fingerprint(), seed)

    def forward_features(self, emb: np.ndarray, caches: Optional[list] = None) -> np.ndarray:
        return encoder_forward(self.params, PLUGIN_PREFIX, self.cfg, emb, caches)

    def backward_features(self, dfeats: np.ndarray, caches: list) -> np.ndarray:
        return encoder_backward(self.params, PLUGIN_PREFIX, self.cfg, dfeats, caches)

    def fingerprint(self) -> str:
        return ckpt.fingerprint(self.params, self.cfg, "plugin", self._extras())

    def _extras(self) -> dict:
        return {"domain": self.name, "base_fingerprint": self.base_fingerprint,
                "seed": self.seed}

    def save(self, path) -> None:
        ckpt.save_checkpoint(self.params, self.cfg, path, "plugin", self._extras())

    @classmethod
    def load(cls, path) -> "PluginModule":
        params, cfg, kind, extras = ckpt.load_checkpoint(path)
        if kind != "plugin":
            raise ckpt.CheckpointError(f"expected a plugin checkpoint, got kind={kind!r}")
        return cls(extras["domain"], cfg, params, extras["base_fingerprint"], extras.get("seed"))


class PluginRegistry:
    """Loaded plugins by unique domain label; one may be attached per call."""

    def __init__(self):
        self._plugins: dict[str, PluginModule] = {}

    def register(self, plugin: PluginModule) -> None:
        if plugin.name in self._plugins:
            raise ValueError(f"plugin label {plugin.name!r} already registered")
        self._plugins[plugin.name] = plugin

    def unregister(self, name: str) -> None:
        del self._plugins[name]

    def get(self, name: str) -> PluginModule:
        return self._plugins[name]

    def labels(self) -> tuple[str, ...]:
        return tuple(self._plugins)

    def __len__(self) -> int:
        return len(self._plugins)


def check_compatible(model: BaseCorrector, plugin: PluginModule) -> bool:
    """Dimension mismatch raises; fingerprint mismatch warns and returns False."""
    if plugin.cfg.model_dim != model.cfg.model_dim or plugin.cfg.num_heads != model.cfg.num_heads:
        raise PluginMismatchError(
            f"plugin dims ({plugin.cfg.model_dim}/{plugin.cfg.num_heads} heads) do not match "
            f"base ({model.cfg.model_dim}/{model.cfg.num_heads} heads)")
    if plugin.base_fingerprint != model.fingerprint():
        logger.warning("plugin %r was trained against a different base checkpoint", plugin.name)
        return False
    return True


def forward_base(model: BaseCorrector, ids, caches: Optional[dict] = None) -> np.ndarray:
    """Eq.-1-style pass: logits = head(base_encoder(embed(ids)))."""
    emb = embed_forward(model.params, ids, model.cfg)
    enc_caches: Optional[list] = None if caches is None else []
    feats = encoder_forward(model.params, "enc", model.cfg, emb, enc_caches)
    logits = head_forward(model.params, feats)
    if caches is not None:
        caches.update(emb=emb, enc=enc_caches, feats=feats)
    return logits


def forward_with_plugin(model: BaseCorrector, plugin: PluginModule, ids,
                        caches: Optional[dict] = None) -> np.ndarray:
    """Fused pass: both stacks read the same embeddings, features add before the head."""
    check_compatible(model, plugin)
    emb = embed_forward(model.params, ids, model.cfg)
    base_feats = encoder_forward(model.params, "enc", model.cfg, emb)
    plugin_caches: Optional[list] = None if caches is None else []
    plugin_feats = plugin.forward_features(emb, plugin_caches)
    fused = base_feats + plugin_feats
    logits = head_forward(model.params, fused)
    if caches is not None:
        caches.update(emb=emb, base_feats=base_feats, plugin_caches=plugin_caches, fused=fused)
    return logits


def predict_greedy(model: BaseCorrector, ids, plugin: Optional[PluginModule] = None) -> list[int]:
    """Per-position argmax; numpy argmax takes the lowest index on ties."""
    if plugin is None:
        logits = forward_base(model, ids)
    else:
        logits = forward_with_plugin(model, plugin, ids)
    return [int(i) for i in logits.argmax(axis=1)]


def plugin_loss_and_grads(model: BaseCorrector, plugin: PluginModule, ids_target,
                          emb: np.ndarray, base_feats: np.ndarray) -> float:
    """One plugin-training step for a sample whose frozen-base work is precomputed.

    emb and base_feats are constants under a frozen base, so callers compute
    them once per sample; gradients flow through the frozen head into the
    plugin stack only.
    """
    plugin_caches: list = []
    plugin_feats = plugin.forward_features(emb, plugin_caches)
    fused = base_feats + plugin_feats
    logits = head_forward(model.params, fused)
    loss, dlogits = softmax_xent_loss(logits, ids_target)
    dfused = head_backward(model.params, fused, dlogits)
    plugin.backward_features(dfused, plugin_caches)
    return loss
