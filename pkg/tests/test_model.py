"""Composition of embedding, encoders, plugin fusion, and greedy prediction."""

import logging

import numpy as np
import pytest

from plugspell.model import (BaseCorrector, PluginMismatchError, PluginModule,
                             PluginRegistry, check_compatible, forward_base,
                             forward_with_plugin, predict_greedy)
from plugspell.nn.core import EncoderConfig
from plugspell.nn.encoder import embed_forward, encoder_forward, head_forward
from plugspell.text import CharVocab


@pytest.fixture
def vocab():
    return CharVocab("".join(chr(0x4E00 + i) for i in range(20)))


@pytest.fixture
def model(vocab):
    cfg = EncoderConfig(vocab_size=vocab.size, model_dim=16, num_layers=2,
                        num_heads=2, max_len=12)
    return BaseCorrector.create(vocab, cfg, seed=5)


class ZeroPlugin:
    """Stub whose feature output is the zero tensor."""

    def __init__(self, base):
        self.name = "zero"
        self.cfg = base.cfg
        self.base_fingerprint = base.fingerprint()

    def forward_features(self, emb, caches=None):
        return np.zeros_like(emb)


def test_forward_base_matches_hand_composition(model):
    ids = [4, 9, 1, 6]
    logits = forward_base(model, ids)
    emb = embed_forward(model.params, ids, model.cfg)
    feats = encoder_forward(model.params, "enc", model.cfg, emb)
    expected = head_forward(model.params, feats)
    np.testing.assert_array_equal(logits, expected)


def test_forward_base_is_deterministic(model):
    ids = [4, 9, 1, 6]
    a = forward_base(model, ids)
    b = forward_base(model, ids)
    assert a.tobytes() == b.tobytes()


def test_zero_plugin_is_additive_identity(model):
    ids = [4, 9, 1]
    base_logits = forward_base(model, ids)
    fused_logits = forward_with_plugin(model, ZeroPlugin(model), ids)
    assert base_logits.tobytes() == fused_logits.tobytes()


def test_zero_base_features_leave_plugin_path(model, vocab):
    # symmetric identity: a base whose encoder output is the zero tensor
    # reduces the fused pass to head(plugin(embed(ids)))
    plugin = PluginModule.create("med", model, seed=9)
    for i in range(model.cfg.num_layers):
        model.params[f"enc.{i}.attn.wo"].data[:] = 0
        model.params[f"enc.{i}.attn.bo"].data[:] = 0
        model.params[f"enc.{i}.ffn.w2"].data[:] = 0
        model.params[f"enc.{i}.ffn.b2"].data[:] = 0
    # zero-residual layers are the identity, so "zero base features" needs the
    # embedding contribution cancelled out of the fused sum instead
    ids = [4, 9, 1]
    emb = embed_forward(model.params, ids, model.cfg)
    plugin_feats = plugin.forward_features(emb)
    fused = forward_with_plugin(model, plugin, ids)
    expected = head_forward(model.params, emb + plugin_feats)
    np.testing.assert_array_equal(fused, expected)


def test_fused_pass_matches_hand_composition(model):
    plugin = PluginModule.create("med", model, seed=11)
    ids = [3, 7, 5]
    fused = forward_with_plugin(model, plugin, ids)
    emb = embed_forward(model.params, ids, model.cfg)
    base_feats = encoder_forward(model.params, "enc", model.cfg, emb)
    plugin_feats = encoder_forward(plugin.params, "plg", plugin.cfg, emb)
    expected = head_forward(model.params, base_feats + plugin_feats)
    np.testing.assert_array_equal(fused, expected)


def test_both_branches_consume_the_same_embedding(model):
    # zero the positional table on a copy: if the plugin had its own
    # embedding, logits would diverge from the hand-composed trace
    plugin = PluginModule.create("law", model, seed=13)
    ids = [3, 3, 3]
    emb = embed_forward(model.params, ids, model.cfg)
    expected = head_forward(
        model.params,
        encoder_forward(model.params, "enc", model.cfg, emb)
        + encoder_forward(plugin.params, "plg", plugin.cfg, emb))
    np.testing.assert_array_equal(forward_with_plugin(model, plugin, ids), expected)


def test_dim_mismatch_raises(model, vocab):
    cfg = EncoderConfig(vocab_size=vocab.size, model_dim=8, num_layers=1,
                        num_heads=2, max_len=12)
    other = BaseCorrector.create(vocab, cfg, seed=1)
    plugin = PluginModule.create("med", other, seed=2)
    with pytest.raises(PluginMismatchError):
        forward_with_plugin(model, plugin, [3, 4])


def test_fingerprint_mismatch_warns_and_proceeds(model, caplog):
    plugin = PluginModule.create("med", model, seed=11)
    plugin.base_fingerprint = "not-the-right-base"
    with caplog.at_level(logging.WARNING):
        ok = check_compatible(model, plugin)
    assert ok is False
    assert any("different base" in r.message for r in caplog.records)
    forward_with_plugin(model, plugin, [3, 4])  # proceeds


def test_predict_greedy_bias_dominance(model):
    model.params["head.w"].data[:] = 0
    model.params["head.b"].data[:] = 0
    model.params["head.b"].data[7] = 2.0
    assert predict_greedy(model, [3, 4, 5]) == [7, 7, 7]


def test_predict_greedy_tie_breaks_to_lowest_index(model):
    model.params["head.w"].data[:] = 0
    model.params["head.b"].data[:] = 0
    model.params["head.b"].data[4] = 1.5
    model.params["head.b"].data[7] = 1.5
    assert predict_greedy(model, [3, 4]) == [4, 4]


def test_predict_preserves_length(model):
    for n in (1, 3, 8):
        assert len(predict_greedy(model, [5] * n)) == n


def test_plugin_checkpoint_round_trip(model, tmp_path):
    plugin = PluginModule.create("med", model, seed=11, num_layers=1)
    path = tmp_path / "plugin.ckpt"
    plugin.save(path)
    loaded = PluginModule.load(path)
    assert loaded.name == "med"
    assert loaded.cfg == plugin.cfg
    assert loaded.base_fingerprint == model.fingerprint()
    assert loaded.seed == 11
    for name, p in plugin.params.items():
        assert loaded.params[name].data.tobytes() == p.data.tobytes()


def test_base_checkpoint_round_trip_keeps_vocab(model, tmp_path):
    path = tmp_path / "base.ckpt"
    model.save(path)
    loaded = BaseCorrector.load(path)
    assert loaded.vocab.chars == model.vocab.chars
    assert loaded.cfg == model.cfg
    assert loaded.fingerprint() == model.fingerprint()


def test_registry_enforces_unique_labels(model):
    reg = PluginRegistry()
    reg.register(PluginModule.create("med", model, seed=1))
    with pytest.raises(ValueError):
        reg.register(PluginModule.create("med", model, seed=2))
    assert reg.labels() == ("med",)
    assert reg.get("med").name == "med"
    reg.unregister("med")
    assert len(reg) == 0
