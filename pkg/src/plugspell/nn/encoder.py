"""Forward/backward passes for the embedding, encoder stack, and head.

All functions operate on a flat name -> Parameter dict (see core.py) and one
sentence at a time, shape [n, model_dim]; there is no padding and no mask.
Backward passes consume the caches their forward produced and accumulate
gradients into trainable parameters only.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .core import EncoderConfig, Parameter

LN_EPS = 1e-5


class NonFiniteError(FloatingPointError):
    """A forward/backward pass produced NaN or Inf."""


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {name}")


def embed_forward(params: dict, ids, cfg: EncoderConfig) -> np.ndarray:
    """Token row + positional row per position; output [n, model_dim]."""
    ids = np.asarray(ids, dtype=np.int64)
    n = ids.shape[0]
    if n == 0:
        raise ValueError("empty id sequence")
    if n > cfg.max_len:
        raise ValueError(f"sequence length {n} exceeds max_len {cfg.max_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("id out of range for vocab")
    tok = params["emb.tok"].data
    pos = params["emb.pos"].data
    return tok[ids] + pos[:n]


def embed_backward(params: dict, ids, dh: np.ndarray) -> None:
    ids = np.asarray(ids, dtype=np.int64)
    tok = params["emb.tok"]
    pos = params["emb.pos"]
    if tok.trainable:
        g = np.zeros_like(tok.data)
        np.add.at(g, ids, dh)
        tok.accumulate(g)
    if pos.trainable:
        g = np.zeros_like(pos.data)
        g[: dh.shape[0]] += dh
        pos.accumulate(g)


def _layer_forward(params: dict, name: str, cfg: EncoderConfig, x, K):
    ln1 = K.layer_norm_fwd(x, params[f"{name}.ln1.g"].data, params[f"{name}.ln1.b"].data, LN_EPS)
    xn1 = ln1[0]
    q = K.linear_fwd(xn1, params[f"{name}.attn.wq"].data, params[f"{name}.attn.bq"].data)
    k = K.linear_fwd(xn1, params[f"{name}.attn.wk"].data, np.zeros(x.shape[1], dtype=x.dtype))
    v = K.linear_fwd(xn1, params[f"{name}.attn.wv"].data, params[f"{name}.attn.bv"].data)
    ctx, probs = K.attention_fwd(q, k, v, cfg.num_heads)
    ao = K.linear_fwd(ctx, params[f"{name}.attn.wo"].data, params[f"{name}.attn.bo"].data)
    h1 = x + ao
    ln2 = K.layer_norm_fwd(h1, params[f"{name}.ln2.g"].data, params[f"{name}.ln2.b"].data, LN_EPS)
    xn2 = ln2[0]
    f1 = K.linear_fwd(xn2, params[f"{name}.ffn.w1"].data, params[f"{name}.ffn.b1"].data)
    g = K.gelu_fwd(f1)
    f2 = K.linear_fwd(g, params[f"{name}.ffn.w2"].data, params[f"{name}.ffn.b2"].data)
    out = h1 + f2
    cache = (x, ln1, q, k, v, probs, ctx, h1, ln2, f1, g)
    return out, cache


def _layer_backward(params: dict, name: str, cfg: EncoderConfig, dout, cache, K):
    x, (xn1, mu1, rs1), q, k, v, probs, ctx, h1, (xn2, mu2, rs2), f1, g = cache

    def acc(pname, grad):
        params[pname].accumulate(grad)

    dh1 = dout.copy()
    dg, dw2, db2 = K.linear_bwd(g, params[f"{name}.ffn.w2"].data, dout)
    acc(f"{name}.ffn.w2", dw2)
    acc(f"{name}.ffn.b2", db2)
    df1 = K.gelu_bwd(f1, dg)
    dxn2, dw1, db1 = K.linear_bwd(xn2, params[f"{name}.ffn.w1"].data, df1)
    acc(f"{name}.ffn.w1", dw1)
    acc(f"{name}.ffn.b1", db1)
    dh1_ln, dg2, db2g = K.layer_norm_bwd(h1, params[f"{name}.ln2.g"].data, mu2, rs2, dxn2)
    acc(f"{name}.ln2.g", dg2)
    acc(f"{name}.ln2.b", db2g)
    dh1 += dh1_ln

    dx = dh1.copy()
    dctx, dwo, dbo = K.linear_bwd(ctx, params[f"{name}.attn.wo"].data, dh1)
    acc(f"{name}.attn.wo", dwo)
    acc(f"{name}.attn.bo", dbo)
    dq, dk, dv = K.attention_bwd(q, k, v, cfg.num_heads, probs, dctx)
    dxn1 = np.zeros_like(dq)
    for proj, dproj in (("wq", dq), ("wk", dk), ("wv", dv)):
        d_in, dw, db = K.linear_bwd(xn1, params[f"{name}.attn.{proj}"].data, dproj)
        dxn1 += d_in
        acc(f"{name}.attn.{proj}", dw)
        if proj != "wk":
            acc(f"{name}.attn.b{proj[1]}", db)
    dx_ln, dg1, db1g = K.layer_norm_bwd(x, params[f"{name}.ln1.g"].data, mu1, rs1, dxn1)
    acc(f"{name}.ln1.g", dg1)
    acc(f"{name}.ln1.b", db1g)
    dx += dx_ln
    return dx


def encoder_forward(params: dict, prefix: str, cfg: EncoderConfig, h: np.ndarray,
                    caches: list | None = None, num_layers: int | None = None) -> np.ndarray:
    """Run h [n, model_dim] through the pre-norm layer stack under `prefix`."""
    if h.ndim != 2 or h.shape[1] != cfg.model_dim:
        raise ValueError(f"expected [n, {cfg.model_dim}] input, got {h.shape}")
    K = kernels.get()
    layers = cfg.num_layers if num_layers is None else num_layers
    for i in range(layers):
        h, cache = _layer_forward(params, f"{prefix}.{i}", cfg, h, K)
        if caches is not None:
            caches.append(cache)
    _check_finite(f"{prefix} output", h)
    return h


def encoder_backward(params: dict, prefix: str, cfg: EncoderConfig, dout: np.ndarray,
                     caches: list, num_layers: int | None = None) -> np.ndarray:
    K = kernels.get()
    layers = cfg.num_layers if num_layers is None else num_layers
    for i in reversed(range(layers)):
        dout = _layer_backward(params, f"{prefix}.{i}", cfg, dout, caches[i], K)
    return dout


def head_forward(params: dict, h: np.ndarray) -> np.ndarray:
    """Project features to per-position vocabulary logits."""
    K = kernels.get()
    logits = K.linear_fwd(h, params["head.w"].data, params["head.b"].data)
    _check_finite("logits", logits)
    return logits


def head_backward(params: dict, h: np.ndarray, dlogits: np.ndarray) -> np.ndarray:
    K = kernels.get()
    dh, dw, db = K.linear_bwd(h, params["head.w"].data, dlogits)
    params["head.w"].accumulate(dw)
    params["head.b"].accumulate(db)
    return dh


def softmax_xent_loss(logits: np.ndarray, targets) -> tuple[float, np.ndarray]:
    K = kernels.get()
    loss, dlogits = K.softmax_xent(logits, np.asarray(targets, dtype=np.int64))
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite loss")
    return loss, dlogits


def forward_net(params: dict, cfg: EncoderConfig, ids, caches: dict | None = None) -> np.ndarray:
    """Full single-stack pass: embed -> encoder ("enc") -> head."""
    emb = embed_forward(params, ids, cfg)
    enc_caches: list | None = None if caches is None else []
    feats = encoder_forward(params, "enc", cfg, emb, enc_caches)
    logits = head_forward(params, feats)
    if caches is not None:
        caches["enc"] = enc_caches
        caches["feats"] = feats
    return logits


def loss_and_grads(params: dict, cfg: EncoderConfig, ids_in, ids_target) -> float:
    """One forward/backward pass; accumulates grads on trainable parameters."""
    ids_in = np.asarray(ids_in, dtype=np.int64)
    ids_target = np.asarray(ids_target, dtype=np.int64)
    if ids_in.shape != ids_target.shape:
        raise ValueError("input/target length mismatch")
    caches: dict = {}
    logits = forward_net(params, cfg, ids_in, caches)
    loss, dlogits = softmax_xent_loss(logits, ids_target)
    dfeats = head_backward(params, caches["feats"], dlogits)
    demb = encoder_backward(params, "enc", cfg, dfeats, caches["enc"])
    embed_backward(params, ids_in, demb)
    return loss
