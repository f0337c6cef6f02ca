"""Straight-line re-implementations used only as test oracles.

Deliberately written with explicit per-row loops and none of the package's
kernel code, so a bug in the kernels cannot hide in the oracle.
"""

import math

import numpy as np


def ref_layer_norm(x, g, b, eps=1e-5):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        row = x[i]
        m = row.sum() / row.size
        var = ((row - m) ** 2).sum() / row.size
        out[i] = (row - m) / np.sqrt(var + eps) * g + b
    return out


def ref_gelu(x):
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x ** 3)))


def ref_softmax_rows(s):
    out = np.empty_like(s)
    for i in range(s.shape[0]):
        row = s[i] - s[i].max()
        e = np.exp(row)
        out[i] = e / e.sum()
    return out


def ref_attention(q, k, v, num_heads):
    n, d = q.shape
    dh = d // num_heads
    out = np.zeros_like(q)
    for h in range(num_heads):
        sl = slice(h * dh, (h + 1) * dh)
        scores = np.empty((n, n), dtype=q.dtype)
        for i in range(n):
            for j in range(n):
                scores[i, j] = float(np.dot(q[i, sl], k[j, sl])) / math.sqrt(dh)
        probs = ref_softmax_rows(scores)
        for i in range(n):
            for t in range(dh):
                out[i, h * dh + t] = sum(probs[i, j] * v[j, h * dh + t] for j in range(n))
    return out


def ref_encoder_layer(x, p, num_heads, eps=1e-5):
    """p maps short names (ln1_g, wq, bq, ..., w1, b1, w2, b2) to arrays."""
    xn1 = ref_layer_norm(x, p["ln1_g"], p["ln1_b"], eps)
    q = xn1 @ p["wq"] + p["bq"]
    k = xn1 @ p["wk"]
    v = xn1 @ p["wv"] + p["bv"]
    ctx = ref_attention(q, k, v, num_heads)
    h1 = x + ctx @ p["wo"] + p["bo"]
    xn2 = ref_layer_norm(h1, p["ln2_g"], p["ln2_b"], eps)
    return h1 + ref_gelu(xn2 @ p["w1"] + p["b1"]) @ p["w2"] + p["b2"]


def ref_encoder(params, prefix, num_layers, num_heads, x, eps=1e-5):
    """params is the package's name -> Parameter dict; only .data is read."""
    h = x
    for i in range(num_layers):
        g = lambda s: params[f"{prefix}.{i}.{s}"].data
        p = {
            "ln1_g": g("ln1.g"), "ln1_b": g("ln1.b"),
            "wq": g("attn.wq"), "bq": g("attn.bq"),
            "wk": g("attn.wk"),
            "wv": g("attn.wv"), "bv": g("attn.bv"),
            "wo": g("attn.wo"), "bo": g("attn.bo"),
            "ln2_g": g("ln2.g"), "ln2_b": g("ln2.b"),
            "w1": g("ffn.w1"), "b1": g("ffn.b1"),
            "w2": g("ffn.w2"), "b2": g("ffn.b2"),
        }
        h = ref_encoder_layer(h, p, num_heads, eps)
    return h


def ref_xent(logits, targets):
    total = 0.0
    for i, t in enumerate(targets):
        row = logits[i] - logits[i].max()
        total += -(row[t] - np.log(np.exp(row).sum()))
    return total / len(targets)
