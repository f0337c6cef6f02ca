"""Numpy reference implementation of the hot kernels.

Every function here has a signature-identical twin in the compiled backend
(_ckernels.pyx); the dispatcher in __init__ picks one at import time. Arrays
may be float32 or float64 (all args of one call share a dtype); 2-D inputs are
C-contiguous.
"""

from __future__ import annotations

import math

import numpy as np

GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715


def linear_fwd(x, w, b):
    # x: [n, di], w: [di, do], b: [do] -> [n, do]
    return x @ w + b


def linear_bwd(x, w, dy):
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return np.ascontiguousarray(dx), np.ascontiguousarray(dw), db


def layer_norm_fwd(x, gamma, beta, eps):
    # x: [n, d]; returns (y, mean[n], rstd[n])
    mu = x.mean(axis=1)
    xc = x - mu[:, None]
    var = np.mean(xc * xc, axis=1)
    rstd = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    y = xc * rstd[:, None] * gamma + beta
    return y, mu, rstd


def layer_norm_bwd(x, gamma, mu, rstd, dy):
    xhat = (x - mu[:, None]) * rstd[:, None]
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dx = rstd[:, None] * (
        dxhat
        - dxhat.mean(axis=1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
    )
    return np.ascontiguousarray(dx), dgamma, dbeta


def gelu_fwd(x):
    # tanh approximation; the backward below differentiates this exact form
    u = np.tanh(GELU_C * (x + GELU_A * x * x * x))
    return 0.5 * x * (1.0 + u)


def gelu_bwd(x, dy):
    u = np.tanh(GELU_C * (x + GELU_A * x * x * x))
    du = (1.0 - u * u) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
    return dy * (0.5 * (1.0 + u) + 0.5 * x * du)


def attention_fwd(q, k, v, num_heads):
    # q/k/v: [n, d]; full bidirectional attention, no mask.
    # Returns (ctx [n, d], probs [h, n, n]).
    n, d = q.shape
    dh = d // num_heads
    scale = 1.0 / math.sqrt(dh)
    qh = q.reshape(n, num_heads, dh).transpose(1, 0, 2)
    kh = k.reshape(n, num_heads, dh).transpose(1, 0, 2)
    vh = v.reshape(n, num_heads, dh).transpose(1, 0, 2)
    scores = qh @ kh.transpose(0, 2, 1) * scale
    scores -= scores.max(axis=2, keepdims=True)
    np.exp(scores, out=scores)
    probs = scores / scores.sum(axis=2, keepdims=True)
    ctx = (probs @ vh).transpose(1, 0, 2).reshape(n, d)
    return np.ascontiguousarray(ctx), np.ascontiguousarray(probs)


def attention_bwd(q, k, v, num_heads, probs, dctx):
    n, d = q.shape
    dh = d // num_heads
    scale = 1.0 / math.sqrt(dh)
    qh = q.reshape(n, num_heads, dh).transpose(1, 0, 2)
    kh = k.reshape(n, num_heads, dh).transpose(1, 0, 2)
    vh = v.reshape(n, num_heads, dh).transpose(1, 0, 2)
    dctxh = dctx.reshape(n, num_heads, dh).transpose(1, 0, 2)
    dprobs = dctxh @ vh.transpose(0, 2, 1)
    dvh = probs.transpose(0, 2, 1) @ dctxh
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=2, keepdims=True))
    dscores *= scale
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 2, 1) @ qh
    dq = dqh.transpose(1, 0, 2).reshape(n, d)
    dk = dkh.transpose(1, 0, 2).reshape(n, d)
    dv = dvh.transpose(1, 0, 2).reshape(n, d)
    return (np.ascontiguousarray(dq), np.ascontiguousarray(dk), np.ascontiguousarray(dv))


def softmax_xent(logits, targets):
    # Mean per-position cross entropy; returns (loss, dlogits).
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    idx = np.arange(n)
    loss = -logp[idx, targets].mean()
    dlogits = np.exp(logp)
    dlogits[idx, targets] -= 1.0
    dlogits /= n
    return float(loss), dlogits
