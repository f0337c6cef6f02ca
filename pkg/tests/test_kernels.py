"""Kernel-level tests: both backends against straight-line oracles and each other."""

import numpy as np
import pytest

from plugspell.nn import kernels
from reference import ref_attention, ref_gelu, ref_layer_norm, ref_xent

BACKENDS = kernels.available()


def make(shape, rng, dtype=np.float64):
    return rng.standard_normal(shape).astype(dtype)


@pytest.fixture(params=BACKENDS)
def K(request):
    return kernels.get_backend(request.param)


def test_compiled_backend_is_built():
    # The install is expected to produce the extension; the numpy fallback
    # exists for environments without a compiler.
    assert "c" in BACKENDS


def test_linear_fwd_matches_direct_product(K, rng):
    x, w, b = make((7, 5), rng), make((5, 9), rng), make((9,), rng)
    np.testing.assert_allclose(K.linear_fwd(x, w, b), x @ w + b, rtol=1e-12)


def test_linear_bwd_matches_transpose_formulas(K, rng):
    x, w, dy = make((7, 5), rng), make((5, 9), rng), make((7, 9), rng)
    dx, dw, db = K.linear_bwd(x, w, dy)
    np.testing.assert_allclose(dx, dy @ w.T, rtol=1e-12)
    np.testing.assert_allclose(dw, x.T @ dy, rtol=1e-12)
    np.testing.assert_allclose(db, dy.sum(axis=0), rtol=1e-12)


def test_layer_norm_fwd_matches_reference(K, rng):
    x, g, b = make((6, 8), rng), make((8,), rng), make((8,), rng)
    y, mu, rstd = K.layer_norm_fwd(x, g, b, 1e-5)
    np.testing.assert_allclose(y, ref_layer_norm(x, g, b), rtol=1e-10)
    np.testing.assert_allclose(mu, x.mean(axis=1), rtol=1e-12)


def test_layer_norm_rows_are_standardized(K, rng):
    x = make((5, 16), rng)
    ones, zeros = np.ones(16), np.zeros(16)
    y, _, _ = K.layer_norm_fwd(x, ones, zeros, 1e-12)
    np.testing.assert_allclose(y.mean(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose((y * y).mean(axis=1), 1.0, rtol=1e-6)


def test_gelu_matches_reference(K, rng):
    x = make((4, 10), rng)
    np.testing.assert_allclose(K.gelu_fwd(x), ref_gelu(x), rtol=1e-10)


def test_attention_fwd_matches_reference(K, rng):
    q, k, v = (make((6, 8), rng) for _ in range(3))
    ctx, probs = K.attention_fwd(q, k, v, 2)
    np.testing.assert_allclose(ctx, ref_attention(q, k, v, 2), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(probs.sum(axis=2), 1.0, rtol=1e-12)


def test_softmax_xent_uniform_logits_give_log_vocab(K):
    logits = np.zeros((3, 11))
    loss, dlogits = K.softmax_xent(logits, np.array([0, 5, 10], dtype=np.int64))
    assert loss == pytest.approx(np.log(11), rel=1e-12)
    # gradient rows sum to zero: softmax mass minus the one-hot target
    np.testing.assert_allclose(dlogits.sum(axis=1), 0.0, atol=1e-12)


def test_softmax_xent_matches_reference(K, rng):
    logits = make((5, 7), rng)
    targets = np.array([3, 0, 6, 2, 2], dtype=np.int64)
    loss, _ = K.softmax_xent(logits, targets)
    assert loss == pytest.approx(ref_xent(logits, targets), rel=1e-10)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_backend_parity(dtype, rng):
    if len(BACKENDS) < 2:
        pytest.skip("only one backend available")
    a, b = (kernels.get_backend(n) for n in BACKENDS)
    tol = dict(rtol=2e-5, atol=2e-6) if dtype == np.float32 else dict(rtol=1e-12, atol=1e-14)
    x, w, bias = make((9, 12), rng, dtype), make((12, 20), rng, dtype), make((20,), rng, dtype)
    np.testing.assert_allclose(a.linear_fwd(x, w, bias), b.linear_fwd(x, w, bias), **tol)
    dy = make((9, 20), rng, dtype)
    for ga, gb in zip(a.linear_bwd(x, w, dy), b.linear_bwd(x, w, dy)):
        np.testing.assert_allclose(ga, gb, **tol)
    g, beta = make((12,), rng, dtype), make((12,), rng, dtype)
    for ga, gb in zip(a.layer_norm_fwd(x, g, beta, 1e-5), b.layer_norm_fwd(x, g, beta, 1e-5)):
        np.testing.assert_allclose(ga, gb, **tol)
    mu = x.astype(dtype).mean(axis=1)
    rstd = (1.0 / np.sqrt(((x - mu[:, None]) ** 2).mean(axis=1) + np.asarray(1e-5, dtype))).astype(dtype)
    dyn = make((9, 12), rng, dtype)
    for ga, gb in zip(a.layer_norm_bwd(x, g, mu, rstd, dyn), b.layer_norm_bwd(x, g, mu, rstd, dyn)):
        np.testing.assert_allclose(ga, gb, **tol)
    q, k, v = (make((9, 12), rng, dtype) for _ in range(3))
    (ca, pa), (cb, pb) = a.attention_fwd(q, k, v, 3), b.attention_fwd(q, k, v, 3)
    np.testing.assert_allclose(ca, cb, **tol)
    dctx = make((9, 12), rng, dtype)
    for ga, gb in zip(a.attention_bwd(q, k, v, 3, pa, dctx), b.attention_bwd(q, k, v, 3, pb, dctx)):
        np.testing.assert_allclose(ga, gb, **tol)
    np.testing.assert_allclose(a.gelu_fwd(x), b.gelu_fwd(x), **tol)
    np.testing.assert_allclose(a.gelu_bwd(x, dyn), b.gelu_bwd(x, dyn), **tol)
    lg = make((9, 15), rng, dtype)
    tg = np.arange(9, dtype=np.int64) % 15
    (la, da), (lb, db) = a.softmax_xent(lg, tg), b.softmax_xent(lg, tg)
    assert la == pytest.approx(lb, rel=1e-5 if dtype == np.float32 else 1e-12)
    np.testing.assert_allclose(da, db, **tol)


def _central_diff(f, x, eps=1e-6):
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp = f()
        flat[i] = orig - eps
        lm = f()
        flat[i] = orig
        gflat[i] = (lp - lm) / (2 * eps)
    return g


def test_kernel_backwards_against_finite_differences(K, rng):
    # scalar objective: sum of squares of each kernel output
    x, w, b = make((4, 6), rng), make((6, 5), rng), make((5,), rng)

    def lin_loss():
        y = K.linear_fwd(x, w, b)
        return 0.5 * float((y * y).sum())

    y = K.linear_fwd(x, w, b)
    dx, dw, db = K.linear_bwd(x, w, y.copy())
    np.testing.assert_allclose(dx, _central_diff(lin_loss, x), rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(dw, _central_diff(lin_loss, w), rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(db, _central_diff(lin_loss, b), rtol=1e-5, atol=1e-8)

    g, beta = make((6,), rng), make((6,), rng)

    def ln_loss():
        y, _, _ = K.layer_norm_fwd(x, g, beta, 1e-5)
        return 0.5 * float((y * y).sum())

    y, mu, rstd = K.layer_norm_fwd(x, g, beta, 1e-5)
    dxn, dg, dbeta = K.layer_norm_bwd(x, g, mu, rstd, y.copy())
    np.testing.assert_allclose(dxn, _central_diff(ln_loss, x), rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(dg, _central_diff(ln_loss, g), rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(dbeta, _central_diff(ln_loss, beta), rtol=1e-4, atol=1e-7)

    q, k, v = (make((5, 6), rng) for _ in range(3))

    def attn_loss():
        ctx, _ = K.attention_fwd(q, k, v, 2)
        return 0.5 * float((ctx * ctx).sum())

    ctx, probs = K.attention_fwd(q, k, v, 2)
    dq, dk, dv = K.attention_bwd(q, k, v, 2, probs, ctx.copy())
    np.testing.assert_allclose(dq, _central_diff(attn_loss, q), rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(dk, _central_diff(attn_loss, k), rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(dv, _central_diff(attn_loss, v), rtol=1e-4, atol=1e-7)

    def gelu_loss():
        y = K.gelu_fwd(x)
        return 0.5 * float((y * y).sum())

    y = K.gelu_fwd(x)
    np.testing.assert_allclose(K.gelu_bwd(x, y.copy()), _central_diff(gelu_loss, x),
                               rtol=1e-4, atol=1e-7)

    logits = make((4, 8), rng)
    targets = np.array([1, 7, 0, 4], dtype=np.int64)

    def xent_loss():
        loss, _ = K.softmax_xent(logits, targets)
        return loss

    _, dlogits = K.softmax_xent(logits, targets)
    np.testing.assert_allclose(dlogits, _central_diff(xent_loss, logits), rtol=1e-4, atol=1e-9)
