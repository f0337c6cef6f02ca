# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of _npkernels: BLAS-backed linears, fused C loops elsewhere.

Same signatures and the same math as the numpy backend, specialized for
float32 and float64. Matrix products go through BLAS (via scipy's exported
cython_blas symbols); the elementwise/reduction kernels are plain C loops,
which avoids the per-call temporaries the numpy versions allocate.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expf, log, logf, sqrt, tanh, tanhf
from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused floating:
    float
    double

cdef double GELU_C = sqrt(2.0 / 3.14159265358979323846)
cdef double GELU_A = 0.044715


cdef inline floating fexp(floating x) noexcept nogil:
    if floating is float:
        return expf(x)
    else:
        return exp(x)


cdef inline floating ftanh(floating x) noexcept nogil:
    if floating is float:
        return tanhf(x)
    else:
        return tanh(x)


cdef inline floating flog(floating x) noexcept nogil:
    if floating is float:
        return logf(x)
    else:
        return log(x)


cdef object _empty(shape, bint is_double):
    return np.empty(shape, dtype=np.float64 if is_double else np.float32)


cdef void gemm_rm(bint transa, bint transb, int m, int n, int k,
                  floating alpha, floating* a, floating* b,
                  floating beta, floating* c) noexcept nogil:
    # Row-major C[m,n] = alpha * op(A) @ op(B) + beta * C, mapped onto
    # Fortran BLAS by computing C^T = op(B)^T op(A)^T in column-major.
    cdef char fa = b'T' if transa else b'N'
    cdef char fb = b'T' if transb else b'N'
    cdef int lda = m if transa else k
    cdef int ldb = k if transb else n
    cdef int ldc = n
    if floating is float:
        sgemm(&fb, &fa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)
    else:
        dgemm(&fb, &fa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


def linear_fwd(floating[:, ::1] x, floating[:, ::1] w, floating[::1] b):
    cdef int n = x.shape[0], di = x.shape[1], do = w.shape[1]
    y_np = _empty((n, do), floating is double)
    cdef floating[:, ::1] y = y_np
    cdef int i, j
    with nogil:
        for i in range(n):
            for j in range(do):
                y[i, j] = b[j]
        gemm_rm(False, False, n, do, di, <floating>1.0, &x[0, 0], &w[0, 0], <floating>1.0, &y[0, 0])
    return y_np


def linear_bwd(floating[:, ::1] x, floating[:, ::1] w, floating[:, ::1] dy):
    cdef int n = x.shape[0], di = x.shape[1], do = w.shape[1]
    dx_np = _empty((n, di), floating is double)
    dw_np = _empty((di, do), floating is double)
    db_np = _empty((do,), floating is double)
    cdef floating[:, ::1] dx = dx_np
    cdef floating[:, ::1] dw = dw_np
    cdef floating[::1] db = db_np
    cdef int i, j
    cdef floating acc
    with nogil:
        gemm_rm(False, True, n, di, do, <floating>1.0, &dy[0, 0], &w[0, 0], <floating>0.0, &dx[0, 0])
        gemm_rm(True, False, di, do, n, <floating>1.0, &x[0, 0], &dy[0, 0], <floating>0.0, &dw[0, 0])
        for j in range(do):
            acc = 0
            for i in range(n):
                acc += dy[i, j]
            db[j] = acc
    return dx_np, dw_np, db_np


def layer_norm_fwd(floating[:, ::1] x, floating[::1] gamma, floating[::1] beta, double eps):
    cdef int n = x.shape[0], d = x.shape[1]
    y_np = _empty((n, d), floating is double)
    mu_np = _empty((n,), floating is double)
    rstd_np = _empty((n,), floating is double)
    cdef floating[:, ::1] y = y_np
    cdef floating[::1] mu = mu_np
    cdef floating[::1] rstd = rstd_np
    cdef int i, j
    cdef floating m, var, r, xc
    with nogil:
        for i in range(n):
            m = 0
            for j in range(d):
                m += x[i, j]
            m /= d
            var = 0
            for j in range(d):
                xc = x[i, j] - m
                var += xc * xc
            var /= d
            r = <floating>1.0 / <floating>sqrt(var + <floating>eps)
            mu[i] = m
            rstd[i] = r
            for j in range(d):
                y[i, j] = (x[i, j] - m) * r * gamma[j] + beta[j]
    return y_np, mu_np, rstd_np


def layer_norm_bwd(floating[:, ::1] x, floating[::1] gamma, floating[::1] mu,
                   floating[::1] rstd, floating[:, ::1] dy):
    cdef int n = x.shape[0], d = x.shape[1]
    dx_np = _empty((n, d), floating is double)
    dgamma_np = np.zeros(d, dtype=np.float64 if floating is double else np.float32)
    dbeta_np = np.zeros(d, dtype=np.float64 if floating is double else np.float32)
    cdef floating[:, ::1] dx = dx_np
    cdef floating[::1] dgamma = dgamma_np
    cdef floating[::1] dbeta = dbeta_np
    cdef int i, j
    cdef floating s1, s2, xh, dxh
    with nogil:
        for i in range(n):
            s1 = 0
            s2 = 0
            for j in range(d):
                xh = (x[i, j] - mu[i]) * rstd[i]
                dxh = dy[i, j] * gamma[j]
                s1 += dxh
                s2 += dxh * xh
                dgamma[j] += dy[i, j] * xh
                dbeta[j] += dy[i, j]
            s1 /= d
            s2 /= d
            for j in range(d):
                xh = (x[i, j] - mu[i]) * rstd[i]
                dxh = dy[i, j] * gamma[j]
                dx[i, j] = rstd[i] * (dxh - s1 - xh * s2)
    return dx_np, dgamma_np, dbeta_np


def gelu_fwd(floating[:, ::1] x):
    cdef int n = x.shape[0], d = x.shape[1]
    y_np = _empty((n, d), floating is double)
    cdef floating[:, ::1] y = y_np
    cdef int i, j
    cdef floating u, xv
    with nogil:
        for i in range(n):
            for j in range(d):
                xv = x[i, j]
                u = ftanh(<floating>GELU_C * (xv + <floating>GELU_A * xv * xv * xv))
                y[i, j] = <floating>0.5 * xv * (<floating>1.0 + u)
    return y_np


def gelu_bwd(floating[:, ::1] x, floating[:, ::1] dy):
    cdef int n = x.shape[0], d = x.shape[1]
    dx_np = _empty((n, d), floating is double)
    cdef floating[:, ::1] dx = dx_np
    cdef int i, j
    cdef floating u, du, xv
    with nogil:
        for i in range(n):
            for j in range(d):
                xv = x[i, j]
                u = ftanh(<floating>GELU_C * (xv + <floating>GELU_A * xv * xv * xv))
                du = (<floating>1.0 - u * u) * <floating>GELU_C * (<floating>1.0 + <floating>3.0 * <floating>GELU_A * xv * xv)
                dx[i, j] = dy[i, j] * (<floating>0.5 * (<floating>1.0 + u) + <floating>0.5 * xv * du)
    return dx_np


def attention_fwd(floating[:, ::1] q, floating[:, ::1] k, floating[:, ::1] v, int num_heads):
    cdef int n = q.shape[0], d = q.shape[1]
    cdef int dh = d // num_heads
    cdef floating scale = <floating>(1.0 / sqrt(<double>dh))
    ctx_np = _empty((n, d), floating is double)
    probs_np = _empty((num_heads, n, n), floating is double)
    srow_np = _empty((n,), floating is double)
    cdef floating[:, ::1] ctx = ctx_np
    cdef floating[:, :, ::1] probs = probs_np
    cdef floating[::1] srow = srow_np
    cdef int h, i, j, t, off
    cdef floating s, mx, ssum, inv, acc
    with nogil:
        for h in range(num_heads):
            off = h * dh
            for i in range(n):
                mx = 0
                for j in range(n):
                    s = 0
                    for t in range(dh):
                        s += q[i, off + t] * k[j, off + t]
                    s *= scale
                    srow[j] = s
                    if j == 0 or s > mx:
                        mx = s
                ssum = 0
                for j in range(n):
                    s = fexp(srow[j] - mx)
                    probs[h, i, j] = s
                    ssum += s
                inv = <floating>1.0 / ssum
                for j in range(n):
                    probs[h, i, j] *= inv
                for t in range(dh):
                    acc = 0
                    for j in range(n):
                        acc += probs[h, i, j] * v[j, off + t]
                    ctx[i, off + t] = acc
    return ctx_np, probs_np


def attention_bwd(floating[:, ::1] q, floating[:, ::1] k, floating[:, ::1] v,
                  int num_heads, floating[:, :, ::1] probs, floating[:, ::1] dctx):
    cdef int n = q.shape[0], d = q.shape[1]
    cdef int dh = d // num_heads
    cdef floating scale = <floating>(1.0 / sqrt(<double>dh))
    dq_np = np.zeros((n, d), dtype=np.float64 if floating is double else np.float32)
    dk_np = np.zeros((n, d), dtype=np.float64 if floating is double else np.float32)
    dv_np = np.zeros((n, d), dtype=np.float64 if floating is double else np.float32)
    drow_np = _empty((n,), floating is double)
    cdef floating[:, ::1] dq = dq_np
    cdef floating[:, ::1] dk = dk_np
    cdef floating[:, ::1] dv = dv_np
    cdef floating[::1] drow = drow_np
    cdef int h, i, j, t, off
    cdef floating dp, dot, ds
    with nogil:
        for h in range(num_heads):
            off = h * dh
            for i in range(n):
                # dprobs row and its probs-weighted mean
                dot = 0
                for j in range(n):
                    dp = 0
                    for t in range(dh):
                        dp += dctx[i, off + t] * v[j, off + t]
                    drow[j] = dp
                    dot += dp * probs[h, i, j]
                for j in range(n):
                    ds = probs[h, i, j] * (drow[j] - dot) * scale
                    for t in range(dh):
                        dq[i, off + t] += ds * k[j, off + t]
                        dk[j, off + t] += ds * q[i, off + t]
                        dv[j, off + t] += probs[h, i, j] * dctx[i, off + t]
    return dq_np, dk_np, dv_np


def softmax_xent(floating[:, ::1] logits, cnp.int64_t[::1] targets):
    cdef int n = logits.shape[0], V = logits.shape[1]
    dlogits_np = _empty((n, V), floating is double)
    cdef floating[:, ::1] dlogits = dlogits_np
    cdef int i, j
    cdef cnp.int64_t tgt
    cdef floating mx, ssum, p
    cdef double loss = 0.0
    cdef floating inv_n = <floating>(1.0 / n)
    with nogil:
        for i in range(n):
            tgt = targets[i]
            mx = logits[i, 0]
            for j in range(1, V):
                if logits[i, j] > mx:
                    mx = logits[i, j]
            ssum = 0
            for j in range(V):
                p = fexp(logits[i, j] - mx)
                dlogits[i, j] = p
                ssum += p
            loss += -(<double>(logits[i, tgt] - mx) - <double>flog(ssum))
            for j in range(V):
                dlogits[i, j] = dlogits[i, j] / ssum * inv_n
            dlogits[i, tgt] -= inv_n
    return loss / n, dlogits_np
