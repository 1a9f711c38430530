# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: fused activation/normalization passes, grid
interpolation and nearest-neighbor scans. Mirrors `_kernels_np`."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, floor, sqrt, tanh

cnp.import_array()

cdef double GELU_C = sqrt(2.0 / 3.141592653589793)
cdef double GELU_A = 0.044715
cdef double SNAP = 1e-12


def gelu_fwd(object x_arr):
    cdef cnp.ndarray[double, ndim=1] x = np.ascontiguousarray(x_arr, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] y = np.empty_like(x)
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v
    for i in range(n):
        v = x[i]
        y[i] = 0.5 * v * (1.0 + tanh(GELU_C * (v + GELU_A * v * v * v)))
    return y.reshape(x_arr.shape)


def gelu_bwd(object x_arr, object dy_arr):
    cdef cnp.ndarray[double, ndim=1] x = np.ascontiguousarray(x_arr, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] dy = np.ascontiguousarray(dy_arr, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] dx = np.empty_like(x)
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double v, t, dinner
    for i in range(n):
        v = x[i]
        t = tanh(GELU_C * (v + GELU_A * v * v * v))
        dinner = GELU_C * (1.0 + 3.0 * GELU_A * v * v)
        dx[i] = dy[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner)
    return dx.reshape(x_arr.shape)


def softmax_fwd(object x_arr):
    cdef cnp.ndarray[double, ndim=2] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] y = np.empty_like(x)
    cdef Py_ssize_t i, j, n = x.shape[0], k = x.shape[1]
    cdef double m, s
    for i in range(n):
        m = x[i, 0]
        for j in range(1, k):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(k):
            y[i, j] = exp(x[i, j] - m)
            s += y[i, j]
        for j in range(k):
            y[i, j] /= s
    return y


def softmax_bwd(object y_arr, object dy_arr):
    cdef cnp.ndarray[double, ndim=2] y = np.ascontiguousarray(y_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dy = np.ascontiguousarray(dy_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] dx = np.empty_like(y)
    cdef Py_ssize_t i, j, n = y.shape[0], k = y.shape[1]
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(k):
            dot += dy[i, j] * y[i, j]
        for j in range(k):
            dx[i, j] = y[i, j] * (dy[i, j] - dot)
    return dx


def layernorm_fwd(object x_arr, object g_arr, object b_arr, double eps):
    cdef cnp.ndarray[double, ndim=2] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] g = np.ascontiguousarray(g_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] b = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t i, j, n = x.shape[0], k = x.shape[1]
    cdef cnp.ndarray[double, ndim=2] y = np.empty_like(x)
    cdef cnp.ndarray[double, ndim=2] xhat = np.empty_like(x)
    cdef cnp.ndarray[double, ndim=1] rstd = np.empty(n)
    cdef double mean, var, c, r
    for i in range(n):
        mean = 0.0
        for j in range(k):
            mean += x[i, j]
        mean /= k
        var = 0.0
        for j in range(k):
            c = x[i, j] - mean
            var += c * c
        var /= k
        r = 1.0 / sqrt(var + eps)
        rstd[i] = r
        for j in range(k):
            xhat[i, j] = (x[i, j] - mean) * r
            y[i, j] = xhat[i, j] * g[j] + b[j]
    return y, xhat, rstd


def layernorm_bwd(object dy_arr, object xhat_arr, object rstd_arr, object g_arr):
    cdef cnp.ndarray[double, ndim=2] dy = np.ascontiguousarray(dy_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] xhat = np.ascontiguousarray(xhat_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rstd = np.ascontiguousarray(rstd_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] g = np.ascontiguousarray(g_arr, dtype=np.float64)
    cdef Py_ssize_t i, j, n = dy.shape[0], k = dy.shape[1]
    cdef cnp.ndarray[double, ndim=2] dx = np.empty_like(dy)
    cdef cnp.ndarray[double, ndim=1] dg = np.zeros(k)
    cdef cnp.ndarray[double, ndim=1] db = np.zeros(k)
    cdef double m1, m2, dxh
    for i in range(n):
        m1 = 0.0
        m2 = 0.0
        for j in range(k):
            dxh = dy[i, j] * g[j]
            m1 += dxh
            m2 += dxh * xhat[i, j]
        m1 /= k
        m2 /= k
        for j in range(k):
            dxh = dy[i, j] * g[j]
            dx[i, j] = rstd[i] * (dxh - m1 - xhat[i, j] * m2)
            dg[j] += dy[i, j] * xhat[i, j]
            db[j] += dy[i, j]
    return dx, dg, db


def interp_multilinear(object values_arr, object res_arr,
                       object lo_arr, object hi_arr, object pts_arr):
    cdef cnp.ndarray[double, ndim=2] values = np.ascontiguousarray(values_arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] res = np.ascontiguousarray(res_arr, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] lo = np.ascontiguousarray(lo_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hi = np.ascontiguousarray(hi_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] pts = np.ascontiguousarray(pts_arr, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], dim = pts.shape[1], ch = values.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n, ch))
    cdef cnp.int64_t[8] strides
    cdef cnp.int64_t[8] cell
    cdef double[8] frac
    cdef Py_ssize_t i, d, c, corner, bit
    cdef cnp.int64_t idx
    cdef double u, w

    strides[dim - 1] = 1
    for d in range(dim - 2, -1, -1):
        strides[d] = strides[d + 1] * res[d + 1]

    for i in range(n):
        for d in range(dim):
            u = (pts[i, d] - lo[d]) / (hi[d] - lo[d]) * (res[d] - 1)
            cell[d] = <cnp.int64_t>floor(u)
            if cell[d] < 0:
                cell[d] = 0
            if cell[d] > res[d] - 2:
                cell[d] = res[d] - 2
            frac[d] = u - cell[d]
            if frac[d] < SNAP:
                frac[d] = 0.0
            elif frac[d] > 1.0 - SNAP:
                frac[d] = 1.0
        for corner in range(1 << dim):
            w = 1.0
            idx = 0
            for d in range(dim):
                bit = (corner >> d) & 1
                w *= frac[d] if bit else 1.0 - frac[d]
                idx += (cell[d] + bit) * strides[d]
            if w != 0.0:
                for c in range(ch):
                    out[i, c] += w * values[idx, c]
    return out


def nn_min_dists(object a_arr, object b_arr, Py_ssize_t block=512):
    cdef cnp.ndarray[double, ndim=2] a = np.ascontiguousarray(a_arr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] b = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t i, j, d, n = a.shape[0], m = b.shape[0], dim = a.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double best, acc, diff
    for i in range(n):
        best = 1e300
        for j in range(m):
            acc = 0.0
            for d in range(dim):
                diff = a[i, d] - b[j, d]
                acc += diff * diff
            if acc < best:
                best = acc
        out[i] = sqrt(best)
    return out
