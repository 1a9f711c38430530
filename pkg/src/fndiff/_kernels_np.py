"""Pure-numpy implementations of the hot kernels.

Same call signatures and semantics as the compiled `_fastops` extension;
`_backend` picks whichever is available. Results agree with the compiled
kernels to floating-point reassociation (not bit-for-bit: numpy reduces
pairwise, the extension reduces sequentially).
"""

from __future__ import annotations

import numpy as np

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715
_SNAP = 1e-12


def gelu_fwd(x: np.ndarray) -> np.ndarray:
    inner = _GELU_C * (x + _GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_bwd(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)


def softmax_fwd(x: np.ndarray) -> np.ndarray:
    """Row softmax of a 2-D array, max-subtracted for stability."""
    z = x - x.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    dot = (dy * y).sum(axis=1, keepdims=True)
    return y * (dy - dot)


def layernorm_fwd(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float):
    """Row layer-norm; returns (y, xhat, rstd) with rstd kept for backward."""
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layernorm_bwd(dy: np.ndarray, xhat: np.ndarray, rstd: np.ndarray, gain: np.ndarray):
    """Returns (dx, dgain, dbias)."""
    dxhat = dy * gain
    m1 = dxhat.mean(axis=1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = rstd[:, None] * (dxhat - m1 - xhat * m2)
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    return dx, dgain, dbias


def interp_multilinear(
    flat_values: np.ndarray,
    res: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    pts: np.ndarray,
) -> np.ndarray:
    """Multilinear interpolation on a regular grid.

    flat_values: (prod(res), channels), C-order over the res axes.
    pts: (n, dim), assumed inside [lo, hi] (caller validates).
    Coordinates within 1e-12 of a node (in cell units) snap to the node so
    lattice points reproduce stored values exactly.
    """
    n, dim = pts.shape
    u = (pts - lo) / (hi - lo) * (res - 1)
    cell = np.floor(u).astype(np.int64)
    np.clip(cell, 0, res - 2, out=cell)
    frac = u - cell
    frac[frac < _SNAP] = 0.0
    frac[frac > 1.0 - _SNAP] = 1.0

    strides = np.ones(dim, dtype=np.int64)
    for d in range(dim - 2, -1, -1):
        strides[d] = strides[d + 1] * res[d + 1]

    out = np.zeros((n, flat_values.shape[1]))
    for corner in range(1 << dim):
        w = np.ones(n)
        idx = np.zeros(n, dtype=np.int64)
        for d in range(dim):
            bit = (corner >> d) & 1
            w = w * (frac[:, d] if bit else 1.0 - frac[:, d])
            idx += (cell[:, d] + bit) * strides[d]
        out += w[:, None] * flat_values[idx]
    return out


def nn_min_dists(a: np.ndarray, b: np.ndarray, block: int = 512) -> np.ndarray:
    """Per-point Euclidean distance from each row of `a` to its nearest row of `b`."""
    out = np.empty(len(a))
    for start in range(0, len(a), block):
        chunk = a[start : start + block]
        d2 = ((chunk[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        out[start : start + block] = np.sqrt(d2.min(axis=1))
    return out
