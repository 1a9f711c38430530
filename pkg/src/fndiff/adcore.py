"""Dense float64 tensors with reverse-mode automatic differentiation.

Define-by-run: ops executed inside a ``with Tape():`` block record backward
closures; :func:`backward` walks the recording in exact reverse order and
sums gradients into per-tensor accumulators. Tensors outside a tape are
plain immutable arrays and freely shareable across threads; a Tape belongs
to one training step on one thread.

Elementwise ops broadcast with numpy semantics (a leading batch axis is the
main use); backward reduces gradients back to each operand's shape, so every
rule stays finite-difference checkable. Matmul follows the stacked-matrix rule (leading axes broadcast), with stack axes broadcast.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ._backend import kernels as _K

__all__ = [
    "Tensor", "Tape", "tensor", "param", "backward",
    "add", "sub", "mul", "neg", "scale", "matmul", "transpose", "reshape",
    "concat", "slice_axis", "gather", "reduce_sum", "reduce_mean",
    "softmax", "layer_norm", "gelu",
]


class Tensor:
    """A dense float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # convenience operators; the module-level functions are the real API
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return scale(self, other) if isinstance(other, (int, float)) else mul(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data) -> Tensor:
    """Constant (non-differentiated) tensor."""
    return Tensor(data, requires_grad=False)


def param(data) -> Tensor:
    """Learnable tensor: gradients are accumulated for it."""
    return Tensor(data, requires_grad=True)


# --- tape ------------------------------------------------------------------

_TAPE_STACK: list["Tape"] = []


class Tape:
    """Recording of one forward pass; single use, single thread."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple]] = []
        self.used = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self

    def record(self, out: Tensor, pulls: tuple) -> None:
        """pulls: ((input_tensor, grad_fn), ...) with grad_fn: g_out -> g_input."""
        self.nodes.append((out, pulls))


def _active_tape() -> "Tape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def backward(loss: Tensor, tape: Tape) -> dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(tensor) for every requires_grad tensor on the tape.

    The tape is consumed: a second call on the same tape is an error.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data.reshape(())):
        raise ValueError("backward called on a non-finite loss")
    if tape.used:
        raise RuntimeError("tape already consumed by a previous backward call")
    tape.used = True

    # accumulation is out-of-place (slot + contribution allocates), so grad
    # arrays may alias each other or tape temporaries; they are read-only
    accum: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    result: dict[Tensor, np.ndarray] = {}
    if loss.requires_grad:
        result[loss] = accum[id(loss)]

    for out, pulls in reversed(tape.nodes):
        g = accum.pop(id(out), None)
        if g is None:
            continue
        for inp, grad_fn in pulls:
            if not inp.requires_grad:
                continue
            contribution = grad_fn(g)
            slot = accum.get(id(inp))
            accum[id(inp)] = contribution if slot is None else slot + contribution
            result[inp] = accum[id(inp)]

    for t, g in result.items():
        t.grad = g
    return result


# --- op plumbing -----------------------------------------------------------

def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _make(out_data: np.ndarray, inputs: Sequence[Tensor],
          grad_fns: Sequence[Callable | None]) -> Tensor:
    tape = _active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        pulls = tuple(
            (t, fn) for t, fn in zip(inputs, grad_fns) if fn is not None and t.requires_grad
        )
        tape.record(out, pulls)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- elementwise and linear ops ---------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 (lambda g: _unbroadcast(g, a.data.shape),
                  lambda g: _unbroadcast(g, b.data.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 (lambda g: _unbroadcast(g, a.data.shape),
                  lambda g: _unbroadcast(-g, b.data.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 (lambda g: _unbroadcast(g * b.data, a.data.shape),
                  lambda g: _unbroadcast(g * a.data, b.data.shape)))


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), (lambda g: -g,))


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), (lambda g: g * c,))


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs >=2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul inner-axis mismatch: {a.data.shape} vs {b.data.shape}")

    if a.ndim > 2 and b.ndim == 2:
        # stacked activations x shared weight: flatten the stack so forward and
        # both gradients are single large gemms (the batched loop plus a
        # reduction is ~2x slower at these sizes)
        k, m = b.data.shape
        a_flat = a.data.reshape(-1, k)
        out = (a_flat @ b.data).reshape(a.data.shape[:-1] + (m,))
        return _make(out, (a, b),
                     (lambda g: (g.reshape(-1, m) @ b.data.T).reshape(a.data.shape),
                      lambda g: a_flat.T @ g.reshape(-1, m)))

    swap = lambda x: np.swapaxes(x, -1, -2)
    return _make(a.data @ b.data, (a, b),
                 (lambda g: _unbroadcast(g @ swap(b.data), a.data.shape),
                  lambda g: _unbroadcast(swap(a.data) @ g, b.data.shape)))


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    """Swap the last two axes by default, or permute by `axes`."""
    a = _as_tensor(a)
    if axes is None:
        axes = list(range(a.ndim - 2)) + [a.ndim - 1, a.ndim - 2]
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(np.ascontiguousarray(a.data.transpose(axes)), (a,),
                 (lambda g: g.transpose(inverse),))


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape
    return _make(np.ascontiguousarray(a.data.reshape(shape)), (a,),
                 (lambda g: g.reshape(old),))


def concat(parts: Iterable, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def slicer(k):
        def fn(g):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offsets[k], offsets[k + 1])
            return g[tuple(idx)]
        return fn

    out_data = np.concatenate([p.data for p in parts], axis=axis)
    return _make(out_data, parts, [slicer(k) for k in range(len(parts))])


def slice_axis(a, axis: int, start: int, length: int) -> Tensor:
    a = _as_tensor(a)
    if start < 0 or start + length > a.data.shape[axis]:
        raise IndexError(
            f"slice [{start}:{start + length}] out of range for axis {axis} of {a.data.shape}"
        )
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def grad_fn(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return full

    return _make(np.ascontiguousarray(a.data[idx]), (a,), (grad_fn,))


def gather(a, indices) -> Tensor:
    """Select rows along axis 0; backward scatter-adds (repeats accumulate)."""
    a = _as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= a.data.shape[0]):
        raise IndexError(f"gather index out of range for axis 0 of {a.data.shape}")

    def grad_fn(g):
        full = np.zeros_like(a.data)
        np.add.at(full, indices, g)
        return full

    return _make(a.data[indices], (a,), (grad_fn,))


def reduce_sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    shape = a.data.shape

    def grad_fn(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, shape).copy()

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), (grad_fn,))


def reduce_mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# --- kernel-backed ops -------------------------------------------------------

def _rows(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.reshape(-1, x.shape[-1]))


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax along `axis`, max-subtracted; rows sum to 1."""
    a = _as_tensor(a)
    axis = axis % a.ndim
    moved = np.ascontiguousarray(np.moveaxis(a.data, axis, -1))
    y_rows = _K.softmax_fwd(_rows(moved))
    y = np.moveaxis(y_rows.reshape(moved.shape), -1, axis)

    def grad_fn(g):
        g_moved = np.ascontiguousarray(np.moveaxis(g, axis, -1))
        dx = _K.softmax_bwd(y_rows, _rows(g_moved)).reshape(moved.shape)
        return np.moveaxis(dx, -1, axis)

    return _make(np.ascontiguousarray(y), (a,), (grad_fn,))


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    k = a.data.shape[-1]
    if gain.data.shape != (k,) or bias.data.shape != (k,):
        raise ValueError(f"gain/bias must have shape ({k},), got {gain.data.shape}, {bias.data.shape}")
    y_rows, xhat, rstd = _K.layernorm_fwd(_rows(a.data), gain.data, bias.data, eps)

    def d_a(g):
        dx, _, _ = _K.layernorm_bwd(_rows(g), xhat, rstd, gain.data)
        return dx.reshape(a.data.shape)

    def d_gain(g):
        return (_rows(g) * xhat).sum(axis=0)

    def d_bias(g):
        return _rows(g).sum(axis=0)

    return _make(y_rows.reshape(a.data.shape), (a, gain, bias), (d_a, d_gain, d_bias))


def gelu(a) -> Tensor:
    a = _as_tensor(a)
    return _make(_K.gelu_fwd(a.data), (a,), (lambda g: _K.gelu_bwd(a.data, g),))
