"""Tape-based reverse-mode automatic differentiation over float64 arrays.

Forward ops run on numpy and, while a :class:`Tape` is active, record a
backward closure whenever an input requires gradients.  ``tape.backward``
walks the tape in reverse and accumulates ``.grad`` on every leaf tensor
with ``requires_grad``.  Ops run fine with no tape active (inference).

Elementwise ops follow numpy broadcasting (gradients are summed back over
broadcast axes); matmul supports the 2D/1D combinations listed on the op.
Masks are additive arrays of 0 (keep) and ``-inf`` (drop).  All data is
float64; a fully masked softmax row or an out-of-range gather index is an
error rather than a silent NaN.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

NEG_INF = float("-inf")


class Tensor:
    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad)


_TAPES: list["Tape"] = []


class Tape:
    """Recording context; one training step runs under a single tape."""

    def __init__(self):
        self._entries: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._produced: set[int] = set()

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self._entries)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> None:
        self._entries.append((out, inputs, backward))
        self._produced.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` on all requires_grad leaves reachable from loss."""
        if loss.data.ndim != 0:
            raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
        if id(loss) not in self._produced:
            raise ValueError("backward through a tensor not on the tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for out, inputs, backward_fn in reversed(self._entries):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for t, gi in zip(inputs, backward_fn(g)):
                if gi is None or not t.requires_grad:
                    continue
                if id(t) in self._produced:
                    acc = grads.get(id(t))
                    grads[id(t)] = gi if acc is None else acc + gi
                else:
                    t.grad = gi if t.grad is None else t.grad + gi


def _active() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _make(data: np.ndarray, inputs: tuple[Tensor, ...], backward: Callable) -> Tensor:
    tape = _active()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if track:
        tape.record(out, inputs, backward)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise and shape ops


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for (2D,2D), (2D,1D), (1D,2D) and (1D,1D) operands."""
    if a.ndim == 2 and b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        backward = lambda g: (g @ b.data.T, a.data.T @ g)
    elif a.ndim == 2 and b.ndim == 1:
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        backward = lambda g: (np.outer(g, b.data), a.data.T @ g)
    elif a.ndim == 1 and b.ndim == 2:
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        backward = lambda g: (b.data @ g, np.outer(a.data, g))
    elif a.ndim == 1 and b.ndim == 1:
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        backward = lambda g: (g * b.data, g * a.data)
    else:
        raise ValueError(f"unsupported matmul ranks {a.ndim} @ {b.ndim}")
    return _make(a.data @ b.data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ValueError("transpose expects a 2D tensor")
    return _make(a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(tensors)
    sizes = [t.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in ts], axis=axis), ts, backward)


def slice_axis(a: Tensor, start: int, stop: int, axis: int = 0) -> Tensor:
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        out = np.zeros_like(a.data)
        out[index] = g
        return (out,)

    return _make(a.data[index], (a,), backward)


def split(a: Tensor, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    if sum(sizes) != a.shape[axis]:
        raise ValueError(f"split sizes {sizes} do not cover axis of {a.shape}")
    out, start = [], 0
    for size in sizes:
        out.append(slice_axis(a, start, start + size, axis))
        start += size
    return out


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * factor, (a,), lambda g: (g * factor,))


def sum_tensor(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        return _make(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _make(a.data.sum(axis=axis), (a,), backward)


def mean_pool(a: Tensor, axis: int = 0) -> Tensor:
    if a.shape[axis] == 0:
        raise ValueError("mean_pool over an empty axis")
    n = a.shape[axis]

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g / n, axis), a.shape).copy(),)

    return _make(a.data.mean(axis=axis), (a,), backward)


def embedding_gather(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(
            f"gather index out of range for table with {table.shape[0]} rows"
        )

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(table.data[ids], (table,), backward)


# ---------------------------------------------------------------------------
# Normalization and losses


def _masked_logits(data: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return data
    mask = np.asarray(mask, dtype=np.float64)
    return data + mask


def softmax_masked(logits: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis; `mask` is additive 0/-inf, and every row
    must keep at least one entry."""
    z = _masked_logits(logits.data, mask)
    m = z.max(axis=-1, keepdims=True)
    if not np.isfinite(m).all():
        raise ValueError("softmax over a fully masked row")
    e = np.exp(z - m)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dz = (g - (g * p).sum(axis=-1, keepdims=True)) * p
        return (dz,)

    return _make(p, (logits,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then gain+bias."""
    d = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g):
        dxhat = g * gain.data
        dvar = (dxhat * xc * -0.5 * inv**3).sum(axis=-1, keepdims=True)
        dmu = (-dxhat * inv).sum(axis=-1, keepdims=True) + dvar * (-2.0 / d) * xc.sum(
            axis=-1, keepdims=True
        )
        dx = dxhat * inv + dvar * 2.0 * xc / d + dmu / d
        reduce_axes = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=reduce_axes)
        dbias = g.sum(axis=reduce_axes)
        return dx, dgain, dbias

    return _make(xhat * gain.data + bias.data, (x, gain, bias), backward)


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Summed negative log likelihood of softmax(logits + mask) at targets.

    Accepts a single row ``(C,)`` with an int target or a batch ``(n, C)``
    with an id vector.  A masked-out target is an error.
    """
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    z = _masked_logits(logits.data, mask)
    rows = z.reshape(-1, z.shape[-1])
    if len(t) != rows.shape[0]:
        raise ValueError(f"{rows.shape[0]} logit rows but {len(t)} targets")
    if t.min() < 0 or t.max() >= rows.shape[1]:
        raise IndexError("cross_entropy target out of range")
    picked = rows[np.arange(len(t)), t]
    if not np.isfinite(picked).all():
        raise ValueError("cross_entropy target is masked out")
    m = rows.max(axis=-1, keepdims=True)
    if not np.isfinite(m).all():
        raise ValueError("cross_entropy over a fully masked row")
    e = np.exp(rows - m)
    lse = m[:, 0] + np.log(e.sum(axis=-1))
    loss = (lse - picked).sum()

    def backward(g):
        p = e / e.sum(axis=-1, keepdims=True)
        p[np.arange(len(t)), t] -= 1.0
        return ((g * p).reshape(logits.shape),)

    return _make(np.float64(loss), (logits,), backward)


def multilabel_cross_entropy(logits: Tensor, targets: Sequence[int], mask=None) -> Tensor:
    """Mean NLL of softmax(logits + mask) over a set of gold ids (one row)."""
    if logits.ndim != 1:
        raise ValueError("multilabel_cross_entropy expects a single logit row")
    t = np.asarray(sorted(set(int(i) for i in targets)), dtype=np.int64)
    if t.size == 0:
        raise ValueError("empty target set")
    z = _masked_logits(logits.data, mask)
    if t.min() < 0 or t.max() >= z.shape[0]:
        raise IndexError("cross_entropy target out of range")
    if not np.isfinite(z[t]).all():
        raise ValueError("cross_entropy target is masked out")
    m = z.max()
    if not np.isfinite(m):
        raise ValueError("cross_entropy over a fully masked row")
    e = np.exp(z - m)
    lse = m + np.log(e.sum())
    loss = lse - z[t].mean()

    def backward(g):
        p = e / e.sum()
        p[t] -= 1.0 / len(t)
        return (g * p,)

    return _make(np.float64(loss), (logits,), backward)
