"""Dense float64 tensors with a reverse-mode gradient tape.

Values are numpy arrays; every differentiable op records itself on the
active tape (define-by-run, so plain Python control flow works in model
code). Tapes are rebuilt on every forward pass. With no tape active, ops
run forward-only, which is what inference uses.

Tie-breaking: ``max``/``maximum``/``minimum`` route the gradient to the
first maximal (resp. first / left) operand on exact ties.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "active_tape",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "gather",
    "exp",
    "log",
    "relu",
    "abs_",
    "sin",
    "cos",
    "sigmoid",
    "log_sigmoid",
    "softmax",
    "logsumexp",
    "max_along",
    "maximum",
    "minimum",
    "tsum",
    "tmean",
    "layer_norm",
    "linear",
]


class Tensor:
    """A dense float64 array plus an optional gradient buffer.

    Leaf tensors are created directly; interior tensors are produced by
    ops and carry a backward closure used by :meth:`Tape.backward`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_inputs", "_backward", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._inputs: tuple[Tensor, ...] = ()
        self._backward = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self._tape is None:
            raise ValueError("backward: tensor was not produced on a tape")
        self._tape.backward(self)

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


class Tape:
    """Ordered record of one forward pass.

    Ops append themselves in execution order, so the list is already
    topologically sorted; backward just walks it in reverse. Gradients of
    a given walk propagate through a per-walk buffer so that repeated
    backward calls accumulate additively instead of compounding.
    """

    def __init__(self):
        self._nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.pop()

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, root: Tensor) -> None:
        """Accumulate d(root)/d(x) into ``x.grad`` for every reachable x."""
        if root.size != 1:
            raise ValueError(f"backward: root must be scalar, got shape {root.shape}")
        if root._tape is not self:
            raise ValueError("backward: root was not produced on this tape")
        pending: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self._nodes):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            _accumulate(node, g)
            for inp, gi in zip(node._inputs, node._backward(g)):
                if gi is None:
                    continue
                if inp._backward is not None and inp._tape is self:
                    key = id(inp)
                    if key in pending:
                        pending[key] = pending[key] + gi
                    else:
                        pending[key] = gi
                elif inp.requires_grad:
                    _accumulate(inp, gi)


_TAPES: list[Tape] = []


def active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad = t.grad + g


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, inputs: tuple[Tensor, ...], backward) -> Tensor:
    tape = active_tape()
    if tape is not None and any(i.requires_grad for i in inputs):
        out = Tensor(data, requires_grad=True)
        out._inputs = inputs
        out._backward = backward
        out._tape = tape
        tape._nodes.append(out)
        return out
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- arithmetic ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a, b)

    def backward(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("sub", a, b)

    def backward(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _make(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("div", a, b)

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None,
        )

    return _make(a.data / b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (-g,)

    return _make(-a.data, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul: operands must be >=2-d, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return (ga, gb)

    return _make(np.matmul(a.data, b.data), (a, b), backward)


def transpose(a, axes: tuple[int, ...] | None = None) -> Tensor:
    """Permute axes; default swaps the last two."""
    a = _as_tensor(a)
    if axes is None:
        if a.ndim < 2:
            raise ValueError(f"transpose: need >=2-d tensor, got shape {a.shape}")
        axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inverse),)

    return _make(np.transpose(a.data, axes), (a,), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return _make(a.data.reshape(shape), (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        grads = []
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                grads.append(g[tuple(idx)])
            else:
                grads.append(None)
        return tuple(grads)

    return _make(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), backward)


def getitem(a, key) -> Tensor:
    """Basic indexing (ints / slices); use :func:`gather` for index arrays."""
    a = _as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[key] += g
        return (full,)

    return _make(np.array(a.data[key]), (a,), backward)


def gather(a, indices) -> Tensor:
    """Index axis 0 with an integer array of any shape (duplicates allowed)."""
    a = _as_tensor(a)
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu":
        raise ValueError(f"gather: indices must be integers, got dtype {idx.dtype}")

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(a.data[idx], (a,), backward)


# -- pointwise nonlinearities -------------------------------------------


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def backward(g):
        return (g * out_data,)

    return _make(out_data, (a,), backward)


def log(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (g / a.data,)

    return _make(np.log(a.data), (a,), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (g * (a.data > 0),)

    return _make(np.maximum(a.data, 0.0), (a,), backward)


def abs_(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (g * np.sign(a.data),)

    return _make(np.abs(a.data), (a,), backward)


def sin(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (g * np.cos(a.data),)

    return _make(np.sin(a.data), (a,), backward)


def cos(a) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (-g * np.sin(a.data),)

    return _make(np.cos(a.data), (a,), backward)


def _expit(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    y = _expit(a.data)

    def backward(g):
        return (g * y * (1.0 - y),)

    return _make(y, (a,), backward)


def log_sigmoid(a) -> Tensor:
    """log(sigmoid(x)), computed without overflow for large |x|."""
    a = _as_tensor(a)

    def backward(g):
        return (g * _expit(-a.data),)

    return _make(-np.logaddexp(0.0, -a.data), (a,), backward)


# -- reductions and normalizations ---------------------------------------


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return ((g - inner) * y,)

    return _make(y, (a,), backward)


def logsumexp(a, axis: int = -1, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = m + np.log(s)
    soft = e / s

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * soft,)

    return _make(out if keepdims else np.squeeze(out, axis=axis), (a,), backward)


def max_along(a, axis: int, keepdims: bool = False) -> Tensor:
    """Max over one axis; gradient routes to the first maximal index on ties."""
    a = _as_tensor(a)
    axis = axis % a.ndim
    argmax = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(argmax, axis), axis=axis)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(argmax, axis), g, axis=axis)
        return (full,)

    return _make(out if keepdims else np.squeeze(out, axis=axis), (a,), backward)


def maximum(a, b) -> Tensor:
    """Elementwise max; ties route the gradient to the first argument."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("maximum", a, b)
    take_a = a.data >= b.data

    def backward(g):
        return (
            _unbroadcast(g * take_a, a.shape) if a.requires_grad else None,
            _unbroadcast(g * ~take_a, b.shape) if b.requires_grad else None,
        )

    return _make(np.where(take_a, a.data, b.data), (a, b), backward)


def minimum(a, b) -> Tensor:
    """Elementwise min; ties route the gradient to the first argument."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("minimum", a, b)
    take_a = a.data <= b.data

    def backward(g):
        return (
            _unbroadcast(g * take_a, a.shape) if a.requires_grad else None,
            _unbroadcast(g * ~take_a, b.shape) if b.requires_grad else None,
        )

    return _make(np.where(take_a, a.data, b.data), (a, b), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    if axis is None:
        count = a.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.shape[ax] for ax in axis]))
    else:
        count = a.shape[axis]

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    dim = x.shape[-1]
    if gain.shape != (dim,) or bias.shape != (dim,):
        raise ValueError(
            f"layer_norm: gain/bias must have shape ({dim},), got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std

    def backward(g):
        gx = ggain = gbias = None
        lead = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            ggain = (g * xhat).sum(axis=lead)
        if bias.requires_grad:
            gbias = g.sum(axis=lead)
        if x.requires_grad:
            dxhat = g * gain.data
            gx = inv_std * (
                dxhat
                - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            )
        return (gx, ggain, gbias)

    return _make(xhat * gain.data + bias.data, (x, gain, bias), backward)


def linear(x, weight, bias) -> Tensor:
    """x @ weight + bias, differentiable in all three arguments."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(
            f"linear: input dim {x.shape[-1]} does not match weight shape {weight.shape}"
        )
    return add(matmul(x, weight), bias)
