"""Reverse-mode tensors over float32 numpy arrays.

The tape is implicit: every op closes over its parents and appends gradient
into parent.grad when backward() walks the graph in reverse topological
order. Graphs are rebuilt on every forward pass; nothing is retained or
reused between passes. All data is float32, row-major.
"""

import numpy as np


class NumericalError(RuntimeError):
    """A forward op produced NaN/Inf, or training diverged."""


_GRAD_ENABLED = True
_DEBUG_CHECKS = False


def set_debug_checks(on):
    """Validate finiteness after every op; used by gradient_check and tests."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(on)


class no_grad:
    """Context manager that suppresses graph construction."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, op="leaf", parents=()):
        a = np.asarray(data)
        if a.dtype != np.float32:
            a = a.astype(np.float32)
        self.data = a
        self.grad = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self.op = op
        self._parents = parents if self.requires_grad else ()
        self._backward = None
        if _DEBUG_CHECKS and not np.all(np.isfinite(a)):
            raise NumericalError(f"non-finite values produced by op '{op}'")

    @property
    def shape(self):
        return self.data.shape

    def accum(self, g):
        if self.grad is None:
            self.grad = g.astype(np.float32) if g.dtype != np.float32 else g
        else:
            self.grad = self.grad + g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={tuple(self.data.shape)}, op={self.op})"

    # operator sugar; implementations live below
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, np.float32))


def _out(data, parents, op, bwd):
    """Build a graph node; bwd is installed only when a parent needs grad."""
    need = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    t = Tensor(data, requires_grad=need, op=op, parents=parents)
    if need:
        t._backward = bwd(t)
    return t


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise and arithmetic


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def bwd(t):
        def run():
            if a.requires_grad:
                a.accum(_unbroadcast(t.grad, a.data.shape))
            if b.requires_grad:
                b.accum(_unbroadcast(t.grad, b.data.shape))
        return run

    return _out(data, (a, b), "add", bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def bwd(t):
        def run():
            if a.requires_grad:
                a.accum(_unbroadcast(t.grad, a.data.shape))
            if b.requires_grad:
                b.accum(_unbroadcast(-t.grad, b.data.shape))
        return run

    return _out(data, (a, b), "sub", bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def bwd(t):
        def run():
            if a.requires_grad:
                a.accum(_unbroadcast(t.grad * b.data, a.data.shape))
            if b.requires_grad:
                b.accum(_unbroadcast(t.grad * a.data, b.data.shape))
        return run

    return _out(data, (a, b), "mul", bwd)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = a.data / b.data

    def bwd(t):
        def run():
            if a.requires_grad:
                a.accum(_unbroadcast(t.grad / b.data, a.data.shape))
            if b.requires_grad:
                b.accum(_unbroadcast(-t.grad * data / b.data, b.data.shape))
        return run

    return _out(data, (a, b), "div", bwd)


def exp(a):
    data = np.exp(a.data)

    def bwd(t):
        def run():
            a.accum(t.grad * data)
        return run

    return _out(data, (a,), "exp", bwd)


def log(a):
    # out-of-domain inputs produce NaN here on purpose; the finiteness
    # check turns that into a NumericalError naming this op
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)

    def bwd(t):
        def run():
            a.accum(t.grad / a.data)
        return run

    return _out(data, (a,), "log", bwd)


def sqrt(a):
    with np.errstate(invalid="ignore"):
        data = np.sqrt(a.data)

    def bwd(t):
        def run():
            a.accum(t.grad * (0.5 / np.maximum(data, 1e-12)))
        return run

    return _out(data, (a,), "sqrt", bwd)


def square(a):
    data = a.data * a.data

    def bwd(t):
        def run():
            a.accum(t.grad * (2.0 * a.data))
        return run

    return _out(data, (a,), "square", bwd)


def relu(a):
    data = np.maximum(a.data, 0.0)

    def bwd(t):
        def run():
            a.accum(t.grad * (a.data > 0))
        return run

    return _out(data, (a,), "relu", bwd)


def sigmoid(a):
    # stable form via exp(-|x|), which never overflows; clamped so the output
    # stays strictly inside (0, 1) even where float32 would saturate
    x = a.data
    e = np.exp(-np.abs(x))
    data = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    data = np.clip(data.astype(np.float32), np.finfo(np.float32).tiny,
                   np.float32(1.0) - np.float32(2.0 ** -24))

    def bwd(t):
        def run():
            a.accum(t.grad * data * (1.0 - data))
        return run

    return _out(data, (a,), "sigmoid", bwd)


def maximum(a, b):
    """Elementwise max; ties route the gradient to the first argument."""
    a, b = _as_tensor(a), _as_tensor(b)
    take_a = a.data >= b.data
    data = np.where(take_a, a.data, b.data)

    def bwd(t):
        def run():
            if a.requires_grad:
                a.accum(_unbroadcast(t.grad * take_a, a.data.shape))
            if b.requires_grad:
                b.accum(_unbroadcast(t.grad * ~take_a, b.data.shape))
        return run

    return _out(data, (a, b), "maximum", bwd)


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_(a, axis=None, keepdims=False):
    # accumulate in float64 and round once: keeps large reductions from
    # drifting at float32 partial-sum granularity
    data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64)
    data = np.asarray(data, dtype=np.float32)

    def bwd(t):
        def run():
            g = t.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a.accum(np.broadcast_to(g, a.data.shape).astype(np.float32))
        return run

    return _out(data, (a,), "sum", bwd)


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis, keepdims), 1.0 / n)


def reshape(a, shape):
    data = a.data.reshape(shape)

    def bwd(t):
        def run():
            a.accum(t.grad.reshape(a.data.shape))
        return run

    return _out(data, (a,), "reshape", bwd)


def transpose(a, axes):
    data = np.ascontiguousarray(a.data.transpose(axes))
    inv = np.argsort(axes)

    def bwd(t):
        def run():
            a.accum(np.ascontiguousarray(t.grad.transpose(inv)))
        return run

    return _out(data, (a,), "transpose", bwd)


def concat(parts, axis=0):
    parts = [_as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offs = np.cumsum([0] + sizes)

    def bwd(t):
        def run():
            for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
                if p.requires_grad:
                    sl = [slice(None)] * t.grad.ndim
                    sl[axis] = slice(lo, hi)
                    p.accum(t.grad[tuple(sl)])
        return run

    return _out(data, tuple(parts), "concat", bwd)


def gather_rows(a, idx):
    """Rows of a 2D tensor by integer index; backward scatter-adds."""
    idx = np.asarray(idx, np.int64)
    data = a.data[idx]

    def bwd(t):
        def run():
            g = np.zeros_like(a.data)
            np.add.at(g, idx, t.grad)
            a.accum(g)
        return run

    return _out(data, (a,), "gather_rows", bwd)


# ---------------------------------------------------------------------------
# linear algebra and normalization


def matmul(a, b):
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(
            f"matmul inner dims mismatch: {a.data.shape} x {b.data.shape}"
        )
    data = a.data @ b.data

    def bwd(t):
        def run():
            if a.requires_grad:
                a.accum(t.grad @ b.data.T)
            if b.requires_grad:
                b.accum(a.data.T @ t.grad)
        return run

    return _out(data, (a, b), "matmul", bwd)


def softmax(a, axis=-1):
    x = a.data
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(t):
        def run():
            dot = (t.grad * data).sum(axis=axis, keepdims=True)
            a.accum((t.grad - dot) * data)
        return run

    return _out(data, (a,), "softmax", bwd)


def layer_norm(a, axis=-1, eps=1e-5):
    """Standardize along `axis`; no learnable terms (callers add their own)."""
    x = a.data
    mu = x.mean(axis=axis, keepdims=True, dtype=np.float32)
    xc = x - mu
    var = np.mean(xc * xc, axis=axis, keepdims=True, dtype=np.float32)
    inv = 1.0 / np.sqrt(var + np.float32(eps))
    data = xc * inv

    def bwd(t):
        def run():
            g = t.grad
            gm = g.mean(axis=axis, keepdims=True, dtype=np.float32)
            gym = (g * data).mean(axis=axis, keepdims=True, dtype=np.float32)
            a.accum((g - gm - data * gym) * inv)
        return run

    return _out(data, (a,), "layer_norm", bwd)
