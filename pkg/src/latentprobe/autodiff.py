"""Tape-based reverse-mode automatic differentiation over float64 arrays.

Every differentiable quantity is a `Var` wrapping a numpy array. Operations
record a backward closure; `backward` walks the graph from a scalar root in
reverse topological order and accumulates gradients into `Var.grad`. Plain
ndarrays or Python scalars passed to any op are treated as constants, which
is how parameters are frozen (e.g. the discriminator during a VAE step):
simply pass their raw arrays instead of `Var`s.

The op vocabulary is fixed and small: matmul, transpose, add/sub/mul/neg,
relu, leaky_relu, sigmoid, softplus, exp, log, square, abs, axis-aware
sum/mean, column concat and column slice. Every loss in this package is a
composition of these.
"""

import numpy as np


class Var:
    """A node in the computation graph: value plus gradient slot."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Var(shape={self.data.shape})"


def data_of(x):
    """Raw ndarray of a Var or constant."""
    return x.data if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _accum(node, g):
    if isinstance(node, Var):
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
        node.grad += g


def _unbroadcast(g, shape):
    # Reduce a gradient back to the shape numpy broadcast it from.
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(root):
    """Populate .grad on every Var reachable from the scalar `root`."""
    if root.data.size != 1:
        raise ValueError("backward requires a scalar root")
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if isinstance(p, Var) and id(p) not in seen:
                stack.append((p, False))
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# arithmetic

def add(a, b):
    da, db = data_of(a), data_of(b)
    out = Var(da + db, (a, b))

    def back(g):
        _accum(a, _unbroadcast(g, da.shape))
        _accum(b, _unbroadcast(g, db.shape))
    out._backward = back
    return out


def sub(a, b):
    da, db = data_of(a), data_of(b)
    out = Var(da - db, (a, b))

    def back(g):
        _accum(a, _unbroadcast(g, da.shape))
        _accum(b, _unbroadcast(-g, db.shape))
    out._backward = back
    return out


def mul(a, b):
    da, db = data_of(a), data_of(b)
    out = Var(da * db, (a, b))

    def back(g):
        _accum(a, _unbroadcast(g * db, da.shape))
        _accum(b, _unbroadcast(g * da, db.shape))
    out._backward = back
    return out


def neg(a):
    out = Var(-data_of(a), (a,))

    def back(g):
        _accum(a, -g)
    out._backward = back
    return out


def matmul(a, b):
    da, db = data_of(a), data_of(b)
    out = Var(da @ db, (a, b))

    def back(g):
        _accum(a, g @ db.T)
        _accum(b, da.T @ g)
    out._backward = back
    return out


def transpose(a):
    out = Var(data_of(a).T, (a,))

    def back(g):
        _accum(a, g.T)
    out._backward = back
    return out


# ---------------------------------------------------------------------------
# elementwise

def relu(a):
    da = data_of(a)
    out = Var(np.maximum(da, 0.0), (a,))

    def back(g):
        _accum(a, g * (da > 0.0))
    out._backward = back
    return out


def leaky_relu(a, slope=0.2):
    da = data_of(a)
    out = Var(np.where(da > 0.0, da, slope * da), (a,))

    def back(g):
        _accum(a, g * np.where(da > 0.0, 1.0, slope))
    out._backward = back
    return out


def sigmoid(a):
    da = data_of(a)
    s = np.empty_like(da)
    pos = da >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-da[pos]))
    e = np.exp(da[~pos])
    s[~pos] = e / (1.0 + e)
    out = Var(s, (a,))

    def back(g):
        _accum(a, g * s * (1.0 - s))
    out._backward = back
    return out


def softplus(a):
    # log(1 + e^x), computed stably as max(x, 0) + log1p(e^{-|x|}).
    da = data_of(a)
    out = Var(np.maximum(da, 0.0) + np.log1p(np.exp(-np.abs(da))), (a,))

    def back(g):
        _accum(a, g * _sigmoid_data(da))
    out._backward = back
    return out


def _sigmoid_data(x):
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    s[~pos] = e / (1.0 + e)
    return s


def vexp(a):
    da = data_of(a)
    e = np.exp(da)
    out = Var(e, (a,))

    def back(g):
        _accum(a, g * e)
    out._backward = back
    return out


def vlog(a):
    da = data_of(a)
    out = Var(np.log(da), (a,))

    def back(g):
        _accum(a, g / da)
    out._backward = back
    return out


def square(a):
    da = data_of(a)
    out = Var(da * da, (a,))

    def back(g):
        _accum(a, g * 2.0 * da)
    out._backward = back
    return out


def absval(a):
    da = data_of(a)
    out = Var(np.abs(da), (a,))

    def back(g):
        _accum(a, g * np.sign(da))
    out._backward = back
    return out


# ---------------------------------------------------------------------------
# reductions and shape ops

def vsum(a, axis=None):
    da = data_of(a)
    out = Var(da.sum(axis=axis), (a,))

    def back(g):
        _accum(a, _spread(g, da.shape, axis))
    out._backward = back
    return out


def vmean(a, axis=None):
    da = data_of(a)
    out = Var(da.mean(axis=axis), (a,))
    count = da.size if axis is None else da.shape[axis]

    def back(g):
        _accum(a, _spread(g, da.shape, axis) / count)
    out._backward = back
    return out


def _spread(g, shape, axis):
    if axis is None:
        return np.broadcast_to(g, shape).copy() if np.ndim(g) == 0 else np.full(shape, g)
    g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()


def concat_cols(a, b):
    da, db = data_of(a), data_of(b)
    out = Var(np.concatenate([da, db], axis=1), (a, b))
    split = da.shape[1]

    def back(g):
        _accum(a, g[:, :split])
        _accum(b, g[:, split:])
    out._backward = back
    return out


def cols(a, start, stop):
    da = data_of(a)
    out = Var(da[:, start:stop], (a,))

    def back(g):
        full = np.zeros_like(da)
        full[:, start:stop] = g
        _accum(a, full)
    out._backward = back
    return out
