"""Minimal dense-tensor reverse-mode autodiff over numpy, plus Adam.

Ops record onto the active Tape (a with-block); backward() replays it in
reverse. float64 throughout by default so gradient checks are meaningful;
float32 is available via the dtype argument on parameter creation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

_TAPE_STACK = []
_GRAD_ENABLED = [True]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_grad_owned")

    def __init__(self, data, requires_grad=False, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._grad_owned = False

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None
        self._grad_owned = False

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # convenience arithmetic
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered op record; backward visits entries exactly once in reverse."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self

    def record(self, out, parents, backward_fn):
        self.nodes.append((out, parents, backward_fn))


class no_grad:
    def __enter__(self):
        _GRAD_ENABLED.append(False)
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED.pop()


def _active_tape(parents):
    if not _GRAD_ENABLED[-1] or not _TAPE_STACK:
        return None
    if not any(p.requires_grad for p in parents):
        return None
    return _TAPE_STACK[-1]


def _make(data, parents, backward_fn):
    out = Tensor(data, dtype=data.dtype if hasattr(data, "dtype") else np.float64)
    tape = _active_tape(parents)
    if tape is not None:
        out.requires_grad = True
        tape.record(out, parents, backward_fn)
    return out


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def _accum(t, g):
    """Accumulate into t.grad without copying up front.

    A backward fn may hand the same array (often the out-grad itself, or a
    view of it) to several parents, so the stored grad is only mutated in
    place once this tensor owns a private accumulation buffer.
    """
    g = _unbroadcast(np.asarray(g), t.data.shape)
    if t.grad is None:
        t.grad = g
        t._grad_owned = False
    elif t._grad_owned:
        t.grad += g
    else:
        t.grad = t.grad + g
        t._grad_owned = True


def backward(loss, tape=None):
    """Populate .grad for every requires_grad tensor upstream of `loss`."""
    if loss.data.shape != ():
        raise ValueError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    if tape is None:
        if not _TAPE_STACK:
            raise RuntimeError("no active tape")
        tape = _TAPE_STACK[-1]
    loss.grad = np.ones((), dtype=loss.data.dtype)
    loss._grad_owned = True
    for out, parents, backward_fn in reversed(tape.nodes):
        if out.grad is None:
            continue
        grads = backward_fn(out.grad)
        for p, g in zip(parents, grads):
            if p.requires_grad and g is not None:
                _accum(p, g)


# -- primitives ---------------------------------------------------------

def _shapes(*ts):
    return " vs ".join(str(t.data.shape) for t in ts)


def add(a, b):
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def scale(a, c):
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def mul(a, b):
    def bwd(g):
        return (g * b.data if a.requires_grad else None,
                g * a.data if b.requires_grad else None)

    return _make(a.data * b.data, (a, b), bwd)


def matmul(a, b):
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch: {_shapes(a, b)}")
    out = np.matmul(a.data, b.data)

    def bwd(g):
        ga = gb = None
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if b.data.ndim > 1 \
                else np.multiply.outer(g, b.data)
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if a.data.ndim > 1 \
                else np.multiply.outer(a.data, g)
        return ga, gb

    return _make(out, (a, b), bwd)


def transpose(a, axes=None):
    if axes is None:
        axes = tuple(range(a.data.ndim - 2)) + (a.data.ndim - 1, a.data.ndim - 2)
    inv = np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),))


def reshape(a, shape):
    old = a.data.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=0):
    sizes = [t.data.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), bwd)


def stack(tensors, axis=0):
    out = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(out, tuple(tensors), bwd)


def slice_(a, key):
    shape = a.data.shape

    def bwd(g):
        full = np.zeros(shape, dtype=a.data.dtype)
        np.add.at(full, key, g)
        return (full,)

    return _make(a.data[key], (a,), bwd)


def gather(table, indices):
    """Row gather: output shape = indices.shape + table.shape[1:]."""
    indices = np.asarray(indices)
    shape = table.data.shape

    def bwd(g):
        full = np.zeros(shape, dtype=table.data.dtype)
        np.add.at(full, indices, g)
        return (full,)

    return _make(table.data[indices], (table,), bwd)


def reduce_sum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), bwd)


def reduce_mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.data.shape[axis]
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reduce_min(a, axis=0):
    idx = np.argmin(a.data, axis=axis)
    out = np.min(a.data, axis=axis)
    onehot = np.zeros(a.data.shape, dtype=a.data.dtype)
    np.put_along_axis(onehot, np.expand_dims(idx, axis), 1.0, axis=axis)

    def bwd(g):
        return (onehot * np.expand_dims(g, axis),)

    return _make(out, (a,), bwd)


def minimum(a, b):
    mask = (a.data <= b.data).astype(a.data.dtype)
    return _make(np.minimum(a.data, b.data), (a, b),
                 lambda g: (g * mask, g * (1.0 - mask)))


def dot(a, b):
    if a.data.shape != b.data.shape or a.data.ndim != 1:
        raise ValueError(f"dot expects equal-length vectors, got {_shapes(a, b)}")
    return _make(np.dot(a.data, b.data), (a, b),
                 lambda g: (g * b.data, g * a.data))


def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (a,), bwd)


def layer_norm(a, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance (no affine)."""
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    out = xc * inv
    n = a.data.shape[-1]

    def bwd(g):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * out).mean(axis=-1, keepdims=True)
        return (inv * (g - gm - out * gx),)

    return _make(out, (a,), bwd)


def relu(a):
    mask = (a.data > 0).astype(a.data.dtype)
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def log_sigmoid(a):
    # stable: -softplus(-x)
    x = a.data
    out = np.where(x >= 0, -np.log1p(np.exp(-x)), x - np.log1p(np.exp(x)))
    sig = 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))
    return _make(out, (a,), lambda g: (g * (1.0 - sig),))


def softplus(a):
    x = a.data
    out = np.where(x > 0, x + np.log1p(np.exp(-x)), np.log1p(np.exp(x)))
    sig = 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))
    return _make(out, (a,), lambda g: (g * sig,))


def abs_(a):
    s = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * s,))


def l1_distance(a, b):
    """Sum of absolute differences over the last axis."""
    return reduce_sum(abs_(sub(a, b)), axis=-1)


# -- optimizer ----------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state):
    """One Adam update with bias correction over a {name: Tensor} dict.

    Parameters with no accumulated gradient this step are skipped.
    """
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        mhat = m / (1 - state.beta1 ** t)
        vhat = v / (1 - state.beta2 ** t)
        p.data = p.data - state.lr * mhat / (np.sqrt(vhat) + state.eps)


def zero_grads(params):
    for p in params.values():
        p.grad = None
        p._grad_owned = False


# -- checkpoint container ------------------------------------------------

_MAGIC = b"NTC1"
_VERSION = 1


def save_checkpoint(params, path):
    """Named-tensor container: magic, version byte, then
    `name\\0shape\\0f64[]` records (little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_VERSION]))
        for name, p in params.items():
            fh.write(name.encode("utf-8") + b"\0")
            fh.write(",".join(str(d) for d in p.data.shape).encode("ascii") + b"\0")
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if blob[4] != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {blob[4]}")
    pos = 5
    params = {}
    while pos < len(blob):
        end = blob.index(b"\0", pos)
        name = blob[pos:end].decode("utf-8")
        pos = end + 1
        end = blob.index(b"\0", pos)
        shape_s = blob[pos:end].decode("ascii")
        shape = tuple(int(x) for x in shape_s.split(",")) if shape_s else ()
        pos = end + 1
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += count * 8
        params[name] = Tensor(data.copy(), requires_grad=True)
    return params
