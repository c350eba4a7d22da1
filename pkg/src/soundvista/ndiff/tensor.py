"""Tensor graph and core differentiable ops."""

from __future__ import annotations

import contextlib

import numpy as np

_GRAD_ENABLED = True
_NAN_CHECK = False


def set_nan_check(enabled: bool) -> None:
    """Verify every op output is finite (debug mode, slows things down)."""
    global _NAN_CHECK
    _NAN_CHECK = bool(enabled)


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A numpy array plus an optional gradient and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "_op")

    def __init__(self, data, requires_grad: bool = False, _prev=(), _op: str = ""):
        self.data = np.asarray(data)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = _prev
        self._op = _op
        if _NAN_CHECK and not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values out of op '{_op}'")

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self) -> None:
        """Reverse accumulation from a scalar loss into every reachable leaf."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return tslice(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={'set' if self.grad is not None else 'none'}, op={self._op!r})"


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ("name", "trainable")

    def __init__(self, data, name: str, trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _make(data, prev, op, backward):
    req = _GRAD_ENABLED and any(p.requires_grad for p in prev)
    out = Tensor(data, requires_grad=req, _prev=tuple(prev) if req else (), _op=op)
    if req:
        out._backward = backward
    return out


# elementwise ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _make(data, (a, b), "add", backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), "mul", backward)


def _unary(a, fn, dfn, name) -> Tensor:
    a = _as_tensor(a)
    data = fn(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * dfn(a.data, data))

    return _make(data, (a,), name, backward)


def log(a) -> Tensor:
    return _unary(a, np.log, lambda x, y: 1.0 / x, "log")


def exp(a) -> Tensor:
    return _unary(a, np.exp, lambda x, y: y, "exp")


def sin(a) -> Tensor:
    return _unary(a, np.sin, lambda x, y: np.cos(x), "sin")


def cos(a) -> Tensor:
    return _unary(a, np.cos, lambda x, y: -np.sin(x), "cos")


def tabs(a) -> Tensor:
    return _unary(a, np.abs, lambda x, y: np.sign(x), "abs")


def sqrt(a) -> Tensor:
    # grad guarded at 0 so downstream magnitudes of empty bins stay finite
    return _unary(a, np.sqrt, lambda x, y: 0.5 / np.maximum(y, 1e-12), "sqrt")


def softplus(a) -> Tensor:
    def fwd(x):
        return np.logaddexp(0.0, x)

    def dfn(x, y):
        return 1.0 / (1.0 + np.exp(-x))

    return _unary(a, fwd, dfn, "softplus")


def relu(a) -> Tensor:
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(x.dtype), "relu")


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    def fwd(x):
        return np.where(x >= 0, x, slope * x)

    def dfn(x, y):
        return np.where(x >= 0, 1.0, slope).astype(x.dtype)

    return _unary(a, fwd, dfn, "leaky_relu")


def dropout(a, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity in eval mode."""
    a = _as_tensor(a)
    if not training or p <= 0.0:
        return a
    mask = (rng.random(a.shape) >= p).astype(a.dtype) / (1.0 - p)
    return mul(a, Tensor(mask))


# reductions ----------------------------------------------------------------

def _norm_axes(axes, ndim):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(ax % ndim for ax in axes)


def tsum(a, axes=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    axes_n = _norm_axes(axes, a.ndim)
    data = a.data.sum(axis=axes_n, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if not keepdims:
            g = np.expand_dims(g, axes_n)
        a.accumulate_grad(np.broadcast_to(g, a.shape).copy())

    return _make(data, (a,), "sum", backward)


def mean(a, axes=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    axes_n = _norm_axes(axes, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes_n])) if a.ndim else 1
    data = a.data.mean(axis=axes_n, keepdims=keepdims)

    def backward(g):
        if not a.requires_grad:
            return
        if not keepdims:
            g = np.expand_dims(g, axes_n)
        a.accumulate_grad(np.broadcast_to(g, a.shape) / count)

    return _make(data, (a,), "mean", backward)


def mse(a, b) -> Tensor:
    d = _as_tensor(a) - _as_tensor(b)
    return mean(mul(d, d))


def l1(a, b) -> Tensor:
    return mean(tabs(_as_tensor(a) - _as_tensor(b)))


# shape ops -----------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return _make(data, (a,), "reshape", backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    data = a.data.transpose(axes)
    inv = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.transpose(inv))

    return _make(data, (a,), "transpose", backward)


def tslice(a, key) -> Tensor:
    a = _as_tensor(a)
    data = a.data[key]

    def backward(g):
        if a.requires_grad:
            gx = np.zeros_like(a.data)
            np.add.at(gx, key, g)
            a.accumulate_grad(gx)

    return _make(data, (a,), "slice", backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(int(lo), int(hi))
                t.accumulate_grad(g[tuple(idx)])

    return _make(data, tensors, "concat", backward)


# linear algebra ------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim == 1 or b.data.ndim == 1:
        raise ValueError("matmul expects >=2-D operands; add explicit axes")
    data = np.matmul(a.data, b.data)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return _make(data, (a, b), "matmul", backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            a.accumulate_grad((g - dot) * y)

    return _make(y, (a,), "softmax", backward)


def layer_norm(a, axes=(-1,), eps: float = 1e-5) -> Tensor:
    """Normalize to zero mean / unit variance over `axes` (affine left to caller)."""
    a = _as_tensor(a)
    axes_n = _norm_axes(axes, a.ndim)
    mu = a.data.mean(axis=axes_n, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=axes_n, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv
    count = int(np.prod([a.shape[ax] for ax in axes_n]))

    def backward(g):
        if not a.requires_grad:
            return
        gm = g.mean(axis=axes_n, keepdims=True)
        gym = (g * y).mean(axis=axes_n, keepdims=True)
        a.accumulate_grad(inv * (g - gm - y * gym))
        _ = count

    return _make(y, (a,), "layer_norm", backward)


# convolutions ---------------------------------------------------------------

def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, c, h, w = xp.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    cols = np.empty((n, c, k, k, oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride]
    return cols.reshape(n, c * k * k, oh * ow), oh, ow


def _col2im(cols: np.ndarray, x_shape, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x_shape
    hp, wp = h + 2 * pad, w + 2 * pad
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    cols = cols.reshape(n, c, k, k, oh, ow)
    xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += cols[:, :, i, j]
    return xp[:, :, pad : pad + h, pad : pad + w]


def conv2d(x, w, b=None, stride: int = 1, pad: int = 1) -> Tensor:
    """NCHW convolution, square kernel, symmetric zero padding."""
    x, w = _as_tensor(x), _as_tensor(w)
    cout, cin, k, k2 = w.shape
    if k != k2:
        raise ValueError(f"conv2d kernel must be square, got {w.shape}")
    if x.ndim != 4 or x.shape[1] != cin:
        raise ValueError(f"conv2d shape mismatch: input {x.shape} vs weight {w.shape}")
    cols, oh, ow = _im2col(x.data, k, stride, pad)
    w2 = w.data.reshape(cout, cin * k * k)
    out = np.matmul(w2, cols)
    if b is not None:
        b = _as_tensor(b)
        out = out + b.data.reshape(1, cout, 1)
    out = out.reshape(x.shape[0], cout, oh, ow)
    prev = (x, w) if b is None else (x, w, b)

    def backward(g):
        gf = g.reshape(g.shape[0], cout, oh * ow)
        if b is not None and b.requires_grad:
            b.accumulate_grad(gf.sum(axis=(0, 2)))
        if w.requires_grad:
            gw = np.matmul(gf, cols.transpose(0, 2, 1)).sum(axis=0)
            w.accumulate_grad(gw.reshape(w.shape))
        if x.requires_grad:
            gcols = np.matmul(w2.T, gf)
            x.accumulate_grad(_col2im(gcols, x.shape, k, stride, pad))

    return _make(out, prev, "conv2d", backward)


def conv2d_transpose(x, w, b=None, stride: int = 2, pad: int = 1, output_padding: int = 1) -> Tensor:
    """Transposed NCHW convolution; weight layout (Cin, Cout, k, k)."""
    x, w = _as_tensor(x), _as_tensor(w)
    cin, cout, k, k2 = w.shape
    if k != k2:
        raise ValueError(f"conv2d_transpose kernel must be square, got {w.shape}")
    if x.ndim != 4 or x.shape[1] != cin:
        raise ValueError(f"conv2d_transpose shape mismatch: input {x.shape} vs weight {w.shape}")
    n, _, h, win = x.shape
    oh = stride * (h - 1) + k - 2 * pad + output_padding
    ow = stride * (win - 1) + k - 2 * pad + output_padding
    w2 = w.data.reshape(cin, cout * k * k)
    xf = x.data.reshape(n, cin, h * win)
    cols = np.matmul(w2.T, xf)  # (n, cout*k*k, h*w)
    out = _col2im(cols, (n, cout, oh, ow), k, stride, pad)
    if b is not None:
        b = _as_tensor(b)
        out = out + b.data.reshape(1, cout, 1, 1)
    prev = (x, w) if b is None else (x, w, b)

    def backward(g):
        gcols, goh, gow = _im2col(g, k, stride, pad)
        if goh * gow != h * win:
            raise AssertionError("transpose conv geometry mismatch")
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3)))
        if w.requires_grad:
            gw = np.matmul(gcols, xf.transpose(0, 2, 1)).sum(axis=0)  # (cout*k*k, cin)
            w.accumulate_grad(gw.T.reshape(w.shape))
        if x.requires_grad:
            gx = np.matmul(w2, gcols)
            x.accumulate_grad(gx.reshape(x.shape))

    return _make(out, prev, "conv2d_transpose", backward)
