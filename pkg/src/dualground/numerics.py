"""Dense tensors with eager forward evaluation and reverse-mode gradients.

Every forward op computes its result immediately with numpy and, when any
input requires a gradient, records a closure that maps the output gradient
back onto its inputs. ``Tensor.backward`` replays those closures in reverse
topological order.
"""

from __future__ import annotations

import contextlib
import dataclasses
import math
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "NonFiniteError",
    "MlpParams",
    "no_grad",
    "grad_enabled",
    "default_dtype",
    "get_default_dtype",
    "set_default_dtype",
    "tensor",
    "param",
    "matmul",
    "softmax_rows",
    "log_softmax_rows",
    "sigmoid",
    "relu",
    "softplus",
    "maximum",
    "minimum",
    "concat",
    "stack",
    "layer_norm",
    "linear",
    "mh_scores",
    "mh_combine",
    "init_mlp",
    "mlp_apply",
    "grad_check",
    "named_parameters",
    "parameters_of",
]


class NonFiniteError(FloatingPointError):
    """Raised when a forward op produces NaN or Inf."""


_state = threading.local()


def _dtype():
    return getattr(_state, "dtype", np.float64)


def get_default_dtype():
    return _dtype()


def set_default_dtype(dtype) -> None:
    dt = np.dtype(dtype)
    if dt not in (np.float32, np.float64):
        raise ValueError(f"unsupported precision {dt}")
    _state.dtype = dt.type


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily switch the precision used when constructing tensors."""
    old = _dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = old


def grad_enabled() -> bool:
    return getattr(_state, "grad", True)


@contextlib.contextmanager
def no_grad():
    old = grad_enabled()
    _state.grad = False
    try:
        yield
    finally:
        _state.grad = old


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # sum out the axes numpy broadcasting added or stretched
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A dense row-major array that can take part in reverse-mode differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype or _dtype())
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _make(cls, data: np.ndarray, parents: tuple, backward, op: str) -> "Tensor":
        # a finite sum implies every entry is finite; only rescan when it is not
        if not np.isfinite(data.sum()) and not np.isfinite(data).all():
            shapes = ", ".join(str(p.shape) for p in parents)
            raise NonFiniteError(f"non-finite output from {op} (inputs {shapes})")
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def tolist(self):
        return self.data.tolist()

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    # -- backward -------------------------------------------------------------

    def backward(self, grad=None) -> None:
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise RuntimeError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in node._backward(g):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- elementwise arithmetic ----------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = _as_tensor(other, self)
        a, b = self, other

        def bw(g):
            return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape)))

        return Tensor._make(a.data + b.data, (a, b), bw, "add")

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = _as_tensor(other, self)
        a, b = self, other

        def bw(g):
            return ((a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape)))

        return Tensor._make(a.data - b.data, (a, b), bw, "sub")

    def __rsub__(self, other) -> "Tensor":
        return _as_tensor(other, self) - self

    def __mul__(self, other) -> "Tensor":
        other = _as_tensor(other, self)
        a, b = self, other

        def bw(g):
            return (
                (a, _unbroadcast(g * b.data, a.shape) if a.requires_grad else None),
                (b, _unbroadcast(g * a.data, b.shape) if b.requires_grad else None),
            )

        return Tensor._make(a.data * b.data, (a, b), bw, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = _as_tensor(other, self)
        a, b = self, other

        def bw(g):
            return (
                (a, _unbroadcast(g / b.data, a.shape) if a.requires_grad else None),
                (b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None),
            )

        return Tensor._make(a.data / b.data, (a, b), bw, "div")

    def __rtruediv__(self, other) -> "Tensor":
        return _as_tensor(other, self) / self

    def __neg__(self) -> "Tensor":
        a = self
        return Tensor._make(-a.data, (a,), lambda g: ((a, -g),), "neg")

    def __pow__(self, p: float) -> "Tensor":
        a = self
        return Tensor._make(a.data**p, (a,), lambda g: ((a, g * p * a.data ** (p - 1)),), "pow")

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)

    def exp(self) -> "Tensor":
        a = self
        out = np.exp(a.data)
        return Tensor._make(out, (a,), lambda g: ((a, g * out),), "exp")

    def log(self) -> "Tensor":
        a = self
        return Tensor._make(np.log(a.data), (a,), lambda g: ((a, g / a.data),), "log")

    def sqrt(self) -> "Tensor":
        a = self
        out = np.sqrt(a.data)
        return Tensor._make(out, (a,), lambda g: ((a, g * 0.5 / out),), "sqrt")

    def abs(self) -> "Tensor":
        a = self
        return Tensor._make(np.abs(a.data), (a,), lambda g: ((a, g * np.sign(a.data)),), "abs")

    def relu(self) -> "Tensor":
        return relu(self)

    def sigmoid(self) -> "Tensor":
        return sigmoid(self)

    # -- reductions and shape ops --------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return ((a, np.broadcast_to(g, a.shape)),)

        return Tensor._make(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), bw, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod([self.shape[i] for i in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def max(self, axis: int = -1) -> "Tensor":
        """Maximum along one axis; the gradient goes to the first maximal entry."""
        a = self
        idx = np.argmax(a.data, axis=axis)
        out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

        def bw(g):
            full = np.zeros_like(a.data)
            np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
            return ((a, full),)

        return Tensor._make(out, (a,), bw, "max")

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._make(a.data.reshape(shape), (a,), lambda g: ((a, g.reshape(a.shape)),), "reshape")

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        a = self
        inv = np.argsort(axes)
        out = np.ascontiguousarray(a.data.transpose(axes))
        return Tensor._make(out, (a,), lambda g: ((a, g.transpose(inv)),), "transpose")

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, idx) -> "Tensor":
        a = self

        def bw(g):
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            return ((a, full),)

        out = a.data[idx]
        out = np.array(out, copy=True) if out.ndim == 0 else np.ascontiguousarray(out)
        return Tensor._make(out, (a,), bw, "index")


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def param(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes (leading axes broadcast).

    A rank-2 ``b`` may be applied to an ``a`` of any rank >= 2, which is how
    last-axis linear maps are expressed.
    """
    a = _as_tensor(a)
    b = _as_tensor(b, a)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ((a, ga), (b, gb))

    return Tensor._make(np.matmul(a.data, b.data), (a, b), bw, "matmul")


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by subtracting the row maximum."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return ((x, out * (g - (g * out).sum(axis=-1, keepdims=True))),)

    return Tensor._make(out, (x,), bw, "softmax")


def log_softmax_rows(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse

    def bw(g):
        return ((x, g - np.exp(out) * g.sum(axis=-1, keepdims=True)),)

    return Tensor._make(out, (x,), bw, "log_softmax")


def _sigmoid_np(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid_np(x.data)
    return Tensor._make(out, (x,), lambda g: ((x, g * out * (1.0 - out)),), "sigmoid")


def relu(x: Tensor) -> Tensor:
    # subgradient at exactly 0 is 0
    mask = x.data > 0
    return Tensor._make(x.data * mask, (x,), lambda g: ((x, g * mask),), "relu")


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0.0, x.data)
    return Tensor._make(out, (x,), lambda g: ((x, g * _sigmoid_np(x.data)),), "softplus")


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; ties send the gradient to ``a``."""
    a = _as_tensor(a)
    b = _as_tensor(b, a)
    pick = a.data >= b.data

    def bw(g):
        return ((a, _unbroadcast(g * pick, a.shape)), (b, _unbroadcast(g * ~pick, b.shape)))

    return Tensor._make(np.where(pick, a.data, b.data), (a, b), bw, "maximum")


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties send the gradient to ``a``."""
    a = _as_tensor(a)
    b = _as_tensor(b, a)
    pick = a.data <= b.data

    def bw(g):
        return ((a, _unbroadcast(g * pick, a.shape)), (b, _unbroadcast(g * ~pick, b.shape)))

    return Tensor._make(np.where(pick, a.data, b.data), (a, b), bw, "minimum")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(tensors)
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(zip(ts, np.split(g, cuts, axis=axis)))

    return Tensor._make(np.concatenate([t.data for t in ts], axis=axis), ts, bw, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(tensors)

    def bw(g):
        return tuple((t, np.take(g, i, axis=axis)) for i, t in enumerate(ts))

    return Tensor._make(np.stack([t.data for t in ts], axis=axis), ts, bw, "stack")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def bw(g):
        gx = gxg = gb = None
        if gamma.requires_grad:
            gxg = _unbroadcast(g * xhat, gamma.shape)
        if beta.requires_grad:
            gb = _unbroadcast(g, beta.shape)
        if x.requires_grad:
            gh = g * gamma.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return ((x, gx), (gamma, gxg), (beta, gb))

    return Tensor._make(xhat * gamma.data + beta.data, (x, gamma, beta), bw, "layer_norm")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` over the last axis of ``x`` as a single recorded op."""
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"linear dimension mismatch: {x.shape} @ {w.shape}")
    out = np.matmul(x.data, w.data)
    if b is not None:
        out = out + b.data
    parents = (x, w) if b is None else (x, w, b)

    def bw(g):
        res = [(x, np.matmul(g, w.data.T) if x.requires_grad else None)]
        g2 = g.reshape(-1, g.shape[-1])
        res.append((w, x.data.reshape(-1, x.shape[-1]).T @ g2 if w.requires_grad else None))
        if b is not None:
            res.append((b, g2.sum(axis=0) if b.requires_grad else None))
        return res

    return Tensor._make(out, parents, bw, "linear")


def mh_scores(q: Tensor, k: Tensor, heads: int) -> Tensor:
    """Per-head scaled dot products: ``(K x D), (N x D) -> H x K x N``."""
    K, D = q.shape
    N = k.shape[0]
    dh = D // heads
    scale = 1.0 / math.sqrt(dh)
    qh = q.data.reshape(K, heads, dh).transpose(1, 0, 2)
    kh = k.data.reshape(N, heads, dh).transpose(1, 0, 2)
    out = np.matmul(qh, kh.transpose(0, 2, 1)) * scale

    def bw(g):
        gq = gk = None
        if q.requires_grad:
            gq = (np.matmul(g, kh) * scale).transpose(1, 0, 2).reshape(K, D)
        if k.requires_grad:
            gk = (np.matmul(g.transpose(0, 2, 1), qh) * scale).transpose(1, 0, 2).reshape(N, D)
        return ((q, gq), (k, gk))

    return Tensor._make(out, (q, k), bw, "mh_scores")


def mh_combine(attn: Tensor, v: Tensor) -> Tensor:
    """Apply ``H x K x N`` weights to values ``N x D`` split into heads; returns ``K x D``."""
    H, K, N = attn.shape
    D = v.shape[1]
    dh = D // H
    vh = v.data.reshape(N, H, dh).transpose(1, 0, 2)
    out = np.matmul(attn.data, vh).transpose(1, 0, 2).reshape(K, D)

    def bw(g):
        gh = g.reshape(K, H, dh).transpose(1, 0, 2)
        ga = np.matmul(gh, vh.transpose(0, 2, 1)) if attn.requires_grad else None
        gv = None
        if v.requires_grad:
            gv = np.matmul(attn.data.transpose(0, 2, 1), gh).transpose(1, 0, 2).reshape(N, D)
        return ((attn, ga), (v, gv))

    return Tensor._make(out, (attn, v), bw, "mh_combine")


@dataclass
class MlpParams:
    """Two-layer perceptron ``in_dim -> hidden_dim -> out_dim`` with ReLU."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("MLP weights must be rank 2")
        if self.b1.shape != (self.w1.shape[1],) or self.w2.shape[0] != self.w1.shape[1]:
            raise ValueError("first layer shapes do not chain")
        if self.b2.shape != (self.w2.shape[1],):
            raise ValueError("second layer bias shape mismatch")


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_mlp(in_dim: int, hidden_dim: int, out_dim: int, seed) -> MlpParams:
    """Seeded init, uniform in +-1/sqrt(fan_in) for weights and biases.

    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return MlpParams(
        w1=param(_uniform(rng, in_dim, (in_dim, hidden_dim))),
        b1=param(_uniform(rng, in_dim, (hidden_dim,))),
        w2=param(_uniform(rng, hidden_dim, (hidden_dim, out_dim))),
        b2=param(_uniform(rng, hidden_dim, (out_dim,))),
    )


def mlp_apply(p: MlpParams, x: Tensor) -> Tensor:
    if x.shape[-1] != p.in_dim:
        raise ValueError(f"MLP expects last dim {p.in_dim}, got {x.shape}")
    return linear(relu(linear(x, p.w1, p.b1)), p.w2, p.b2)


def grad_check(
    f: Callable[..., Tensor],
    x: Tensor | Iterable[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Compare reverse-mode gradients with central differences.

    ``f`` maps ``x`` to a scalar tensor. If ``x`` is a sequence of tensors,
    ``f`` is called with no arguments and must close over them; this is how
    gradients with respect to model parameters are checked.

    Returns ``max |analytic - numeric| / max(1, |numeric|)`` over the checked
    coordinates. ``max_coords`` limits each tensor to a seeded random subset.
    """
    if isinstance(x, Tensor):
        leaves = [x]
        call = lambda: f(x)  # noqa: E731
    else:
        leaves = list(x)
        call = f
    for t in leaves:
        if t.data.dtype != np.float64:
            raise ValueError("grad_check needs 64-bit tensors")
        t.requires_grad = True
        t.grad = None
    out = call()
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar function")
    if not np.isfinite(out.data).all():
        raise NonFiniteError("function value is not finite")
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in leaves]

    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for t, ag in zip(leaves, analytic):
            flat = t.data.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = rng.choice(flat.size, size=max_coords, replace=False)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + h
                fp = float(call().data)
                flat[i] = orig - h
                fm = float(call().data)
                flat[i] = orig
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise NonFiniteError("function value is not finite under perturbation")
                num = (fp - fm) / (2.0 * h)
                err = abs(ag.reshape(-1)[i] - num) / max(1.0, abs(num))
                worst = max(worst, err)
    return worst


def named_parameters(obj, prefix: str = "") -> list:
    """Walk dataclasses, lists and dicts collecting ``(dotted_name, Tensor)`` leaves.

    Only tensors with ``requires_grad`` are returned; a tensor reachable by
    several paths is reported once, under the first path found.
    """
    out: list = []
    seen: set = set()

    def walk(o, name):
        if isinstance(o, Tensor):
            if o.requires_grad and id(o) not in seen:
                seen.add(id(o))
                out.append((name, o))
        elif dataclasses.is_dataclass(o) and not isinstance(o, type):
            for f in dataclasses.fields(o):
                walk(getattr(o, f.name), f"{name}.{f.name}" if name else f.name)
        elif isinstance(o, (list, tuple)):
            for i, v in enumerate(o):
                walk(v, f"{name}.{i}" if name else str(i))
        elif isinstance(o, dict):
            for k in sorted(o):
                walk(o[k], f"{name}.{k}" if name else str(k))

    walk(obj, prefix)
    return out


def parameters_of(obj) -> list:
    return [t for _, t in named_parameters(obj)]
