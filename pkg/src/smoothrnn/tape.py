"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tape`` records every primitive operation applied to ``Var`` nodes in the
order they are built, which is automatically a topological order. ``Tape.backward``
walks that record once, in reverse, accumulating adjoints, and returns the
gradient for every tracked parameter.

Plain numpy arrays and Python scalars mix freely with ``Var`` operands; they are
treated as constants and receive no adjoint. All dispatcher functions at module
level (``tanh``, ``sigmoid``, ``matvec``, ...) accept either ``Var`` or ndarray
inputs, so the same model code runs traced or untraced.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import UsageError

__all__ = [
    "Tape",
    "Var",
    "value_of",
    "matvec",
    "tanh",
    "sigmoid",
    "softplus",
    "exp",
    "log",
    "vsum",
    "vmean",
    "vabs",
    "square",
    "reshape",
    "logaddexp",
]


def _sigmoid_values(x: np.ndarray) -> np.ndarray:
    # clip keeps exp() finite; sigmoid is exactly 0/1 in float64 beyond +-60
    z = np.clip(x, -60.0, 60.0)
    return np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))


def _softplus_values(x: np.ndarray) -> np.ndarray:
    # for x > 30, log1p(exp(x)) == x in float64
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes numpy broadcast when producing it from ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Var:
    """One node of the computation record: an array value plus its backward rule."""

    __slots__ = ("value", "tape", "_parents", "_vjps", "_grad")

    # keep numpy from absorbing Var into object arrays; binary ops with an
    # ndarray on the left fall back to the Var reflected operators
    __array_ufunc__ = None

    def __init__(
        self,
        value,
        tape: "Tape",
        parents: tuple["Var", ...] = (),
        vjps: tuple[Callable[[np.ndarray], np.ndarray], ...] = (),
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self._parents = parents
        self._vjps = vjps
        self._grad = None
        tape._nodes.append(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(self, other)

    def __sub__(self, other):
        return _add(self, _neg_or_scale(other, -1.0))

    def __rsub__(self, other):
        return _add(_neg_or_scale(self, -1.0), other)

    def __neg__(self):
        return _neg_or_scale(self, -1.0)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(self, other)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self, tape=self.tape)

    def __matmul__(self, other):
        return _matmul(self, other)

    def __rmatmul__(self, other):
        return _matmul(other, self, tape=self.tape)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise UsageError("Var exponent must be a constant number")
        return _power(self, float(exponent))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Var(shape={self.value.shape})"


class Tape:
    """Append-only record of primitive operations, differentiated in reverse."""

    def __init__(self):
        self._nodes: list[Var] = []
        self._params: list[Var] = []

    def param(self, value) -> Var:
        """Register a tracked leaf; ``backward`` reports its gradient."""
        node = Var(value, self)
        self._params.append(node)
        return node

    @property
    def params(self) -> list[Var]:
        return list(self._params)

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Var) -> dict[Var, np.ndarray]:
        """Accumulate dLoss/dtheta for every tracked parameter.

        The loss must be scalar-valued. Every node is visited exactly once, in
        reverse recording order; adjoints of untracked leaves are discarded.
        """
        if not isinstance(loss, Var) or loss.tape is not self:
            raise UsageError("loss must be a Var recorded on this tape")
        if loss.value.size != 1:
            raise UsageError("loss must be scalar-valued")
        for node in self._nodes:
            node._grad = None
        loss._grad = np.ones_like(loss.value)
        for node in reversed(self._nodes):
            grad = node._grad
            if grad is None:
                continue
            for parent, vjp in zip(node._parents, node._vjps):
                contribution = vjp(grad)
                if parent._grad is None:
                    parent._grad = contribution
                else:
                    parent._grad = parent._grad + contribution
        return {
            p: (p._grad if p._grad is not None else np.zeros_like(p.value))
            for p in self._params
        }


def value_of(x) -> np.ndarray:
    """The underlying ndarray of a Var, or ``x`` itself coerced to float64."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _tape_of(*operands) -> "Tape | None":
    for op in operands:
        if isinstance(op, Var):
            return op.tape
    return None


# -- primitive operations ----------------------------------------------------


def _add(a, b):
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    if tape is None:
        return av + bv
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, s=av.shape: _unbroadcast(g, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, s=bv.shape: _unbroadcast(g, s))
    return Var(av + bv, tape, tuple(parents), tuple(vjps))


def _neg_or_scale(a, c: float):
    if not isinstance(a, Var):
        return value_of(a) * c
    return Var(a.value * c, a.tape, (a,), (lambda g: g * c,))


def _mul(a, b):
    tape = _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    if tape is None:
        return av * bv
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, o=bv, s=av.shape: _unbroadcast(g * o, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, o=av, s=bv.shape: _unbroadcast(g * o, s))
    return Var(av * bv, tape, tuple(parents), tuple(vjps))


def _div(a, b, tape=None):
    tape = tape or _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    if tape is None:
        return av / bv
    out = av / bv
    parents, vjps = [], []
    if isinstance(a, Var):
        parents.append(a)
        vjps.append(lambda g, o=bv, s=av.shape: _unbroadcast(g / o, s))
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, num=av, den=bv, s=bv.shape: _unbroadcast(-g * num / (den * den), s))
    return Var(out, tape, tuple(parents), tuple(vjps))


def _matmul(a, b, tape=None):
    tape = tape or _tape_of(a, b)
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim not in (1, 2):
        raise UsageError(f"matmul expects a matrix on the left, got shapes {av.shape} @ {bv.shape}")
    if av.shape[1] != bv.shape[0]:
        raise UsageError(f"dimension mismatch in matmul: {av.shape} @ {bv.shape}")
    out = av @ bv
    if tape is None:
        return out
    parents, vjps = [], []
    if isinstance(a, Var):
        if bv.ndim == 1:
            vjps.append(lambda g, o=bv: np.outer(g, o))
        else:
            vjps.append(lambda g, o=bv: g @ o.T)
        parents.append(a)
    if isinstance(b, Var):
        parents.append(b)
        vjps.append(lambda g, o=av: o.T @ g)
    return Var(out, tape, tuple(parents), tuple(vjps))


def matvec(m, v):
    """Matrix-vector (or matrix-matrix) product, recorded when tracing."""
    return _matmul(m, v)


def _power(a: Var, exponent: float):
    out = a.value**exponent
    return Var(out, a.tape, (a,), (lambda g, x=a.value: g * exponent * x ** (exponent - 1.0),))


def square(x):
    return _mul(x, x)


def tanh(x):
    """Elementwise tanh; outputs lie strictly inside (-1, 1) for finite input."""
    if not isinstance(x, Var):
        return np.tanh(value_of(x))
    out = np.tanh(x.value)
    return Var(out, x.tape, (x,), (lambda g, y=out: g * (1.0 - y * y),))


def sigmoid(x):
    """Elementwise logistic function 1 / (1 + exp(-x)); outputs in (0, 1)."""
    if not isinstance(x, Var):
        return _sigmoid_values(value_of(x))
    out = _sigmoid_values(x.value)
    return Var(out, x.tape, (x,), (lambda g, y=out: g * y * (1.0 - y),))


def softplus(x):
    """log(1 + exp(x)), the unconstrained-to-positive map for posterior scales."""
    if not isinstance(x, Var):
        return _softplus_values(value_of(x))
    out = _softplus_values(x.value)
    return Var(out, x.tape, (x,), (lambda g, z=x.value: g * _sigmoid_values(z),))


def exp(x):
    if not isinstance(x, Var):
        return np.exp(value_of(x))
    out = np.exp(x.value)
    return Var(out, x.tape, (x,), (lambda g, y=out: g * y,))


def log(x):
    if not isinstance(x, Var):
        return np.log(value_of(x))
    out = np.log(x.value)
    return Var(out, x.tape, (x,), (lambda g, z=x.value: g / z,))


def vabs(x):
    """Elementwise absolute value with subgradient 0 at 0."""
    if not isinstance(x, Var):
        return np.abs(value_of(x))
    out = np.abs(x.value)
    return Var(out, x.tape, (x,), (lambda g, z=x.value: g * np.sign(z),))


def vsum(x, axis=None, keepdims=False):
    if not isinstance(x, Var):
        return np.sum(value_of(x), axis=axis, keepdims=keepdims)
    out = np.sum(x.value, axis=axis, keepdims=keepdims)

    def vjp(g, shape=x.value.shape):
        g = np.asarray(g)
        if axis is None:
            return np.broadcast_to(g, shape).astype(np.float64)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).astype(np.float64)

    return Var(out, x.tape, (x,), (vjp,))


def vmean(x, axis=None):
    size = value_of(x).size if axis is None else value_of(x).shape[axis]
    return _mul(vsum(x, axis=axis), 1.0 / size)


def reshape(x, shape):
    if not isinstance(x, Var):
        return value_of(x).reshape(shape)
    out = x.value.reshape(shape)
    return Var(out, x.tape, (x,), (lambda g, s=x.value.shape: np.asarray(g).reshape(s),))


def logaddexp(a, b):
    """log(exp(a) + exp(b)), stabilized by a constant elementwise shift."""
    shift = np.maximum(value_of(a), value_of(b))
    return _add(log(_add(exp(_add(a, -shift)), exp(_add(b, -shift)))), shift)


def finite_difference_gradient(
    func: Callable[[Iterable[np.ndarray]], float],
    arrays: list[np.ndarray],
    step: float = 1e-5,
) -> list[np.ndarray]:
    """Central finite differences of ``func`` w.r.t. every entry of ``arrays``.

    Independent numerical oracle for checking tape gradients; never uses the
    tape itself.
    """
    grads = []
    work = [a.copy() for a in arrays]
    for idx, arr in enumerate(work):
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = func(work)
            flat[j] = orig - step
            down = func(work)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(a: float, b: float) -> float:
    """|a - b| / max(1, |a|, |b|), the gradient-check error metric."""
    return abs(a - b) / max(1.0, abs(a), abs(b))
