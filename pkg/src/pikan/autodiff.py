"""Array-valued reverse-mode tape with width-2 forward tangents on top.

Every value on the tape is a float64 ndarray (a 0-d array for scalar use), so
a single node can carry one quantity for thousands of sample points at once.
:class:`DualScalar` pairs a value with its derivatives along the two normalized
input coordinates; all tangent arithmetic goes through tape ops, which is what
makes the parameter gradient of a strain (a mixed second derivative) available
from one ordinary reverse sweep.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

X, Y = 0, 1


class AutodiffError(ArithmeticError):
    """Raised for invalid arithmetic on the tape; carries the offending node id."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message if node is None else f"{message} (node {node})")
        self.node = node


class Tape:
    """Append-only list of nodes. Parents always precede children."""

    def __init__(self) -> None:
        self.values: list[np.ndarray] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list[Callable | None] = []
        self.params: list[int] = []

    def __len__(self) -> int:
        return len(self.values)

    def _push(self, value, parents=(), vjp=None) -> "Var":
        self.values.append(value)
        self.parents.append(tuple(parents))
        self.vjps.append(vjp)
        return Var(self, len(self.values) - 1)

    def param(self, value) -> "Var":
        """Register a trainable leaf."""
        var = self._push(np.array(value, dtype=np.float64))
        self.params.append(var.id)
        return var

    def constant(self, value) -> "Var":
        return self._push(np.array(value, dtype=np.float64))

    def record(self, value, parents: Sequence["Var"], vjp: Callable) -> "Var":
        return self._push(value, [p.id for p in parents], vjp)

    def backward(self, output: "Var", seed=None) -> list[np.ndarray]:
        """Reverse accumulation from ``output``.

        Returns one gradient array per registered parameter, in registration
        order; parameters the output does not depend on get zeros.
        """
        if output.tape is not self:
            raise AutodiffError("output belongs to another tape", output.id)
        out = output.id
        grads: list[np.ndarray | None] = [None] * (out + 1)
        value = self.values[out]
        grads[out] = np.ones_like(value) if seed is None else np.broadcast_to(seed, value.shape).astype(np.float64)
        for i in range(out, -1, -1):
            g = grads[i]
            vjp = self.vjps[i]
            if g is None or vjp is None:
                continue
            for pid, pg in zip(self.parents[i], vjp(g)):
                if pg is None:
                    continue
                if grads[pid] is None:
                    grads[pid] = pg
                else:
                    grads[pid] = grads[pid] + pg
            if i != out:
                grads[i] = None
        result = []
        for pid in self.params:
            g = grads[pid] if pid <= out else None
            result.append(np.zeros_like(self.values[pid]) if g is None else np.asarray(g, dtype=np.float64))
        return result

    def gradient(self, output: "Var") -> np.ndarray:
        """Flat concatenation of :meth:`backward` over all parameter slots."""
        grads = self.backward(output)
        if not grads:
            return np.zeros(0)
        return np.concatenate([g.ravel() for g in grads])


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _val(a):
    return a.value if isinstance(a, Var) else a


def _tape_of(*args) -> Tape | None:
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


class Var:
    """Handle to a tape node. Supports numpy-style broadcasting arithmetic."""

    __slots__ = ("tape", "id")
    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, tape: Tape, id: int):
        self.tape = tape
        self.id = id

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.id]

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        return f"Var(id={self.id}, shape={self.shape})"

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

    def __pow__(self, n):
        return powi(self, n)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None):
        return vsum(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


# ---------------------------------------------------------------------------
# primitive ops; each returns a plain ndarray when no operand is on a tape


def add(a, b):
    tape = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    out = np.add(va, vb)
    if tape is None:
        return out
    sa, sb = np.shape(va), np.shape(vb)
    parents, fns = [], []
    if isinstance(a, Var):
        parents.append(a)
        fns.append(lambda g: _unbroadcast(g, sa))
    if isinstance(b, Var):
        parents.append(b)
        fns.append(lambda g: _unbroadcast(g, sb))
    return tape.record(out, parents, lambda g: [f(g) for f in fns])


def neg(a):
    if not isinstance(a, Var):
        return -a
    return a.tape.record(-a.value, [a], lambda g: [-g])


def sub(a, b):
    tape = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    out = np.subtract(va, vb)
    if tape is None:
        return out
    sa, sb = np.shape(va), np.shape(vb)
    parents, fns = [], []
    if isinstance(a, Var):
        parents.append(a)
        fns.append(lambda g: _unbroadcast(g, sa))
    if isinstance(b, Var):
        parents.append(b)
        fns.append(lambda g: -_unbroadcast(g, sb))
    return tape.record(out, parents, lambda g: [f(g) for f in fns])


def mul(a, b):
    tape = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    out = np.multiply(va, vb)
    if tape is None:
        return out
    sa, sb = np.shape(va), np.shape(vb)
    parents, fns = [], []
    if isinstance(a, Var):
        parents.append(a)
        fns.append(lambda g: _unbroadcast(g * vb, sa))
    if isinstance(b, Var):
        parents.append(b)
        fns.append(lambda g: _unbroadcast(g * va, sb))
    return tape.record(out, parents, lambda g: [f(g) for f in fns])


def div(a, b):
    tape = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    if np.any(np.asarray(vb) == 0):
        raise AutodiffError("division by zero", len(tape) if tape is not None else None)
    out = np.divide(va, vb)
    if tape is None:
        return out
    sa, sb = np.shape(va), np.shape(vb)
    parents, fns = [], []
    if isinstance(a, Var):
        parents.append(a)
        fns.append(lambda g: _unbroadcast(g / vb, sa))
    if isinstance(b, Var):
        parents.append(b)
        fns.append(lambda g: _unbroadcast(-g * out / vb, sb))
    return tape.record(out, parents, lambda g: [f(g) for f in fns])


def powi(a, n: int):
    if int(n) != n:
        raise AutodiffError(f"powi needs an integer exponent, got {n!r}")
    n = int(n)
    if not isinstance(a, Var):
        return np.power(a, n)
    va = a.value
    out = np.power(va, n)
    if n == 0:
        return a.tape.record(out, [a], lambda g: [np.zeros_like(va)])
    return a.tape.record(out, [a], lambda g: [g * n * np.power(va, n - 1)])


def tanh(a):
    if not isinstance(a, Var):
        return np.tanh(a)
    out = np.tanh(a.value)
    return a.tape.record(out, [a], lambda g: [g * (1.0 - out * out)])


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _silu_d1(x):
    s = _sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def _silu_d2(x):
    s = _sigmoid(x)
    return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))


def silu(a):
    """x / (1 + exp(-x))."""
    if not isinstance(a, Var):
        return a * _sigmoid(a)
    va = a.value
    return a.tape.record(va * _sigmoid(va), [a], lambda g: [g * _silu_d1(va)])


def silu_prime(a):
    """Derivative of :func:`silu`, itself differentiable on the tape."""
    if not isinstance(a, Var):
        return _silu_d1(a)
    va = a.value
    return a.tape.record(_silu_d1(va), [a], lambda g: [g * _silu_d2(va)])


def exp(a):
    if not isinstance(a, Var):
        return np.exp(a)
    out = np.exp(a.value)
    return a.tape.record(out, [a], lambda g: [g * out])


def vsum(a, axis=None):
    if not isinstance(a, Var):
        return np.sum(a, axis=axis)
    shape = a.shape
    out = np.sum(a.value, axis=axis)

    def vjp(g):
        if axis is None:
            return [np.broadcast_to(g, shape)]
        return [np.broadcast_to(np.expand_dims(g, axis), shape)]

    return a.tape.record(np.asarray(out), [a], vjp)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.reshape(a, shape)
    old = a.shape
    return a.tape.record(a.value.reshape(shape), [a], lambda g: [g.reshape(old)])


def transpose(a):
    if not isinstance(a, Var):
        return np.transpose(a)
    return a.tape.record(a.value.T, [a], lambda g: [g.T])


def _is_basic(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None for i in items)


def getitem(a, index):
    if not isinstance(a, Var):
        return np.asarray(a)[index]
    shape = a.shape
    basic = _is_basic(index)

    def vjp(g):
        full = np.zeros(shape)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return [full]

    return a.tape.record(np.asarray(a.value[index]), [a], vjp)


def matmul(a, b):
    """Matrix product with numpy batching rules (operands of ndim >= 2)."""
    tape = _tape_of(a, b)
    va, vb = _val(a), _val(b)
    out = np.matmul(va, vb)
    if tape is None:
        return out
    parents, fns = [], []
    if isinstance(a, Var):
        parents.append(a)
        fns.append(lambda g: _unbroadcast(np.matmul(g, np.swapaxes(vb, -1, -2)), va.shape))
    if isinstance(b, Var):
        parents.append(b)
        fns.append(lambda g: _unbroadcast(np.matmul(np.swapaxes(va, -1, -2), g), vb.shape))
    return tape.record(out, parents, lambda g: [f(g) for f in fns])


def permute(a, axes):
    if not isinstance(a, Var):
        return np.transpose(a, axes)
    inverse = np.argsort(axes)
    return a.tape.record(np.transpose(a.value, axes), [a], lambda g: [np.transpose(g, inverse)])


def where_mask(a, mask: np.ndarray):
    """Multiply by a fixed 0/1 mask (cheaper than a general mul on the tape)."""
    return mul(a, mask.astype(np.float64))


def custom(tape_parent: Var, value: np.ndarray, vjp: Callable[[np.ndarray], np.ndarray]) -> Var:
    """Record a unary op whose local vector-Jacobian product is supplied by the caller."""
    return tape_parent.tape.record(value, [tape_parent], lambda g: [vjp(g)])


# ---------------------------------------------------------------------------
# forward tangents


class DualScalar:
    """A value with its derivatives along the two normalized input coordinates.

    ``tangent`` stacks both channels on a leading axis of length 2, so
    ``tangent[0]`` is d/dx~ and ``tangent[1]`` is d/dy~. Either part may be a
    tape :class:`Var` or a constant ndarray.
    """

    __slots__ = ("value", "tangent")

    def __init__(self, value, tangent):
        self.value = value
        self.tangent = tangent

    @property
    def dx(self):
        return self.tangent[0]

    @property
    def dy(self):
        return self.tangent[1]

    def __repr__(self) -> str:
        return f"DualScalar(value={_val(self.value)!r}, dx={_val(self.dx)!r}, dy={_val(self.dy)!r})"

    def __add__(self, other):
        other = as_dual(other)
        return DualScalar(add(self.value, other.value), add(self.tangent, other.tangent))

    __radd__ = __add__

    def __sub__(self, other):
        other = as_dual(other)
        return DualScalar(sub(self.value, other.value), sub(self.tangent, other.tangent))

    def __rsub__(self, other):
        return as_dual(other) - self

    def __mul__(self, other):
        other = as_dual(other)
        return DualScalar(
            mul(self.value, other.value),
            add(mul(self.tangent, other.value), mul(self.value, other.tangent)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_dual(other)
        q = div(self.value, other.value)
        return DualScalar(q, div(sub(self.tangent, mul(q, other.tangent)), other.value))

    def __rtruediv__(self, other):
        return as_dual(other) / self

    def __neg__(self):
        return DualScalar(neg(self.value), neg(self.tangent))

    def __pow__(self, n: int):
        return dual_powi(self, n)


def as_dual(a) -> DualScalar:
    if isinstance(a, DualScalar):
        return a
    return lift_const(a)


def lift_input(x, which: int, tape: Tape | None = None) -> DualScalar:
    """Seed an input coordinate: tangent (1, 0) for X, (0, 1) for Y."""
    if which not in (X, Y):
        raise ValueError("which must be X or Y")
    value = np.asarray(x, dtype=np.float64)
    tangent = np.zeros((2,) + value.shape)
    tangent[which] = 1.0
    if tape is not None:
        value = tape.constant(value)
    return DualScalar(value, tangent)


def lift_param(theta, tape: Tape) -> DualScalar:
    """Register a trainable leaf with zero input-tangents."""
    value = tape.param(theta)
    return DualScalar(value, np.zeros((2,) + value.shape))


def lift_const(c) -> DualScalar:
    value = np.asarray(c, dtype=np.float64)
    return DualScalar(value, np.zeros((2,) + value.shape))


def dual_tanh(a: DualScalar) -> DualScalar:
    v = tanh(a.value)
    return DualScalar(v, mul(a.tangent, sub(1.0, mul(v, v))))


def dual_silu(a: DualScalar) -> DualScalar:
    return DualScalar(silu(a.value), mul(a.tangent, silu_prime(a.value)))


def dual_powi(a: DualScalar, n: int) -> DualScalar:
    n = int(n)
    if n == 0:
        return lift_const(np.ones(np.shape(_val(a.value))))
    return DualScalar(powi(a.value, n), mul(a.tangent, mul(float(n), powi(a.value, n - 1))))


def backward(output, tape: Tape | None = None) -> np.ndarray:
    """Flat parameter gradient of a scalar tape node (or of a DualScalar's value)."""
    if isinstance(output, DualScalar):
        output = output.value
    if not isinstance(output, Var):
        if tape is None:
            raise AutodiffError("output is a constant and no tape was given")
        return np.zeros(sum(tape.values[p].size for p in tape.params))
    return output.tape.gradient(output)


def lift_points(xy) -> DualScalar:
    """Seed both coordinates of a point cloud (N, 2) as one dual.

    The tangent has shape (2, N, 2): channel a holds d/d(coordinate a).
    """
    value = np.array(xy, dtype=np.float64)
    tangent = np.zeros((2,) + value.shape)
    tangent[0, :, 0] = 1.0
    tangent[1, :, 1] = 1.0
    return DualScalar(value, tangent)
