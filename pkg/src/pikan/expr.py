"""Whitelisted arithmetic expressions in x and y with symbolic derivatives.

Config files describe tractions, distance factors and extensions as short
strings such as ``"x"``, ``"1200*y"`` or ``"sqrt(x**2 + y**2 + 1e-8) - 1e-4"``.
They are parsed with :mod:`ast` and anything outside the whitelist (names
other than x, y and declared constants; calls other than the functions
below; attribute access, subscripts, ...) is rejected.

Supported: numbers, x, y, named constants, + - * /, unary -, ``**`` with an
integer exponent, sqrt, exp, log, and ``softmin(a, b, ...)`` whose smoothing
temperature is the constant ``tau``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

FUNCTIONS = ("sqrt", "exp", "log", "softmin")


class ExprError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple = ()
    value: float | str | None = None

    # evaluation -------------------------------------------------------
    def eval(self, x, y, env: Mapping[str, float]):
        op = self.op
        if op == "num":
            return np.full(np.shape(x), self.value, dtype=float)
        if op == "var":
            return np.asarray(x if self.value == "x" else y, dtype=float)
        if op == "const":
            return np.full(np.shape(x), env[self.value], dtype=float)
        a = [arg.eval(x, y, env) for arg in self.args]
        if op == "add":
            return a[0] + a[1]
        if op == "sub":
            return a[0] - a[1]
        if op == "mul":
            return a[0] * a[1]
        if op == "div":
            return a[0] / a[1]
        if op == "neg":
            return -a[0]
        if op == "pow":
            return a[0] ** int(self.value)
        if op == "sqrt":
            return np.sqrt(a[0])
        if op == "exp":
            return np.exp(a[0])
        if op == "log":
            return np.log(a[0])
        if op == "softmin":
            return _softmin(np.stack(a), env["tau"])
        if op == "softmin_weight":
            # weight of argument self.value inside softmin(args)
            return _softmin_weights(np.stack(a), env["tau"])[int(self.value)]
        raise ExprError(f"cannot evaluate op {op!r}")

    def __str__(self) -> str:
        op = self.op
        if op in ("num",):
            return repr(self.value)
        if op in ("var", "const"):
            return str(self.value)
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
        if op in sym:
            return f"({self.args[0]} {sym[op]} {self.args[1]})"
        if op == "neg":
            return f"(-{self.args[0]})"
        if op == "pow":
            return f"({self.args[0]} ** {int(self.value)})"
        if op == "softmin_weight":
            return f"softmin_weight[{self.value}]({', '.join(map(str, self.args))})"
        return f"{op}({', '.join(map(str, self.args))})"


def _softmin(a, tau):
    m = a.min(axis=0)
    return m - tau * np.log(np.exp(-(a - m) / tau).sum(axis=0))


def _softmin_weights(a, tau):
    m = a.min(axis=0)
    e = np.exp(-(a - m) / tau)
    return e / e.sum(axis=0)


# construction helpers with light constant folding ------------------------


def num(v) -> Node:
    return Node("num", value=float(v))


ZERO, ONE = num(0.0), num(1.0)


def _is(n: Node, v: float) -> bool:
    return n.op == "num" and n.value == v


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if a.op == b.op == "num":
        return num(a.value + b.value)
    return Node("add", (a, b))


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if a.op == b.op == "num":
        return num(a.value - b.value)
    return Node("sub", (a, b))


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if a.op == b.op == "num":
        return num(a.value * b.value)
    return Node("mul", (a, b))


def div(a, b):
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    if a.op == b.op == "num" and b.value != 0:
        return num(a.value / b.value)
    return Node("div", (a, b))


def neg(a):
    if a.op == "num":
        return num(-a.value)
    return Node("neg", (a,))


def powi(a, n: int):
    if n == 0:
        return ONE
    if n == 1:
        return a
    return Node("pow", (a,), n)


# differentiation ----------------------------------------------------------


def diff(n: Node, var: str) -> Node:
    op = n.op
    if op in ("num", "const"):
        return ZERO
    if op == "var":
        return ONE if n.value == var else ZERO
    a = n.args
    if op == "add":
        return add(diff(a[0], var), diff(a[1], var))
    if op == "sub":
        return sub(diff(a[0], var), diff(a[1], var))
    if op == "mul":
        return add(mul(diff(a[0], var), a[1]), mul(a[0], diff(a[1], var)))
    if op == "div":
        num_ = sub(mul(diff(a[0], var), a[1]), mul(a[0], diff(a[1], var)))
        return div(num_, powi(a[1], 2))
    if op == "neg":
        return neg(diff(a[0], var))
    if op == "pow":
        k = int(n.value)
        return mul(mul(num(k), powi(a[0], k - 1)), diff(a[0], var))
    if op == "sqrt":
        return div(diff(a[0], var), mul(num(2.0), n))
    if op == "exp":
        return mul(n, diff(a[0], var))
    if op == "log":
        return div(diff(a[0], var), a[0])
    if op == "softmin":
        # d softmin = sum_i w_i d a_i with softmax weights of -a / tau
        out = ZERO
        for i, arg in enumerate(a):
            out = add(out, mul(Node("softmin_weight", a, i), diff(arg, var)))
        return out
    raise ExprError(f"cannot differentiate op {op!r}")


# parsing -------------------------------------------------------------------


def parse(text, constants: Mapping[str, float] | None = None) -> Node:
    """Parse ``text`` (or a plain number) into an expression tree."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return num(text)
    if not isinstance(text, str):
        raise ExprError(f"expression must be a string or number, got {type(text).__name__}")
    names = set(constants or {}) | {"tau"}
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ExprError(f"invalid expression {text!r}: {e.msg}") from None

    def conv(node) -> Node:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return num(node.value)
        if isinstance(node, ast.Name):
            if node.id in ("x", "y"):
                return Node("var", value=node.id)
            if node.id in names:
                return Node("const", value=node.id)
            if node.id == "pi":
                return num(math.pi)
            raise ExprError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = conv(node.operand)
            return neg(inner) if isinstance(node.op, ast.USub) else inner
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                e = node.right
                k = -e.operand.value if isinstance(e, ast.UnaryOp) and isinstance(e.op, ast.USub) and isinstance(e.operand, ast.Constant) else getattr(e, "value", None)
                if not isinstance(k, int) or isinstance(k, bool) or k < 0:
                    raise ExprError(f"only non-negative integer powers are allowed in {text!r}")
                return powi(conv(node.left), k)
            ops = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div}
            f = ops.get(type(node.op))
            if f is None:
                raise ExprError(f"operator {type(node.op).__name__} not allowed in {text!r}")
            return f(conv(node.left), conv(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            fname = node.func.id
            if fname not in FUNCTIONS:
                raise ExprError(f"function {fname!r} not allowed in {text!r}")
            args = tuple(conv(a) for a in node.args)
            if fname == "softmin":
                if len(args) < 2:
                    raise ExprError("softmin needs at least two arguments")
                return Node("softmin", args)
            if len(args) != 1:
                raise ExprError(f"{fname} takes one argument")
            return Node(fname, args)
        raise ExprError(f"construct {type(node).__name__} not allowed in {text!r}")

    return conv(tree.body)


@dataclass(frozen=True)
class ScalarField:
    """A parsed expression with its gradient, evaluated on (N, 2) point arrays."""

    source: str
    node: Node
    dx: Node
    dy: Node
    env: tuple = ()

    @classmethod
    def from_source(cls, source, constants: Mapping[str, float] | None = None) -> "ScalarField":
        constants = dict(constants or {})
        node = parse(source, constants)
        src = source if isinstance(source, str) else repr(float(source))
        return cls(src, node, diff(node, "x"), diff(node, "y"), tuple(sorted(constants.items())))

    def _env(self):
        return dict(self.env)

    def value(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return self.node.eval(p[:, 0], p[:, 1], self._env())

    def gradient(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        env = self._env()
        return np.stack([self.dx.eval(p[:, 0], p[:, 1], env), self.dy.eval(p[:, 0], p[:, 1], env)], axis=-1)

    @property
    def is_zero(self) -> bool:
        return _is(self.node, 0)


@dataclass(frozen=True)
class VectorField:
    """Two scalar fields (x and y components)."""

    x: ScalarField
    y: ScalarField

    @classmethod
    def from_sources(cls, sources, constants=None) -> "VectorField":
        if isinstance(sources, (str, int, float)) or len(sources) != 2:
            raise ExprError(f"a vector field needs exactly two component expressions, got {sources!r}")
        return cls(ScalarField.from_source(sources[0], constants), ScalarField.from_source(sources[1], constants))

    @property
    def sources(self) -> list[str]:
        return [self.x.source, self.y.source]

    def value(self, points) -> np.ndarray:
        """(N, 2) component values."""
        return np.stack([self.x.value(points), self.y.value(points)], axis=-1)

    def jacobian(self, points) -> np.ndarray:
        """(N, 2, 2) with [n, component, axis]."""
        return np.stack([self.x.gradient(points), self.y.gradient(points)], axis=1)

    @property
    def is_zero(self) -> bool:
        return self.x.is_zero and self.y.is_zero
