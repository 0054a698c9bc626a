"""Expression trees for iterator templates.

Trees are built explicitly, either through the builder functions below or the
arithmetic operators on :class:`Expr` (which call the same builders).
Variable and parameter slots are template-local: slot ``k`` of instance ``i``
is bound to a global variable index (or a parameter value) when the template
is instantiated.
"""

from __future__ import annotations

import numbers

UNARY = ("neg", "sin", "cos", "exp", "log", "sqrt", "square")
BINARY = ("add", "sub", "mul", "div", "pow")


class Expr:
    __slots__ = ("op", "args", "value")

    def __init__(self, op: str, args: tuple = (), value=None):
        self.op = op
        self.args = args
        self.value = value

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

    def __pow__(self, other):
        return pow(self, other)

    def __rpow__(self, other):
        return pow(other, self)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        if self.op == "const":
            return repr(self.value)
        if self.op == "var":
            return f"x{self.value}"
        if self.op == "param":
            return f"p{self.value}"
        return f"{self.op}({', '.join(map(repr, self.args))})"


def _wrap(a) -> Expr:
    if isinstance(a, Expr):
        return a
    if isinstance(a, numbers.Real):
        return Expr("const", (), float(a))
    raise TypeError(f"cannot use {type(a).__name__} in an expression")


def const(v) -> Expr:
    return Expr("const", (), float(v))


def var(slot: int) -> Expr:
    if slot < 0:
        raise ValueError("slot ids are nonnegative")
    return Expr("var", (), int(slot))


def param(slot: int) -> Expr:
    if slot < 0:
        raise ValueError("slot ids are nonnegative")
    return Expr("param", (), int(slot))


def _unary(op):
    def build(a) -> Expr:
        return Expr(op, (_wrap(a),))

    build.__name__ = op
    return build


neg = _unary("neg")
sin = _unary("sin")
cos = _unary("cos")
exp = _unary("exp")
log = _unary("log")
sqrt = _unary("sqrt")
square = _unary("square")


def add(a, b) -> Expr:
    return Expr("add", (_wrap(a), _wrap(b)))


def sub(a, b) -> Expr:
    return Expr("sub", (_wrap(a), _wrap(b)))


def mul(a, b) -> Expr:
    return Expr("mul", (_wrap(a), _wrap(b)))


def div(a, b) -> Expr:
    return Expr("div", (_wrap(a), _wrap(b)))


def pow(a, b) -> Expr:
    """``a ** b``.  A non-integer (or non-constant) exponent needs a positive base."""
    return Expr("pow", (_wrap(a), _wrap(b)))


def vars_(k: int) -> tuple[Expr, ...]:
    """Convenience: slots ``0..k-1`` as variables."""
    return tuple(var(i) for i in range(k))
