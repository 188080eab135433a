"""Scalar expressions in the coordinates x1..xn, y1..yn of the tangent bundle.

Expressions are parsed from text into an immutable tree which can be
evaluated at a point and differentiated exactly.  The symbolic derivative is
used both as the "exact" derivative engine and as the oracle that finite
differences are checked against.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

``VAR`` is ``x<i>`` or ``y<i>`` with a decimal index, ``FUNC`` is one of
exp, ln, sqrt, sin, cos.  Exponents must be constant; ``x1^-2`` and
``x1^(1/2)`` are accepted, ``2^x1`` is not.  Error offsets are 1-based byte
positions in the UTF-8 encoded input.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

__all__ = [
    "Expr", "Const", "Var", "Neg", "Func", "BinOp", "Pow",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError",
    "IndexOutOfRangeError", "NonConstantExponentError", "ExprDomainError",
    "parse", "evaluate", "differentiate", "to_text", "is_x_only",
    "variables", "const", "var",
]


class ExprError(ValueError):
    """Malformed expression text."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class IndexOutOfRangeError(ExprError):
    pass


class NonConstantExponentError(ExprError):
    pass


class ExprDomainError(ArithmeticError):
    """Evaluation left the real domain (division by zero, ln of a
    non-positive number, overflow, ...).  ``subtree`` is the offending node."""

    def __init__(self, message: str, subtree: "Expr"):
        self.subtree = subtree
        super().__init__(f"{message} in '{to_text(subtree)}'")


# precedence levels used by the printer
_P_ADD, _P_MUL, _P_NEG, _P_POW, _P_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base class of expression nodes.  Nodes are immutable and hashable.

    Arithmetic operators build new trees with the same light constant folding
    that differentiation uses, which makes programmatic construction easy::

        g = const(1.0) + var("x", 1) ** 2
    """

    __slots__ = ()
    prec = _P_ATOM

    def _eval(self, x: Sequence[float], y: Sequence[float]) -> float:
        raise NotImplementedError

    def _diff(self, kind: str, index: int) -> "Expr":
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, float(exponent))

    def __str__(self) -> str:
        return to_text(self)


def _lift(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def _eval(self, x, y):
        return self.value

    def _diff(self, kind, index):
        return ZERO


@dataclass(frozen=True, slots=True)
class Var(Expr):
    kind: str  # "x" or "y"
    index: int  # 1-based

    def _eval(self, x, y):
        coords = x if self.kind == "x" else y
        try:
            return coords[self.index - 1]
        except IndexError:
            raise ExprDomainError(
                f"point has no coordinate {self.kind}{self.index}", self) from None

    def _diff(self, kind, index):
        return ONE if (kind, index) == (self.kind, self.index) else ZERO


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr
    prec = _P_NEG

    def _eval(self, x, y):
        return -self.arg._eval(x, y)

    def _diff(self, kind, index):
        return neg(self.arg._diff(kind, index))

    def children(self):
        return (self.arg,)


def _checked_exp(node, v):
    try:
        return math.exp(v)
    except OverflowError:
        raise ExprDomainError("exp overflow", node) from None


def _checked_ln(node, v):
    if v <= 0.0:
        raise ExprDomainError(f"ln of non-positive value {v!r}", node)
    return math.log(v)


def _checked_sqrt(node, v):
    if v < 0.0:
        raise ExprDomainError(f"sqrt of negative value {v!r}", node)
    return math.sqrt(v)


_FUNCS: dict[str, Callable[["Func", float], float]] = {
    "exp": _checked_exp,
    "ln": _checked_ln,
    "sqrt": _checked_sqrt,
    "sin": lambda node, v: math.sin(v),
    "cos": lambda node, v: math.cos(v),
}


@dataclass(frozen=True, slots=True)
class Func(Expr):
    name: str
    arg: Expr

    def _eval(self, x, y):
        return _FUNCS[self.name](self, self.arg._eval(x, y))

    def _diff(self, kind, index):
        u = self.arg
        du = u._diff(kind, index)
        if _is_zero(du):
            return ZERO
        if self.name == "exp":
            outer = self
        elif self.name == "ln":
            return div(du, u)
        elif self.name == "sqrt":
            return div(du, mul(Const(2.0), self))
        elif self.name == "sin":
            outer = Func("cos", u)
        else:
            outer = neg(Func("sin", u))
        return mul(outer, du)

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr

    @property
    def prec(self):
        return _P_ADD if self.op in "+-" else _P_MUL

    def _eval(self, x, y):
        a = self.left._eval(x, y)
        b = self.right._eval(x, y)
        if self.op == "+":
            r = a + b
        elif self.op == "-":
            r = a - b
        elif self.op == "*":
            r = a * b
        else:
            if b == 0.0:
                raise ExprDomainError("division by zero", self)
            r = a / b
        if not math.isfinite(r):
            raise ExprDomainError("non-finite result", self)
        return r

    def _diff(self, kind, index):
        u, v = self.left, self.right
        du, dv = u._diff(kind, index), v._diff(kind, index)
        if self.op == "+":
            return add(du, dv)
        if self.op == "-":
            return sub(du, dv)
        if self.op == "*":
            return add(mul(du, v), mul(u, dv))
        # (u/v)' = u'/v - u*v'/v^2
        return sub(div(du, v), div(mul(u, dv), power(v, 2.0)))

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: float
    prec = _P_POW

    def _eval(self, x, y):
        b = self.base._eval(x, y)
        try:
            r = math.pow(b, self.exponent)
        except (ValueError, ZeroDivisionError):
            raise ExprDomainError(
                f"{b!r}^{self.exponent!r} is not a real number", self) from None
        except OverflowError:
            raise ExprDomainError("power overflow", self) from None
        return r

    def _diff(self, kind, index):
        du = self.base._diff(kind, index)
        if _is_zero(du):
            return ZERO
        c = self.exponent
        return mul(mul(Const(c), power(self.base, c - 1.0)), du)

    def children(self):
        return (self.base,)


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(float(value))


def var(kind: str, index: int) -> Var:
    if kind not in ("x", "y") or index < 1:
        raise ValueError(f"bad variable {kind}{index}")
    return Var(kind, index)


# -- constructors with folding of literal zeros and ones -------------------

def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


def add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_one(b):
        return a
    if _is_zero(a):
        return ZERO
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if _is_zero(a):
        return ZERO
    return Neg(a)


def power(base: Expr, exponent: float) -> Expr:
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return base
    return Pow(base, exponent)


def exp(a: Expr) -> Expr:
    return Func("exp", a)


# -- public operations -------------------------------------------------------

def evaluate(e: Expr, x: Sequence[float], y: Sequence[float] = ()) -> float:
    """Value of ``e`` at base coordinates ``x`` and fibre coordinates ``y``.

    Raises ExprDomainError instead of returning NaN or infinity.
    """
    r = e._eval(x, y)
    if not math.isfinite(r):
        raise ExprDomainError("non-finite result", e)
    return float(r)


def differentiate(e: Expr, kind: str, index: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to x<index> or y<index>."""
    if kind not in ("x", "y") or index < 1:
        raise ValueError(f"cannot differentiate with respect to {kind}{index}")
    return e._diff(kind, index)


def _walk(e: Expr):
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.children())


def variables(e: Expr) -> set[tuple[str, int]]:
    return {(v.kind, v.index) for v in _walk(e) if isinstance(v, Var)}


def is_x_only(e: Expr) -> bool:
    """True when no y<i> variable occurs in ``e``."""
    return all(not (isinstance(v, Var) and v.kind == "y") for v in _walk(e))


# -- printing ----------------------------------------------------------------

def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _wrap(e: Expr, parens: bool) -> str:
    s = to_text(e)
    return f"({s})" if parens else s


def to_text(e: Expr) -> str:
    """Render ``e`` in the input grammar; ``parse(to_text(e))`` evaluates
    identically to ``e`` (negative constants come back as negations)."""
    if isinstance(e, Const):
        s = _fmt_number(abs(e.value))
        return f"(-{s})" if math.copysign(1.0, e.value) < 0 else s
    if isinstance(e, Var):
        return f"{e.kind}{e.index}"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, e.arg.prec < _P_NEG)
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Pow):
        c = e.exponent
        exp_text = _fmt_number(c) if c >= 0 else f"-{_fmt_number(-c)}"
        return f"{_wrap(e.base, e.base.prec <= _P_POW)}^{exp_text}"
    if isinstance(e, BinOp):
        p = e.prec
        left = _wrap(e.left, e.left.prec < p)
        # right operand keeps its grouping so that reparsing gives the same tree
        right = _wrap(e.right, e.right.prec <= p)
        return f"{left}{e.op}{right}" if p == _P_MUL else f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)

_VAR = re.compile(r"([xy])(\d+)$")


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens: list[tuple[str, str, int]] = []
        self._tokenize()
        self.pos = 0

    def _offset(self, char_index: int) -> int:
        return len(self.text[:char_index].encode("utf-8")) + 1

    def _tokenize(self):
        i = 0
        text = self.text
        while i < len(text):
            m = _TOKEN.match(text, i)
            if m is None:
                raise ExprSyntaxError(
                    f"unexpected character {text[i]!r}", self._offset(i))
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), self._offset(i)))
            i = m.end()
        self.tokens.append(("end", "", self._offset(len(text))))

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            off = self.take()[2]
            exponent = self.unary()
            if variables(exponent):
                raise NonConstantExponentError("non-constant exponent", off)
            try:
                c = evaluate(exponent, ())
            except ExprDomainError as err:
                raise ExprSyntaxError(f"invalid exponent ({err})", off) from None
            return Pow(base, c)
        return base

    def primary(self) -> Expr:
        kind, text, off = self.take()
        if kind == "num":
            v = float(text)
            if not math.isfinite(v):
                raise ExprSyntaxError(f"number {text} out of range", off)
            return Const(v)
        if kind == "ident":
            m = _VAR.match(text)
            if m:
                index = int(m.group(2))
                if not 1 <= index <= self.n:
                    raise IndexOutOfRangeError(
                        f"variable {text} has index outside 1..{self.n}", off)
                return Var(m.group(1), index)
            if text in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
        if (kind, text) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", off)


def parse(text: str, n: int) -> Expr:
    """Parse ``text`` into an expression over x1..xn, y1..yn.

    >>> to_text(parse("x1^2 + y2", 2))
    'x1^2 + y2'
    """
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return _Parser(text, n).parse()
