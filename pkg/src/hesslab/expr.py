"""Expression language for scalar fields on chart coordinates.

Grammar (EBNF):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' factor)?
    base   := number | ident | ident '(' args ')' | '(' expr ')' | '-' base

Variables are written ``x0, x1, ...`` with the index bounded by the chart
dimension; the name ``s`` is an alias for the last coordinate (the radial
coordinate on cone charts).  Known functions: ``exp``, ``log``, ``sqrt``,
``sin``, ``cos`` with one argument, and ``pow`` with two arguments
(``pow(e, k)`` parses to the same tree as ``e^k``).  ``^`` is
right-associative.

Trees are evaluated exactly as parsed; there is no simplification pass.
The programmatic constructors (`add`, `mul`, ...) do fold constants and
drop obvious identities, which keeps machine-generated trees (symbolic
derivatives, adjugates) from ballooning, but a tree that came out of the
parser is never rewritten.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class ExprError(ValueError):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifierError(ExprError):
    pass


class VariableRangeError(ExprError):
    pass


class DomainError(ExprError):
    """Evaluation left the domain (log/sqrt of a non-positive value, zero divisor)."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------

class Expression:
    """Base class of all expression-tree nodes."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Num(Expression):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expression):
    index: int


@dataclass(frozen=True, slots=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True, slots=True)
class Add(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Sub(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Mul(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Div(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Pow(Expression):
    base: Expression
    exponent: Expression


@dataclass(frozen=True, slots=True)
class Call(Expression):
    func: str
    arg: Expression


UNARY_FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos")

ZERO = Num(0.0)
ONE = Num(1.0)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            at = len(src) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {src[at]!r}", at)
        if m.lastgroup == "number":
            tokens.append(("number", m.group("number"), m.start("number")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, dim: int):
        self.src = src
        self.dim = dim
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}, found {text or 'end of input'!r}", pos)
        return self.advance()

    def parse(self) -> Expression:
        tree = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {text!r}", pos)
        return tree

    def expr(self) -> Expression:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                rhs = self.term()
                node = Add(node, rhs) if text == "+" else Sub(node, rhs)
            else:
                return node

    def term(self) -> Expression:
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                rhs = self.factor()
                node = Mul(node, rhs) if text == "*" else Div(node, rhs)
            else:
                return node

    def factor(self) -> Expression:
        node = self.base()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Pow(node, self.factor())
        return node

    def base(self) -> Expression:
        kind, text, pos = self.advance()
        if kind == "number":
            return Num(float(text))
        if kind == "op" and text == "-":
            return Neg(self.base())
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        if kind == "ident":
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                return self.call(text, pos)
            return self.variable(text, pos)
        raise ExprSyntaxError(f"unexpected token {text or 'end of input'!r}", pos)

    def call(self, name: str, pos: int) -> Expression:
        self.expect_op("(")
        args = [self.expr()]
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == ",":
                self.advance()
                args.append(self.expr())
            else:
                break
        self.expect_op(")")
        if name in UNARY_FUNCTIONS:
            if len(args) != 1:
                raise ExprSyntaxError(f"{name} takes one argument, got {len(args)}", pos)
            return Call(name, args[0])
        if name == "pow":
            if len(args) != 2:
                raise ExprSyntaxError(f"pow takes two arguments, got {len(args)}", pos)
            return Pow(args[0], args[1])
        raise UnknownIdentifierError(f"unknown function {name!r} (at position {pos})")

    def variable(self, name: str, pos: int) -> Expression:
        if name == "s":
            if self.dim < 1:
                raise VariableRangeError(f"variable 's' needs dimension >= 1 (at position {pos})")
            return Var(self.dim - 1)
        m = re.fullmatch(r"x(\d+)", name)
        if m is None:
            raise UnknownIdentifierError(f"unknown identifier {name!r} (at position {pos})")
        index = int(m.group(1))
        if index >= self.dim:
            raise VariableRangeError(
                f"variable x{index} out of range for dimension {self.dim} (at position {pos})"
            )
        return Var(index)


def parse_expression(src: str, dim: int) -> Expression:
    """Parse ``src`` into an expression tree over at most ``dim`` coordinates."""
    if dim < 0:
        raise ValueError("dim must be non-negative")
    return _Parser(src, dim).parse()


# ---------------------------------------------------------------------------
# Printing, inspection
# ---------------------------------------------------------------------------

def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(expr: Expression) -> str:
    """Pretty-print fully parenthesized; re-parsing yields a structurally equal tree."""
    if isinstance(expr, Num):
        return format_number(expr.value)
    if isinstance(expr, Var):
        return f"x{expr.index}"
    if isinstance(expr, Neg):
        return f"(-{to_source(expr.arg)})"
    if isinstance(expr, Add):
        return f"({to_source(expr.left)} + {to_source(expr.right)})"
    if isinstance(expr, Sub):
        return f"({to_source(expr.left)} - {to_source(expr.right)})"
    if isinstance(expr, Mul):
        return f"({to_source(expr.left)} * {to_source(expr.right)})"
    if isinstance(expr, Div):
        return f"({to_source(expr.left)} / {to_source(expr.right)})"
    if isinstance(expr, Pow):
        return f"({to_source(expr.base)}^{to_source(expr.exponent)})"
    if isinstance(expr, Call):
        return f"{expr.func}({to_source(expr.arg)})"
    raise TypeError(f"not an expression node: {expr!r}")


def variables(expr: Expression) -> frozenset[int]:
    if isinstance(expr, Num):
        return frozenset()
    if isinstance(expr, Var):
        return frozenset((expr.index,))
    if isinstance(expr, Neg):
        return variables(expr.arg)
    if isinstance(expr, (Add, Sub, Mul, Div)):
        return variables(expr.left) | variables(expr.right)
    if isinstance(expr, Pow):
        return variables(expr.base) | variables(expr.exponent)
    if isinstance(expr, Call):
        return variables(expr.arg)
    raise TypeError(f"not an expression node: {expr!r}")


def arity(expr: Expression) -> int:
    """Number of distinct variables referenced by the tree."""
    return len(variables(expr))


def plain_eval(expr: Expression, point=()) -> float:
    """Plain float evaluation (no jets); raises DomainError off-domain."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.index >= len(point):
            raise VariableRangeError(f"x{expr.index} out of range for point of length {len(point)}")
        return float(point[expr.index])
    if isinstance(expr, Neg):
        return -plain_eval(expr.arg, point)
    if isinstance(expr, Add):
        return plain_eval(expr.left, point) + plain_eval(expr.right, point)
    if isinstance(expr, Sub):
        return plain_eval(expr.left, point) - plain_eval(expr.right, point)
    if isinstance(expr, Mul):
        return plain_eval(expr.left, point) * plain_eval(expr.right, point)
    if isinstance(expr, Div):
        denom = plain_eval(expr.right, point)
        if denom == 0.0:
            raise DomainError("division by zero")
        return plain_eval(expr.left, point) / denom
    if isinstance(expr, Pow):
        base = plain_eval(expr.base, point)
        k = plain_eval(expr.exponent, point)
        if k != round(k) and base <= 0.0:
            raise DomainError(f"{base:g}^{k:g} with non-integer exponent needs a positive base")
        if base == 0.0 and k < 0:
            raise DomainError("zero raised to a negative power")
        return base ** k
    if isinstance(expr, Call):
        u = plain_eval(expr.arg, point)
        if expr.func == "exp":
            return math.exp(u)
        if expr.func == "log":
            if u <= 0.0:
                raise DomainError(f"log of non-positive value {u:g}")
            return math.log(u)
        if expr.func == "sqrt":
            if u <= 0.0:
                raise DomainError(f"sqrt of non-positive value {u:g}")
            return math.sqrt(u)
        if expr.func == "sin":
            return math.sin(u)
        if expr.func == "cos":
            return math.cos(u)
    raise TypeError(f"not an expression node: {expr!r}")


def constant_value(expr: Expression) -> float | None:
    """Value of a variable-free subtree, or None if it references coordinates."""
    if variables(expr):
        return None
    return plain_eval(expr, ())


# ---------------------------------------------------------------------------
# Smart constructors (used by symbolic differentiation & matrix algebra)
# ---------------------------------------------------------------------------

def const(v: float) -> Expression:
    """Numeric literal; negative values are wrapped as Neg so literals stay non-negative."""
    v = float(v)
    if v < 0:
        return Neg(Num(-v))
    return Num(v)


def _is_zero(e: Expression) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e: Expression) -> bool:
    return isinstance(e, Num) and e.value == 1.0


def neg(a: Expression) -> Expression:
    if _is_zero(a):
        return ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expression, b: Expression) -> Expression:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return const(a.value + b.value)
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return const(a.value - b.value)
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return const(a.value * b.value)
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is_zero(a):
        return ZERO
    if _is_one(b):
        return a
    return Div(a, b)


def powi(a: Expression, k: int) -> Expression:
    if k == 0:
        return ONE
    if k == 1:
        return a
    return Pow(a, const(k))


def call(func: str, arg: Expression) -> Expression:
    if func not in UNARY_FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function {func!r}")
    return Call(func, arg)


def sum_of(terms) -> Expression:
    total: Expression = ZERO
    for t in terms:
        total = add(total, t)
    return total


# ---------------------------------------------------------------------------
# Symbolic differentiation & substitution
# ---------------------------------------------------------------------------

def diff(expr: Expression, index: int) -> Expression:
    """Partial derivative with respect to coordinate ``index``."""
    if isinstance(expr, Num):
        return ZERO
    if isinstance(expr, Var):
        return ONE if expr.index == index else ZERO
    if isinstance(expr, Neg):
        return neg(diff(expr.arg, index))
    if isinstance(expr, Add):
        return add(diff(expr.left, index), diff(expr.right, index))
    if isinstance(expr, Sub):
        return sub(diff(expr.left, index), diff(expr.right, index))
    if isinstance(expr, Mul):
        return add(
            mul(diff(expr.left, index), expr.right),
            mul(expr.left, diff(expr.right, index)),
        )
    if isinstance(expr, Div):
        num = sub(
            mul(diff(expr.left, index), expr.right),
            mul(expr.left, diff(expr.right, index)),
        )
        return div(num, mul(expr.right, expr.right))
    if isinstance(expr, Pow):
        base, exponent = expr.base, expr.exponent
        k = constant_value(exponent)
        db = diff(base, index)
        if k is not None:
            if k == 0:
                return ZERO
            # d(b^k) = k * b^(k-1) * b'
            return mul(mul(const(k), _pow_const(base, k - 1)), db)
        # general exponent: b^e = exp(e log b)
        de = diff(exponent, index)
        term = add(mul(de, call("log", base)), mul(exponent, div(db, base)))
        return mul(expr, term)
    if isinstance(expr, Call):
        u = expr.arg
        du = diff(u, index)
        if expr.func == "exp":
            return mul(expr, du)
        if expr.func == "log":
            return div(du, u)
        if expr.func == "sqrt":
            return div(du, mul(const(2.0), expr))
        if expr.func == "sin":
            return mul(call("cos", u), du)
        if expr.func == "cos":
            return neg(mul(call("sin", u), du))
    raise TypeError(f"not an expression node: {expr!r}")


def _pow_const(base: Expression, k: float) -> Expression:
    if k == 0:
        return ONE
    if k == 1:
        return base
    return Pow(base, const(k))


def substitute(expr: Expression, mapping: dict[int, Expression]) -> Expression:
    """Replace Var(i) by mapping[i] wherever the index is mapped."""
    if isinstance(expr, Num):
        return expr
    if isinstance(expr, Var):
        return mapping.get(expr.index, expr)
    if isinstance(expr, Neg):
        return neg(substitute(expr.arg, mapping))
    if isinstance(expr, Add):
        return add(substitute(expr.left, mapping), substitute(expr.right, mapping))
    if isinstance(expr, Sub):
        return sub(substitute(expr.left, mapping), substitute(expr.right, mapping))
    if isinstance(expr, Mul):
        return mul(substitute(expr.left, mapping), substitute(expr.right, mapping))
    if isinstance(expr, Div):
        return div(substitute(expr.left, mapping), substitute(expr.right, mapping))
    if isinstance(expr, Pow):
        return Pow(substitute(expr.base, mapping), substitute(expr.exponent, mapping))
    if isinstance(expr, Call):
        return Call(expr.func, substitute(expr.arg, mapping))
    raise TypeError(f"not an expression node: {expr!r}")
