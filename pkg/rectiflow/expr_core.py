"""Arithmetic expressions over ``t, x1..xn``.

Vector fields, wreath elements and space-time maps are all written in this small language::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := atom ("^" factor)?
    atom   := number | "t" | "x" digits | func "(" expr ")" | "(" expr ")" | "-" atom
            | "pi" | "e"
    func   := sin | cos | tan | exp | log | sqrt | abs | tanh | sign

Unary minus binds tighter than ``^`` (``-x1^2`` is ``(-x1)^2``). Trees are immutable and
evaluation is pure, so an :class:`Expression` can be shared freely between threads.

Non-smooth primitives: ``d abs(u) = sign(u) du`` and ``d sign(u) = 0`` with ``sign(0) = 0``.
The derivative of ``sqrt`` at 0 is a pole and evaluates to :class:`EvalError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, Dict, Optional, Sequence, Set, Union

from .errors import DimensionError, EvalError, ExpressionSyntaxError

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "sign")
CONSTANTS: Dict[str, float] = {"pi": math.pi, "e": math.e}
TIME = "t"

# -- AST ------------------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class Space:
    index: int  # 0-based: x1 is Space(0)


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Number, Constant, Time, Space, Neg, BinOp, Call]
Variable = Union[str, int]  # "t" or a 0-based spatial index


@dataclass(frozen=True)
class EvalPoint:
    """A point (t, x) of I x M."""

    t: float
    x: tuple

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with the spatial dimension it was declared for."""

    node: Node
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise DimensionError(f"dimension must be positive, got {self.dimension}")
        for var in free_variables(self):
            if var != TIME and var >= self.dimension:
                raise DimensionError(
                    f"x{var + 1} referenced but dimension is {self.dimension}"
                )

    def __str__(self) -> str:
        return to_text(self)

    def __call__(self, t: float, x: Sequence[float]) -> float:
        return evaluate(self, EvalPoint(t, x))

    def depends_on(self, variable: Variable) -> bool:
        return _resolve_variable(variable, self.dimension) in free_variables(self)


# -- parsing --------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_SPACE_NAME_RE = re.compile(r"x(\d+)")


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        if m.lastgroup != "space":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    """Recursive-descent parser, one method per grammar rule."""

    def __init__(self, source: str, dimension: int):
        self.source = source
        self.dimension = dimension
        self.tokens = _tokenize(source)
        self.i = 0

    def _peek(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _error(self, message: str, tok: Optional[_Token] = None) -> ExpressionSyntaxError:
        tok = tok or self._peek()
        return ExpressionSyntaxError(message, tok.pos, self.source)

    def _expect(self, text: str) -> None:
        tok = self._peek()
        if tok.kind != "op" or tok.text != text:
            found = tok.text or "end of input"
            raise self._error(f"expected {text!r}, found {found!r}")
        self._advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self._peek()
        if tok.kind != "end":
            raise self._error(f"unexpected {tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._peek().kind == "op" and self._peek().text in "+-":
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._peek().kind == "op" and self._peek().text in "*/":
            op = self._advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.atom()
        if self._peek().kind == "op" and self._peek().text == "^":
            self._advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        tok = self._peek()
        if tok.kind == "number":
            self._advance()
            return Number(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        if tok.kind == "op" and tok.text == "-":
            self._advance()
            return Neg(self.atom())
        if tok.kind == "name":
            return self._name(self._advance())
        found = tok.text or "end of input"
        raise self._error(f"expected a number, variable, function or '(' but found {found!r}")

    def _name(self, tok: _Token) -> Node:
        name = tok.text
        if name == TIME:
            return Time()
        m = _SPACE_NAME_RE.fullmatch(name)
        if m:
            index = int(m.group(1))
            if index < 1 or index > self.dimension:
                raise DimensionError(
                    f"{name} at position {tok.pos} is out of range for dimension {self.dimension}"
                )
            return Space(index - 1)
        if name in CONSTANTS:
            return Constant(name)
        if name in FUNCTIONS:
            self._expect("(")
            arg = self.expr()
            self._expect(")")
            return Call(name, arg)
        raise self._error(f"unknown name {name!r}", tok)


def parse(source: str, dimension: int) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``t, x1..x<dimension>``."""
    if dimension < 1:
        raise DimensionError(f"dimension must be positive, got {dimension}")
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0, source)
    return Expression(_Parser(source, dimension).parse(), dimension)


# -- printing -------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}
_ATOMIC = 4


def _precedence(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    return _ATOMIC


def _format_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


@singledispatch
def _text(node) -> str:
    raise TypeError(f"not an expression node: {node!r}")


@_text.register
def _(node: Number) -> str:
    return _format_number(node.value)


@_text.register
def _(node: Constant) -> str:
    return node.name


@_text.register
def _(node: Time) -> str:
    return TIME


@_text.register
def _(node: Space) -> str:
    return f"x{node.index + 1}"


@_text.register
def _(node: Neg) -> str:
    inner = _text(node.operand)
    if _precedence(node.operand) < _ATOMIC:
        inner = f"({inner})"
    return f"-{inner}"


@_text.register
def _(node: BinOp) -> str:
    left, right = _text(node.left), _text(node.right)
    prec = _PRECEDENCE[node.op]
    if node.op == "^":
        if _precedence(node.left) < _ATOMIC:
            left = f"({left})"
        if _precedence(node.right) < prec:
            right = f"({right})"
        return f"{left}^{right}"
    if _precedence(node.left) < prec:
        left = f"({left})"
    if _precedence(node.right) <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


@_text.register
def _(node: Call) -> str:
    return f"{node.func}({_text(node.arg)})"


def to_text(e: Union[Expression, Node]) -> str:
    """Render in the input grammar; ``parse(to_text(e))`` rebuilds the same tree."""
    return _text(e.node if isinstance(e, Expression) else e)


# -- evaluation -----------------------------------------------------------------


def _sign(v: float) -> float:
    return 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)


_FUNCTION_IMPLS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
    "tanh": math.tanh,
    "sign": _sign,
}

_BINARY_IMPLS: Dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": math.pow,
}

# math raises these for poles, domain violations and overflow
_DOMAIN_ERRORS = (ValueError, ZeroDivisionError, OverflowError)


@singledispatch
def _compile(node) -> Callable[[float, Sequence[float]], float]:
    raise TypeError(f"not an expression node: {node!r}")


@_compile.register
def _(node: Number):
    value = node.value
    return lambda t, x: value


@_compile.register
def _(node: Constant):
    value = CONSTANTS[node.name]
    return lambda t, x: value


@_compile.register
def _(node: Time):
    return lambda t, x: t


@_compile.register
def _(node: Space):
    index = node.index
    return lambda t, x: x[index]


@_compile.register
def _(node: Neg):
    inner = _compile(node.operand)
    return lambda t, x: -inner(t, x)


@_compile.register
def _(node: BinOp):
    left, right = _compile(node.left), _compile(node.right)
    impl = _BINARY_IMPLS[node.op]
    return lambda t, x: impl(left(t, x), right(t, x))


@_compile.register
def _(node: Call):
    inner = _compile(node.arg)
    impl = _FUNCTION_IMPLS[node.func]
    return lambda t, x: impl(inner(t, x))


def compile_expression(e: Expression) -> Callable[[float, Sequence[float]], float]:
    """Closure ``(t, x) -> float`` raising :class:`EvalError` on domain violations."""
    raw = _compile(e.node)
    text = to_text(e)

    def evaluate_compiled(t: float, x: Sequence[float]) -> float:
        try:
            value = raw(t, x)
        except _DOMAIN_ERRORS as exc:
            raise EvalError(f"{text} undefined at t={t!r}, x={list(x)!r}: {exc}") from None
        if not math.isfinite(value):
            raise EvalError(f"{text} is not finite at t={t!r}, x={list(x)!r}")
        return value

    return evaluate_compiled


def evaluate(e: Expression, p: EvalPoint) -> float:
    if len(p.x) != e.dimension:
        raise DimensionError(
            f"point has {len(p.x)} space coordinates, expression has dimension {e.dimension}"
        )
    return compile_expression(e)(p.t, p.x)


# -- structure ------------------------------------------------------------------


@singledispatch
def _variables(node) -> Set[Variable]:
    raise TypeError(f"not an expression node: {node!r}")


@_variables.register(Number)
@_variables.register(Constant)
def _(node) -> Set[Variable]:
    return set()


@_variables.register
def _(node: Time) -> Set[Variable]:
    return {TIME}


@_variables.register
def _(node: Space) -> Set[Variable]:
    return {node.index}


@_variables.register
def _(node: Neg) -> Set[Variable]:
    return _variables(node.operand)


@_variables.register
def _(node: BinOp) -> Set[Variable]:
    return _variables(node.left) | _variables(node.right)


@_variables.register
def _(node: Call) -> Set[Variable]:
    return _variables(node.arg)


def free_variables(e: Expression) -> Set[Variable]:
    """Variables referenced by ``e``: ``"t"`` and/or 0-based spatial indices."""
    return _variables(e.node)


def _resolve_variable(variable: Variable, dimension: int) -> Variable:
    if variable == TIME:
        return TIME
    if isinstance(variable, str):
        m = _SPACE_NAME_RE.fullmatch(variable)
        if not m:
            raise DimensionError(f"unknown variable {variable!r}")
        variable = int(m.group(1)) - 1
    if not 0 <= variable < dimension:
        raise DimensionError(f"variable index {variable} out of range for dimension {dimension}")
    return variable


# -- folding constructors ---------------------------------------------------------


def _literal(node: Node) -> Optional[float]:
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Number):
        return -node.operand.value
    return None


def _number(value: float) -> Node:
    # literals stay non-negative so printed trees re-parse to the same structure
    if value < 0:
        return Neg(Number(-value))
    return Number(value + 0.0)


def _fold(impl: Callable, *args: float) -> Optional[Node]:
    try:
        value = impl(*args)
    except _DOMAIN_ERRORS:
        return None
    if not math.isfinite(value):
        return None
    return _number(value)


def neg(a: Node) -> Node:
    va = _literal(a)
    if va is not None:
        return _number(-va)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    va, vb = _literal(a), _literal(b)
    if va is not None and vb is not None:
        return _fold(_BINARY_IMPLS["+"], va, vb) or BinOp("+", a, b)
    if va == 0:
        return b
    if vb == 0:
        return a
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    va, vb = _literal(a), _literal(b)
    if va is not None and vb is not None:
        return _fold(_BINARY_IMPLS["-"], va, vb) or BinOp("-", a, b)
    if vb == 0:
        return a
    if va == 0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Node, b: Node) -> Node:
    va, vb = _literal(a), _literal(b)
    if va is not None and vb is not None:
        return _fold(_BINARY_IMPLS["*"], va, vb) or BinOp("*", a, b)
    if va == 0 or vb == 0:
        return Number(0.0)
    if va == 1:
        return b
    if vb == 1:
        return a
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    va, vb = _literal(a), _literal(b)
    if va is not None and vb is not None:
        return _fold(_BINARY_IMPLS["/"], va, vb) or BinOp("/", a, b)
    if va == 0 and vb is None:
        return Number(0.0)
    if vb == 1:
        return a
    return BinOp("/", a, b)


def power(a: Node, b: Node) -> Node:
    va, vb = _literal(a), _literal(b)
    if va is not None and vb is not None:
        return _fold(_BINARY_IMPLS["^"], va, vb) or BinOp("^", a, b)
    if vb == 0:
        return Number(1.0)
    if vb == 1:
        return a
    return BinOp("^", a, b)


def call(func: str, a: Node) -> Node:
    va = _literal(a)
    if va is not None:
        return _fold(_FUNCTION_IMPLS[func], va) or Call(func, a)
    return Call(func, a)


_BUILDERS = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


@singledispatch
def _folded(node) -> Node:
    return node


@_folded.register
def _(node: Neg) -> Node:
    return neg(_folded(node.operand))


@_folded.register
def _(node: BinOp) -> Node:
    return _BUILDERS[node.op](_folded(node.left), _folded(node.right))


@_folded.register
def _(node: Call) -> Node:
    return call(node.func, _folded(node.arg))


def fold_constants(e: Expression) -> Expression:
    """Fold literal sub-trees and drop additive zeros / multiplicative ones."""
    return Expression(_folded(e.node), e.dimension)


# -- differentiation --------------------------------------------------------------


@singledispatch
def _diff(node, var: Variable) -> Node:
    raise TypeError(f"not an expression node: {node!r}")


@_diff.register(Number)
@_diff.register(Constant)
def _(node, var: Variable) -> Node:
    return Number(0.0)


@_diff.register
def _(node: Time, var: Variable) -> Node:
    return Number(1.0 if var == TIME else 0.0)


@_diff.register
def _(node: Space, var: Variable) -> Node:
    return Number(1.0 if var == node.index else 0.0)


@_diff.register
def _(node: Neg, var: Variable) -> Node:
    return neg(_diff(node.operand, var))


@_diff.register
def _(node: BinOp, var: Variable) -> Node:
    u, v = node.left, node.right
    du, dv = _diff(u, var), _diff(v, var)
    if node.op == "+":
        return add(du, dv)
    if node.op == "-":
        return sub(du, dv)
    if node.op == "*":
        return add(mul(du, v), mul(u, dv))
    if node.op == "/":
        return div(sub(mul(du, v), mul(u, dv)), power(v, Number(2.0)))
    # u ^ v
    if _literal(dv) == 0:
        return mul(mul(v, power(u, sub(v, Number(1.0)))), du)
    if _literal(du) == 0:
        return mul(mul(power(u, v), call("log", u)), dv)
    return mul(power(u, v), add(mul(dv, call("log", u)), div(mul(v, du), u)))


@_diff.register
def _(node: Call, var: Variable) -> Node:
    u = node.arg
    du = _diff(u, var)
    if _literal(du) == 0:
        return Number(0.0)
    f = node.func
    if f == "sin":
        return mul(call("cos", u), du)
    if f == "cos":
        return mul(neg(call("sin", u)), du)
    if f == "tan":
        return div(du, power(call("cos", u), Number(2.0)))
    if f == "exp":
        return mul(call("exp", u), du)
    if f == "log":
        return div(du, u)
    if f == "sqrt":
        return div(du, mul(Number(2.0), call("sqrt", u)))
    if f == "abs":
        return mul(call("sign", u), du)
    if f == "tanh":
        return mul(sub(Number(1.0), power(call("tanh", u), Number(2.0))), du)
    # sign is piecewise constant
    return Number(0.0)


def differentiate(e: Expression, variable: Variable) -> Expression:
    """Exact symbolic partial derivative of ``e`` in ``variable`` ("t", "x2" or index 1)."""
    var = _resolve_variable(variable, e.dimension)
    return Expression(_diff(e.node, var), e.dimension)


# -- substitution -----------------------------------------------------------------


def substitute(
    e: Expression,
    time: Optional[Expression] = None,
    space: Optional[Sequence[Expression]] = None,
) -> Expression:
    """Replace ``t`` by ``time`` and ``x_i`` by ``space[i]``.

    The result's dimension is that of the replacement expressions (or ``e``'s own when none
    are given). Constants are folded afterwards.
    """
    if space is not None and len(space) != e.dimension:
        raise DimensionError(
            f"{len(space)} space replacements given for dimension {e.dimension}"
        )
    replacements = ([time] if time is not None else []) + list(space or [])
    dims = {r.dimension for r in replacements}
    if len(dims) > 1:
        raise DimensionError(f"replacement expressions disagree on dimension: {sorted(dims)}")
    dimension = dims.pop() if dims else e.dimension
    space_nodes = [s.node for s in space] if space is not None else None
    time_node = time.node if time is not None else None

    @singledispatch
    def replace(node) -> Node:
        return node

    @replace.register
    def _(node: Time) -> Node:
        return time_node if time_node is not None else node

    @replace.register
    def _(node: Space) -> Node:
        return space_nodes[node.index] if space_nodes is not None else node

    @replace.register
    def _(node: Neg) -> Node:
        return Neg(replace(node.operand))

    @replace.register
    def _(node: BinOp) -> Node:
        return BinOp(node.op, replace(node.left), replace(node.right))

    @replace.register
    def _(node: Call) -> Node:
        return Call(node.func, replace(node.arg))

    return fold_constants(Expression(replace(e.node), dimension))


def identity_expressions(dimension: int) -> tuple:
    """``(t, x1, ..., xn)`` as expressions."""
    return (Expression(Time(), dimension),) + tuple(
        Expression(Space(i), dimension) for i in range(dimension)
    )
