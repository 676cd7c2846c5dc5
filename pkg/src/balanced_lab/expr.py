"""Profile expression language and second-order forward-mode differentiation.

Grammar (whitespace is ignored, there is no implicit multiplication)::

    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | power
    power    := atom ("^" exponent)?
    exponent := "-" exponent | power
    atom     := NUMBER | "x" | FUNC "(" expr ")" | "(" expr ")"
    FUNC     := "exp" | "log" | "sqrt"

``^`` binds tighter than unary minus (``-x^2`` is ``-(x^2)``) and is right
associative. A real exponent needs a positive base; an exponent that is an
integer literal (optionally negated) accepts any base.

Jets are degree-2 truncated Taylor polynomials ``(f, f', f'')``. They work on
Python floats and on numpy arrays alike, so a profile built from an
expression can be evaluated on a whole quadrature panel at once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import (
    ExpressionDomainError,
    ExpressionOverflowError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
)

Number = Union[float, np.ndarray]

FUNCTIONS = ("exp", "log", "sqrt")
VARIABLE = "x"


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class ProfileExpression:
    """A parsed profile expression; equality is structural on the AST."""

    ast: Node
    text: str = field(compare=False)

    def __str__(self) -> str:
        return self.text


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            pos = len(text)
            break
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.lastgroup is None:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            bad = pos + stripped
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", _byte_offset(text, bad))
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _byte_offset(text, start)))
        pos = match.end()
    tokens.append(_Token("end", "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _at_op(self, *ops: str) -> bool:
        return self.current.kind == "op" and self.current.text in ops

    def _unexpected(self) -> ExpressionSyntaxError:
        token = self.current
        if token.kind == "end":
            return ExpressionSyntaxError("unexpected end of input", token.offset)
        return ExpressionSyntaxError(f"unexpected {token.text!r}", token.offset)

    def _expect(self, op: str) -> None:
        if not self._at_op(op):
            raise self._unexpected()
        self._advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "end":
            raise self._unexpected()
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._at_op("+", "-"):
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self._at_op("*", "/"):
            op = self._advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self._at_op("-"):
            self._advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self._at_op("^"):
            self._advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> Node:
        if self._at_op("-"):
            self._advance()
            return Neg(self.exponent())
        return self.power()

    def atom(self) -> Node:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(float(token.text))
        if token.kind == "ident":
            self._advance()
            if token.text == VARIABLE:
                return Var()
            if token.text in FUNCTIONS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(token.text, arg)
            raise UnknownIdentifierError(f"unknown identifier {token.text!r}", token.offset)
        if self._at_op("("):
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        raise self._unexpected()


def parse(text: str) -> ProfileExpression:
    """Parse ``text`` into a :class:`ProfileExpression`."""
    return ProfileExpression(_Parser(text).parse(), text)


def unparse(node: Union[Node, ProfileExpression]) -> str:
    """Render an AST back to text; ``parse(unparse(e))`` has the same AST."""
    if isinstance(node, ProfileExpression):
        node = node.ast
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return VARIABLE
    if isinstance(node, Neg):
        return f"(-{unparse(node.operand)})"
    if isinstance(node, BinOp):
        return f"({unparse(node.left)} {node.op} {unparse(node.right)})"
    if isinstance(node, Pow):
        return f"({unparse(node.base)}^{unparse(node.exponent)})"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor polynomial (value, first, second derivative)."""

    v: Number
    d1: Number
    d2: Number

    @staticmethod
    def constant(c: Number) -> "Jet":
        return Jet(c, 0.0 * c, 0.0 * c)

    @staticmethod
    def variable(x: Number) -> "Jet":
        return Jet(x, np.ones_like(x), np.zeros_like(x))

    def compose(self, phi0: Number, phi1: Number, phi2: Number) -> "Jet":
        """Chain rule for phi(self) given phi and its derivatives at self.v."""
        return Jet(phi0, phi1 * self.d1, phi2 * self.d1 * self.d1 + phi1 * self.d2)

    def __add__(self, other: "Jet") -> "Jet":
        return Jet(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2)

    def __sub__(self, other: "Jet") -> "Jet":
        return Jet(self.v - other.v, self.d1 - other.d1, self.d2 - other.d2)

    def __neg__(self) -> "Jet":
        return Jet(-self.v, -self.d1, -self.d2)

    def __mul__(self, other: "Jet") -> "Jet":
        return Jet(
            self.v * other.v,
            self.d1 * other.v + self.v * other.d1,
            self.d2 * other.v + 2.0 * self.d1 * other.d1 + self.v * other.d2,
        )

    def __truediv__(self, other: "Jet") -> "Jet":
        if np.any(other.v == 0):
            raise ExpressionDomainError("division by zero")
        q = self.v / other.v
        q1 = (self.d1 - q * other.d1) / other.v
        q2 = (self.d2 - 2.0 * q1 * other.d1 - q * other.d2) / other.v
        return Jet(q, q1, q2)


def jet_exp(u: Jet) -> Jet:
    e = np.exp(u.v)
    return u.compose(e, e, e)


def jet_log(u: Jet) -> Jet:
    if np.any(u.v <= 0):
        raise ExpressionDomainError("log of a non-positive value")
    return u.compose(np.log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v))


def jet_sqrt(u: Jet) -> Jet:
    if np.any(u.v <= 0):
        raise ExpressionDomainError("sqrt of a non-positive value")
    r = np.sqrt(u.v)
    return u.compose(r, 0.5 / r, -0.25 / (r * u.v))


def jet_pow_const(u: Jet, a: float, integer: bool) -> Jet:
    """``u ** a`` for a constant exponent."""
    if not integer and np.any(u.v <= 0):
        raise ExpressionDomainError(f"real power {a!r} of a non-positive base")
    if integer and a < 0 and np.any(u.v == 0):
        raise ExpressionDomainError(f"negative power {a!r} of zero")
    phi0 = np.power(u.v, a)
    phi1 = a * np.power(u.v, a - 1.0) if a != 0 else 0.0 * u.v
    phi2 = a * (a - 1.0) * np.power(u.v, a - 2.0) if a not in (0.0, 1.0) else 0.0 * u.v
    return u.compose(phi0, phi1, phi2)


def jet_pow(u: Jet, b: Jet) -> Jet:
    """``u ** b`` for a variable exponent, via exp(b log u)."""
    if np.any(u.v <= 0):
        raise ExpressionDomainError("variable power of a non-positive base")
    return jet_exp(b * jet_log(u))


_CALLS = {"exp": jet_exp, "log": jet_log, "sqrt": jet_sqrt}


def _integer_exponent(node: Node) -> Optional[float]:
    if isinstance(node, Const) and float(node.value).is_integer():
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Const) and float(node.operand.value).is_integer():
        return -node.operand.value
    return None


def _constant_exponent(node: Node) -> Optional[float]:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Const):
        return -node.operand.value
    return None


def _eval(node: Node, x: Jet) -> Jet:
    if isinstance(node, Const):
        return Jet.constant(node.value + 0.0 * x.v)
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, BinOp):
        left = _eval(node.left, x)
        right = _eval(node.right, x)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    if isinstance(node, Pow):
        base = _eval(node.base, x)
        k = _integer_exponent(node.exponent)
        if k is not None:
            return jet_pow_const(base, k, integer=True)
        a = _constant_exponent(node.exponent)
        if a is not None:
            return jet_pow_const(base, a, integer=False)
        return jet_pow(base, _eval(node.exponent, x))
    if isinstance(node, Call):
        return _CALLS[node.func](_eval(node.arg, x))
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet2(e: ProfileExpression, x: Number) -> Tuple[Number, Number, Number]:
    """Evaluate (value, first derivative, second derivative) of ``e`` at ``x``.

    Scalars give floats, arrays give arrays of the same shape.
    """
    scalar = np.ndim(x) == 0
    seed = Jet.variable(np.asarray(x, dtype=float))
    try:
        with np.errstate(over="raise", divide="raise", invalid="raise"):
            jet = _eval(e.ast, seed)
    except FloatingPointError as exc:
        if "overflow" in str(exc):
            raise ExpressionOverflowError(f"overflow evaluating {e.text!r}") from exc
        raise ExpressionDomainError(f"{exc} evaluating {e.text!r}") from exc
    parts = tuple(np.broadcast_to(np.asarray(p, dtype=float), np.shape(seed.v)) for p in (jet.v, jet.d1, jet.d2))
    if not all(np.all(np.isfinite(p)) for p in parts):
        raise ExpressionOverflowError(f"non-finite jet evaluating {e.text!r}")
    if scalar:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    return tuple(np.array(p) for p in parts)  # type: ignore[return-value]


def evaluate(e: ProfileExpression, x: Number) -> Number:
    """Value of ``e`` at ``x``."""
    return eval_jet2(e, x)[0]
