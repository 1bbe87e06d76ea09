"""A small expression language for integrands and maps.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are the variables ``x`` and ``y`` (interchangeable: both denote the
single argument), the constants ``pi`` and ``e``, and the functions listed
in :data:`FUNCTIONS`.  ``cantor`` takes an optional integer stage.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .cantor import DEFAULT_STAGE, cantor_function
from .errors import EvalError, ParseError

VARIABLES = ("x", "y")
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": (1, 1),
    "cos": (1, 1),
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "cantor": (1, 2),
}


# -- AST --------------------------------------------------------------------

Span = tuple  # (start, end) offsets into the source text


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    name: str
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    span: Span = field(default=None, compare=False, repr=False)


Expr = Union[Num, Var, Const, Neg, BinOp, Call]


# -- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    pos: int
    end: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            out.append(_Tok("end", "", n, n))
            return out
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, ("number", "name", "operator"))
        kind = m.lastgroup
        s = m.start(kind)
        tok = m.group(kind)
        if tok == "**":
            tok = "^"
        out.append(_Tok(kind, tok, s, m.end()))
        pos = m.end()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}, expected {' or '.join(expected)}", t.pos, expected)

    def _eat(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return self.toks[self.i - 1]
        self._fail((repr(text),))

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self._fail(("operator", "end of input"))
        return e

    def expr(self):
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            right = self.term()
            left = BinOp(op, left, right, (left.span[0], right.span[1]))
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            right = self.unary()
            left = BinOp(op, left, right, (left.span[0], right.span[1]))
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            start = self.tok.pos
            self.i += 1
            operand = self.unary()
            return Neg(operand, (start, operand.span[1]))
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            exp = self.unary()
            return BinOp("^", base, exp, (base.span[0], exp.span[1]))
        return base

    _ATOM = ("number", "name", "'('", "'-'")

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text), (t.pos, t.end))
        if t.kind == "name":
            self.i += 1
            name = t.text
            if self.tok.kind == "op" and self.tok.text == "(":
                if name not in FUNCTIONS:
                    raise ParseError(f"unknown function {name!r}", t.pos, tuple(sorted(FUNCTIONS)))
                self.i += 1
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.i += 1
                    args.append(self.expr())
                close = self._eat(")")
                lo, hi = FUNCTIONS[name]
                if not lo <= len(args) <= hi:
                    raise ParseError(f"{name} takes {lo}..{hi} arguments, got {len(args)}", t.pos, ())
                if name == "cantor" and len(args) == 2:
                    n = args[1]
                    if not (isinstance(n, Num) and n.value == int(n.value) and n.value >= 0):
                        raise ParseError("cantor stage must be a non-negative integer literal", n.span[0], ("integer",))
                return Call(name, tuple(args), (t.pos, close.end))
            if name in VARIABLES:
                return Var(name, (t.pos, t.end))
            if name in CONSTANTS:
                return Const(name, (t.pos, t.end))
            raise ParseError(
                f"unknown identifier {name!r}", t.pos, VARIABLES + tuple(CONSTANTS) + tuple(FUNCTIONS)
            )
        if t.kind == "op" and t.text == "(":
            self.i += 1
            e = self.expr()
            self._eat(")")
            return e
        self._fail(self._ATOM)


def parse(text: str) -> Expr:
    """Parse ``text`` into an AST; raises :class:`ParseError` with an offset."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return _Parser(text).parse()


# -- printer ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return 5


def to_text(e: Expr) -> str:
    """Render with the fewest parentheses that parse back to the same tree."""
    if isinstance(e, Num):
        if not (math.isfinite(e.value) and e.value >= 0):
            raise ValueError(f"literal {e.value!r} has no source form")
        v = float(e.value)
        return str(int(v)) if v.is_integer() and v < 2.0**53 else repr(v)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        return "-" + (f"({inner})" if _prec(e.operand) < 3 else inner)
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        lt, rt = to_text(e.left), to_text(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                lt = f"({lt})"
            if _prec(e.right) < 3:
                rt = f"({rt})"
            return f"{lt}^{rt}"
        if _prec(e.left) < p:
            lt = f"({lt})"
        if _prec(e.right) <= p:
            rt = f"({rt})"
        return f"{lt} {e.op} {rt}"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation -------------------------------------------------------------


def _scalar_call(name, args):
    a = args[0]
    if name == "sin":
        return math.sin(a)
    if name == "cos":
        return math.cos(a)
    if name == "exp":
        return math.exp(a)
    if name == "log":
        return math.log(a)
    if name == "sqrt":
        return math.sqrt(a)
    if name == "abs":
        return abs(a)
    if name == "cantor":
        stage = int(args[1]) if len(args) > 1 else DEFAULT_STAGE
        if not 0 <= a <= 1:
            raise ValueError("cantor is defined on [0, 1]")
        return cantor_function(a, stage)
    raise EvalError(f"unknown function {name}")


def _eval(e, x):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, Call):
        return _scalar_call(e.func, [_eval(a, x) for a in e.args])
    a, b = _eval(e.left, x), _eval(e.right, x)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    return math.pow(a, b)


def evaluate(e: Expr | str, x: float) -> float:
    """Scalar value at ``x``; domain violations raise :class:`EvalError`."""
    if isinstance(e, str):
        e = parse(e)
    try:
        v = _eval(e, float(x))
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvalError(f"cannot evaluate {to_text(e)} at x={x!r}: {exc}") from exc
    if not math.isfinite(v):
        raise EvalError(f"{to_text(e)} is not finite at x={x!r}")
    return v


_NP_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


def _build(e) -> Callable:
    if isinstance(e, Num):
        v = e.value
        return lambda x: v
    if isinstance(e, Var):
        return lambda x: x
    if isinstance(e, Const):
        v = CONSTANTS[e.name]
        return lambda x: v
    if isinstance(e, Neg):
        f = _build(e.operand)
        return lambda x: -f(x)
    if isinstance(e, Call):
        f = _build(e.args[0])
        if e.func == "cantor":
            stage = int(e.args[1].value) if len(e.args) > 1 else DEFAULT_STAGE

            def cantor_of(x):
                t = np.asarray(f(x), dtype=np.float64)
                return np.where((t >= 0) & (t <= 1), cantor_function(t, stage), np.nan)

            return cantor_of
        g = _NP_FUNCS[e.func]
        return lambda x: g(f(x))
    a, b = _build(e.left), _build(e.right)
    if e.op == "^" and isinstance(e.right, Num) and e.right.value == int(e.right.value):
        k = int(e.right.value)
        return lambda x: a(x) ** k if k >= 0 else 1.0 / a(x) ** -k
    op = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}[e.op]
    return lambda x: op(a(x), b(x))


def compile_expr(e: Expr | str) -> Callable:
    """Vectorised numpy function of one array argument.

    Domain violations produce NaN or infinity rather than raising, so the
    integrator can report them with the offending points.
    """
    if isinstance(e, str):
        e = parse(e)
    f = _build(e)

    def fn(x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(all="ignore"):
            y = np.asarray(f(x), dtype=np.float64)
        return y if y.shape == x.shape else np.broadcast_to(y, x.shape).copy()

    fn.expr = e
    fn.__doc__ = to_text(e)
    return fn


def free_variables(e: Expr) -> set:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        return set().union(*(free_variables(a) for a in e.args))
    return set()


__all__ = [
    "Num",
    "Var",
    "Const",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse",
    "to_text",
    "evaluate",
    "compile_expr",
    "free_variables",
    "FUNCTIONS",
    "CONSTANTS",
    "VARIABLES",
]
