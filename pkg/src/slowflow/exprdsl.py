"""Tiny expression language for defining periodic vector fields from text.

Grammar (standard precedence, ^ right-associative and binding tighter than
unary minus)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' factor)? | '-' factor
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Recognized functions: ``sin cos abs sqrt sign``.  Free names must be ``t``,
``eps``, ``x1..xk`` or a declared parameter; there are no conditionals or
loops, so every expression is a pure, Lipschitz-friendly formula.  ``abs`` and
``sign`` are exact at 0 (``abs(0) = 0``, ``sign(0) = 0``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DivisionByZero,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifier,
)
from .odeint import PeriodicField

__all__ = [
    "Expr", "Const", "Var", "Param", "Unary", "Binary",
    "FUNCTIONS", "parse", "pretty", "eval_expr", "free_names",
    "FieldSpec", "field_from_spec",
]

FUNCTIONS = ("sin", "cos", "abs", "sqrt", "sign")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str              # 'neg' or a function name
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str              # '+', '-', '*', '/', '^'
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Param, Unary, Binary]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            tail = source[pos:].lstrip()
            if not tail:
                break
            raise ExprSyntaxError(pos, {"number", "identifier", "operator"},
                                  tail[0])
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, params: Sequence[str] = ()):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.params = frozenset(params)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.peek()
        if text != value:
            raise ExprSyntaxError(pos, {repr(value)}, text)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(pos, {"operator", "end of input"}, text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            e = Binary(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.advance()
            return Unary("neg", self.factor())
        e = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            e = Binary("^", e, self.factor())   # right-associative
        return e

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "ident":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text in self.params:
                return Param(text)
            return Var(text)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(pos, {"number", "identifier", "'('", "'-'"}, text)


def parse(source: str, params: Sequence[str] = ()) -> Expr:
    """Parse `source` into an expression tree.

    Names listed in `params` become late-bound parameters; everything else
    stays a variable reference resolved at evaluation time.
    """
    return _Parser(source, params).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def pretty(e: Expr) -> str:
    """Render with the fewest parentheses that reparse to the same tree."""
    return _pretty(e, 0)


def _pretty(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            s = f"-{_pretty(e.arg, _PREC['neg'])}"
            return f"({s})" if parent_prec > _PREC["neg"] else s
        return f"{e.op}({_pretty(e.arg, 0)})"
    prec = _PREC[e.op]
    # left-assoc ops need parens on an equal-precedence right child;
    # '^' is the mirror case
    if e.op == "^":
        left = _pretty(e.left, prec + 1)
        right = _pretty(e.right, prec)
    else:
        left = _pretty(e.left, prec)
        right = _pretty(e.right, prec + 1)
    s = f"{left} {e.op} {right}"
    return f"({s})" if parent_prec > prec else s


def free_names(e: Expr) -> set:
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Var, Param)):
        return {e.name}
    if isinstance(e, Unary):
        return free_names(e.arg)
    return free_names(e.left) | free_names(e.right)


def eval_expr(e: Expr, t, x, eps, params: Optional[Dict[str, float]] = None):
    """Evaluate in IEEE doubles; `t` may be an array, `x` a (k,) or (m,k) array.

    Raises DivisionByZero / DomainError with the offending subexpression,
    UnknownIdentifier for unbound names.
    """
    x = np.asarray(x, dtype=float)
    params = params or {}
    with np.errstate(all="ignore"):
        return _eval(e, t, x, eps, params)


def _eval(e, t, x, eps, params):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, (Var, Param)):
        name = e.name
        if name == "t":
            return t
        if name == "eps":
            return eps
        if name in params:
            return params[name]
        if name.startswith("x") and name[1:].isdigit():
            i = int(name[1:])
            if 1 <= i <= x.shape[-1]:
                return x[..., i - 1]
        raise UnknownIdentifier(name)
    if isinstance(e, Unary):
        a = _eval(e.arg, t, x, eps, params)
        if e.op == "neg":
            return -a
        if e.op == "sin":
            return np.sin(a)
        if e.op == "cos":
            return np.cos(a)
        if e.op == "abs":
            return np.abs(a)
        if e.op == "sign":
            return np.sign(a)
        if e.op == "sqrt":
            if np.any(np.asarray(a) < 0):
                raise DomainError(pretty(e), "square root of a negative number")
            return np.sqrt(a)
        raise UnknownIdentifier(e.op)
    l = _eval(e.left, t, x, eps, params)
    r = _eval(e.right, t, x, eps, params)
    if e.op == "+":
        return l + r
    if e.op == "-":
        return l - r
    if e.op == "*":
        return l * r
    if e.op == "/":
        if np.any(np.asarray(r) == 0):
            raise DivisionByZero(pretty(e))
        return l / r
    if e.op == "^":
        out = np.power(l, r)
        if not np.all(np.isfinite(out)):
            raise DomainError(pretty(e), "non-finite power")
        return out
    raise UnknownIdentifier(e.op)


@dataclass(frozen=True)
class FieldSpec:
    """Textual definition of a k-dimensional T-periodic field.

    ``components[i]`` is the expression for component i of g; parameters are
    late-bound reals so sweeps can rebind them without reparsing.
    """

    dim: int
    period: float
    components: tuple
    params: tuple = ()                 # ((name, value), ...) for hashability

    @staticmethod
    def from_strings(dim: int, period: float, components: Sequence[str],
                     params: Optional[Dict[str, float]] = None) -> "FieldSpec":
        params = dict(params or {})
        exprs = tuple(parse(src, params) for src in components)
        return FieldSpec(dim, period, exprs, tuple(sorted(params.items())))


def field_from_spec(spec: FieldSpec) -> PeriodicField:
    """Compile a FieldSpec into an evaluatable PeriodicField.

    Every free name of every component must resolve to t, eps, x1..xk or a
    declared parameter; the component count must match the dimension.
    """
    if len(spec.components) != spec.dim:
        raise DimensionMismatch(
            f"{len(spec.components)} components for dimension {spec.dim}"
        )
    params = dict(spec.params)
    allowed = {"t", "eps", *params, *(f"x{i}" for i in range(1, spec.dim + 1))}
    for comp in spec.components:
        for name in free_names(comp):
            if name not in allowed:
                raise UnknownIdentifier(name)

    comps = spec.components
    k = spec.dim

    def evaluate(t, x, eps):
        x = np.asarray(x, dtype=float)
        vals = [_eval_component(c, t, x, eps, params) for c in comps]
        tarr = np.asarray(t, dtype=float)
        if x.ndim == 1 and tarr.ndim == 0:
            return np.array(vals, dtype=float)
        batch = tarr.shape if tarr.ndim else x.shape[:-1]
        out = np.empty(batch + (k,), dtype=float)
        for j, v in enumerate(vals):
            out[..., j] = v
        return out

    return PeriodicField(dim=k, period=spec.period, evaluate=evaluate,
                         name="dsl")


def _eval_component(c, t, x, eps, params):
    with np.errstate(all="ignore"):
        return _eval(c, t, x, eps, params)
