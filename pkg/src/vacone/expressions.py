"""Arithmetic expressions over one variable, for problem files.

Grammar (variable name is always ``x``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?                # right associative
    atom   := NUMBER | 'x' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Functions: exp, abs, sqrt, min, max (min and max take two or more
arguments).  Parsing produces an AST that evaluates vectorized over
numpy arrays and differentiates symbolically, so problem files can
omit derivative strings for the branches they define.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError

__all__ = ["parse_expr", "Expr"]

_FUNCS = ("exp", "abs", "sqrt", "min", "max")


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base node: ev(x) -> ndarray, diff() -> Expr."""

    def ev(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def diff(self) -> "Expr":  # pragma: no cover - abstract
        raise NotImplementedError

    def fn(self) -> Callable[[np.ndarray], np.ndarray]:
        def call(t):
            t = np.asarray(t, dtype=float)
            out = np.asarray(self.ev(t), dtype=float)
            if out.shape != t.shape:
                out = np.full(t.shape, float(out))
            return out
        return call


@dataclass(frozen=True)
class Const(Expr):
    v: float

    def ev(self, x):
        return np.full(np.shape(x), self.v)

    def diff(self):
        return Const(0.0)


@dataclass(frozen=True)
class Var(Expr):
    def ev(self, x):
        return np.asarray(x, dtype=float)

    def diff(self):
        return Const(1.0)


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    a: Expr
    b: Expr

    def ev(self, x):
        a, b = self.a.ev(x), self.b.ev(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            with np.errstate(divide="ignore", invalid="ignore"):
                return a / b
        with np.errstate(invalid="ignore"):
            return np.power(a, b)

    def diff(self):
        a, b, da, db = self.a, self.b, self.a.diff(), self.b.diff()
        if self.op == "+":
            return Bin("+", da, db)
        if self.op == "-":
            return Bin("-", da, db)
        if self.op == "*":
            return Bin("+", Bin("*", da, b), Bin("*", a, db))
        if self.op == "/":
            num = Bin("-", Bin("*", da, b), Bin("*", a, db))
            return Bin("/", num, Bin("*", b, b))
        if isinstance(b, Const):
            # d/dx f^c = c f^(c-1) f'
            return Bin("*", Bin("*", Const(b.v), Bin("^", a, Const(b.v - 1.0))), da)
        raise InputError("cannot differentiate a variable exponent; "
                         "supply an explicit deriv string")


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr

    def ev(self, x):
        return -self.a.ev(x)

    def diff(self):
        return Neg(self.a.diff())


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]

    def ev(self, x):
        vals = [np.asarray(a.ev(x), dtype=float) for a in self.args]
        if self.name == "exp":
            return np.exp(vals[0])
        if self.name == "abs":
            return np.abs(vals[0])
        if self.name == "sqrt":
            with np.errstate(invalid="ignore"):
                return np.sqrt(vals[0])
        op = np.minimum if self.name == "min" else np.maximum
        out = vals[0]
        for v in vals[1:]:
            out = op(out, v)
        return out

    def diff(self):
        if self.name == "exp":
            return Bin("*", self, self.args[0].diff())
        if self.name == "abs":
            return Bin("*", _Sign(self.args[0]), self.args[0].diff())
        if self.name == "sqrt":
            return Bin("/", self.args[0].diff(), Bin("*", Const(2.0), self))
        # min/max: derivative of the achieving argument, folded pairwise;
        # ties take the later argument, matching the ev() fold order
        node: Expr = self.args[0]
        dnode: Expr = self.args[0].diff()
        for a in self.args[1:]:
            pick_first = _Less(node, a) if self.name == "min" else _Less(a, node)
            dnode = _Select(pick_first, dnode, a.diff())
            node = Call(self.name, (node, a))
        return dnode


@dataclass(frozen=True)
class _Sign(Expr):
    a: Expr

    def ev(self, x):
        return np.sign(self.a.ev(x))

    def diff(self):
        return Const(0.0)


@dataclass(frozen=True)
class _Less(Expr):
    a: Expr
    b: Expr

    def ev(self, x):
        return self.a.ev(x) < self.b.ev(x)

    def diff(self):  # pragma: no cover - boolean node
        raise InputError("cannot differentiate a comparison")


@dataclass(frozen=True)
class _Select(Expr):
    cond: Expr
    a: Expr
    b: Expr

    def ev(self, x):
        return np.where(self.cond.ev(x), self.a.ev(x), self.b.ev(x))

    def diff(self):
        return _Select(self.cond, self.a.diff(), self.b.diff())


# ---------------------------------------------------------------------------
# tokenizer / parser


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _err(msg: str, line: int, col: int) -> InputError:
    return InputError(f"{msg} at line {line}, column {col}")


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < len(src) and src[i + 1].isdigit()):
            j = i
            seen_e = False
            while j < len(src) and (src[j].isdigit() or src[j] == "."
                                    or src[j] in "eE"
                                    or (seen_e and src[j] in "+-" and src[j - 1] in "eE")):
                if src[j] in "eE":
                    seen_e = True
                j += 1
            text = src[i:j]
            try:
                float(text)
            except ValueError:
                raise _err(f"bad number {text!r}", line, col)
            toks.append(_Tok("num", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("name", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^(),":
            toks.append(_Tok(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise _err(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("end", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self, kind: str | None = None) -> _Tok:
        t = self.toks[self.pos]
        if kind is not None and t.kind != kind:
            want = "end of input" if kind == "end" else repr(kind)
            raise _err(f"expected {want}, found {t.text or 'end of input'!r}",
                       t.line, t.col)
        self.pos += 1
        return t

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind in "+-":
            op = self.take().kind
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind in "*/":
            op = self.take().kind
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek().kind == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return Const(float(t.text))
        if t.kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if t.kind == "name":
            self.take()
            if t.text == "x":
                return Var()
            if t.text == "pi":
                return Const(math.pi)
            if t.text == "e":
                return Const(math.e)
            if t.text in _FUNCS:
                self.take("(")
                args = [self.expr()]
                while self.peek().kind == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if t.text in ("min", "max") and len(args) < 2:
                    raise _err(f"{t.text} needs at least two arguments", t.line, t.col)
                if t.text in ("exp", "abs", "sqrt") and len(args) != 1:
                    raise _err(f"{t.text} takes exactly one argument", t.line, t.col)
                return Call(t.text, tuple(args))
            raise _err(f"unknown name {t.text!r}", t.line, t.col)
        raise _err(f"expected a value, found {t.text or 'end of input'!r}",
                   t.line, t.col)


def parse_expr(src: str) -> Expr:
    """Parse one expression string; raises InputError with line/column."""
    if not isinstance(src, str) or not src.strip():
        raise InputError("expected a non-empty expression string")
    p = _Parser(_tokenize(src))
    node = p.expr()
    p.take("end")
    return node
