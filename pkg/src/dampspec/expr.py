"""Small arithmetic expression language for coefficient functions.

Expressions are parsed once into a tree of closures and then evaluated
vectorised over grid coordinates.  The grammar is documented in
``docs/expressions.md``::

    expr       := comparison
    comparison := additive [ ("<" | "<=" | ">" | ">=" | "==" | "!=") additive ]
    additive   := term { ("+" | "-") term }
    term       := unary { ("*" | "/") unary }
    unary      := ("+" | "-") unary | power
    power      := atom [ "^" unary ]
    atom       := NUMBER | NAME | NAME "(" expr { "," expr } ")" | "(" expr ")"

Names are the coordinates ``x`` and ``y`` plus the constants ``pi`` and ``e``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ExpressionError", "Expression", "parse_expression"]


class ExpressionError(ValueError):
    """Malformed coefficient expression."""


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|[-+*/^(),<>]))"
)

_FUNCS: dict[str, tuple[int, Callable]] = {
    "abs": (1, np.abs),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sqrt": (1, np.sqrt),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tan": (1, np.tan),
    "tanh": (1, np.tanh),
    "cosh": (1, np.cosh),
    "sinh": (1, np.sinh),
    "sign": (1, np.sign),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "if": (3, lambda c, a, b: np.where(c, a, b)),
}

_CONSTS = {"pi": np.pi, "e": np.e}
_VARS = ("x", "y")

_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}

Node = Callable[[dict], np.ndarray]


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            bad = src[pos:].lstrip()[:1]
            raise ExpressionError(f"unexpected character {bad!r} at position {pos} in {src!r}")
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.names: set[str] = set()

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.take()
        if tok.text != text:
            self.fail(tok, f"expected {text!r}")

    def fail(self, tok: _Tok, why: str):
        shown = tok.text if tok.kind != "end" else "end of input"
        raise ExpressionError(f"{why}; got {shown!r} at position {tok.pos} in {self.src!r}")

    def parse(self) -> Node:
        node = self.comparison()
        if self.peek().kind != "end":
            self.fail(self.peek(), "unexpected token")
        return node

    def comparison(self) -> Node:
        left = self.additive()
        if self.peek().text in _COMPARE:
            fn = _COMPARE[self.take().text]
            right = self.additive()
            return lambda env, l=left, r=right: fn(l(env), r(env))
        return left

    def additive(self) -> Node:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            if op == "+":
                node = lambda env, l=node, r=rhs: l(env) + r(env)
            else:
                node = lambda env, l=node, r=rhs: l(env) - r(env)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            if op == "*":
                node = lambda env, l=node, r=rhs: l(env) * r(env)
            else:
                node = lambda env, l=node, r=rhs: l(env) / r(env)
        return node

    def unary(self) -> Node:
        if self.peek().text == "-":
            self.take()
            inner = self.unary()
            return lambda env, f=inner: -f(env)
        if self.peek().text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            # right associative, and -x^2 == -(x^2) via unary above
            expo = self.unary()
            return lambda env, b=base, p=expo: np.power(b(env), p(env))
        return base

    def atom(self) -> Node:
        tok = self.take()
        if tok.kind == "num":
            val = float(tok.text)
            return lambda env, v=val: v
        if tok.text == "(":
            node = self.comparison()
            self.expect(")")
            return node
        if tok.kind == "name":
            if self.peek().text == "(":
                return self.call(tok)
            if tok.text in _CONSTS:
                val = _CONSTS[tok.text]
                return lambda env, v=val: v
            if tok.text in _VARS:
                self.names.add(tok.text)
                return lambda env, n=tok.text: env[n]
            self.fail(tok, "unknown identifier")
        self.fail(tok, "unexpected token")

    def call(self, name: _Tok) -> Node:
        if name.text not in _FUNCS:
            self.fail(name, "unknown function")
        arity, fn = _FUNCS[name.text]
        self.expect("(")
        args = [self.comparison()]
        while self.peek().text == ",":
            self.take()
            args.append(self.comparison())
        self.expect(")")
        if len(args) != arity:
            raise ExpressionError(
                f"{name.text}() takes {arity} argument(s), got {len(args)} "
                f"at position {name.pos} in {self.src!r}"
            )
        return lambda env, f=fn, a=tuple(args): f(*(g(env) for g in a))


@dataclass(frozen=True)
class Expression:
    """A parsed coefficient expression in the coordinates ``x`` (and ``y``)."""

    source: str
    _node: Node
    variables: frozenset

    def __call__(self, x, y=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if y is None and "y" in self.variables:
            raise ExpressionError(f"expression {self.source!r} uses 'y' but the grid is one-dimensional")
        env = {"x": x, "y": np.zeros_like(x) if y is None else np.asarray(y, dtype=float)}
        with np.errstate(all="ignore"):
            out = self._node(env)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()


def parse_expression(source) -> Expression:
    """Parse ``source`` (a string or a number) into an :class:`Expression`."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        source = repr(float(source))
    if not isinstance(source, str) or not source.strip():
        raise ExpressionError(f"empty or non-string expression: {source!r}")
    parser = _Parser(source)
    node = parser.parse()
    return Expression(source, node, frozenset(parser.names))
