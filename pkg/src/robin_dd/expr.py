"""Tiny expression language for source terms f(x, y).

Supports numbers, the variables ``x`` and ``y``, ``pi``, ``+ - * /``,
powers ``^`` or ``**`` (right associative), parentheses, absolute value
bars ``|...|`` and the functions abs, sqrt, exp, log, sin, cos, sign.
Compiled expressions are vectorized over arrays of points ``(..., d)``.
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(\*\*|[-+*/^()|,])|([A-Za-z_]\w*))")
FUNCS = {"abs": np.abs, "sqrt": np.sqrt, "exp": np.exp, "log": np.log,
         "sin": np.sin, "cos": np.cos, "sign": np.sign}
CONSTS = {"pi": np.pi}
VARS = ("x", "y")


class ExpressionError(ValueError):
    pass


def tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:].strip()[:1]!r} in {text!r}")
        num, op, name = m.groups()
        out.append(("num", num) if num else ("op", op) if op else ("name", name))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise ExpressionError(f"expected {value or 'token'} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.i != len(self.toks):
            raise ExpressionError(f"trailing input {self.toks[self.i][1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] in ("-", "+"):
            op = self.take()[1]
            inner = self.unary()
            return ("neg", inner) if op == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("const", float(val))
        if kind == "name":
            if val in VARS:
                return ("var", VARS.index(val))
            if val in CONSTS:
                return ("const", CONSTS[val])
            if val in FUNCS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return ("call", val, arg)
            raise ExpressionError(f"unknown name {val!r}")
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        if val == "|":
            node = self.expr()
            self.take("|")
            return ("call", "abs", node)
        raise ExpressionError(f"unexpected {val!r} in {self.text!r}")


_BINOPS = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


def _compile(node):
    tag = node[0]
    if tag == "const":
        c = node[1]
        return lambda X: np.full(X.shape[:-1], c)
    if tag == "var":
        k = node[1]

        def var(X):
            if X.shape[-1] <= k:
                raise ExpressionError(f"variable {VARS[k]!r} used on a {X.shape[-1]}D domain")
            return X[..., k]
        return var
    if tag == "neg":
        f = _compile(node[1])
        return lambda X: -f(X)
    if tag == "call":
        fn, f = FUNCS[node[1]], _compile(node[2])
        return lambda X: fn(f(X))
    op, a, b = _BINOPS[tag], _compile(node[1]), _compile(node[2])
    return lambda X: op(a(X), b(X))


def parse_expression(text: str):
    """Compile ``text`` into a function of points with shape (..., d)."""
    fn = _compile(_Parser(text).parse())

    def source(X):
        return np.asarray(fn(np.asarray(X, dtype=float)), dtype=float)

    source.expression = text
    return source
