"""Small arithmetic-expression language for user-supplied objectives.

Grammar (lowest to highest precedence)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" power)?          # right associative
    atom  := NUMBER | xK | exp "(" expr ")" | log "(" expr ")" | "(" expr ")"

Exponents must fold to non-negative integer constants.  Variables are
``x1 .. xn`` (1-based in the source, 0-based in the tree).  The same tree
evaluates on floats and on jets; integer powers use repeated multiplication
on both paths so order-0 jets agree with plain evaluation bit for bit.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

from .autodiff import exp as _exp, log as _log, power as _power

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "VariableIndexError",
    "Const",
    "Var",
    "BinOp",
    "Neg",
    "Pow",
    "Func",
    "ExpressionAst",
    "parse_expression",
    "to_source",
]


class ExpressionError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ExpressionSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class VariableIndexError(ExpressionError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str  # exp | log
    arg: "Node"


Node = Union[Const, Var, BinOp, Neg, Pow, Func]

_FUNCS = {"exp": _exp, "log": _log}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)
_VAR = re.compile(r"x([0-9]+)$")


def _tokenize(src: str):
    pos = 0
    tokens = []
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src: str, dim: int):
        self.src = src
        self.dim = dim
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "num":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            pos = self.peek()[2]
            exponent = self.power()
            return Pow(base, _constant_exponent(exponent, pos))
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            m = _VAR.match(text)
            if m is None:
                raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
            k = int(m.group(1))
            if not 1 <= k <= self.dim:
                raise VariableIndexError(
                    f"variable {text} out of range for dimension {self.dim}", pos
                )
            return Var(k - 1)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", pos)


def _has_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Const):
        return False
    if isinstance(node, BinOp):
        return _has_var(node.left) or _has_var(node.right)
    if isinstance(node, Neg):
        return _has_var(node.operand)
    if isinstance(node, Pow):
        return _has_var(node.base)
    return _has_var(node.arg)


def _constant_exponent(node: Node, pos: int) -> int:
    if _has_var(node):
        raise ExpressionSyntaxError("exponent must be a constant", pos)
    value = _compile(node)(())
    if value < 0 or float(value) != int(value):
        raise ExpressionSyntaxError(
            f"exponent must be a non-negative integer, got {value!r}", pos
        )
    return int(value)


def _compile(node: Node) -> Callable:
    if isinstance(node, Const):
        c = node.value
        return lambda x: c
    if isinstance(node, Var):
        i = node.index
        return lambda x: x[i]
    if isinstance(node, BinOp):
        a, b = _compile(node.left), _compile(node.right)
        if node.op == "+":
            return lambda x: a(x) + b(x)
        if node.op == "-":
            return lambda x: a(x) - b(x)
        if node.op == "*":
            return lambda x: a(x) * b(x)
        return lambda x: a(x) / b(x)
    if isinstance(node, Neg):
        a = _compile(node.operand)
        return lambda x: -a(x)
    if isinstance(node, Pow):
        a, n = _compile(node.base), node.exponent
        return lambda x: _power(a(x), n)
    fn, a = _FUNCS[node.name], _compile(node.arg)
    return lambda x: fn(a(x))


def _max_var(node: Node) -> int:
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return -1
    if isinstance(node, BinOp):
        return max(_max_var(node.left), _max_var(node.right))
    if isinstance(node, Neg):
        return _max_var(node.operand)
    if isinstance(node, Pow):
        return _max_var(node.base)
    return _max_var(node.arg)


class ExpressionAst:
    """Parsed expression; call it on a point (floats or jets)."""

    def __init__(self, root: Node, dim: int):
        if _max_var(root) >= dim:
            raise VariableIndexError(f"expression uses x{_max_var(root) + 1} but dim={dim}")
        self.root = root
        self.dim = dim
        self._fn = _compile(root)

    def __call__(self, x):
        return self._fn(x)

    def __eq__(self, other):
        return isinstance(other, ExpressionAst) and (self.root, self.dim) == (other.root, other.dim)

    def __hash__(self):
        return hash((self.root, self.dim))

    def __repr__(self):
        return f"ExpressionAst({to_source(self.root)!r}, dim={self.dim})"

    def source(self) -> str:
        return to_source(self.root)


def parse_expression(src: str, dim: int) -> ExpressionAst:
    if dim < 1:
        raise ValueError("dim must be at least 1")
    return ExpressionAst(_Parser(src, dim).parse(), dim)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Const) and node.value < 0:
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _wrap(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def to_source(node: Node) -> str:
    """Render a tree back to source that re-parses to an equivalent tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = _wrap(to_source(node.left), _prec(node.left) < p)
        rp = _prec(node.right)
        right = _wrap(to_source(node.right), rp <= p or rp == 3)
        return f"{left}{node.op}{right}"
    if isinstance(node, Neg):
        return "-" + _wrap(to_source(node.operand), _prec(node.operand) < 4)
    if isinstance(node, Pow):
        return _wrap(to_source(node.base), _prec(node.base) < 5) + f"^{node.exponent}"
    return f"{node.name}({to_source(node.arg)})"
