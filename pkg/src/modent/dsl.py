"""A tiny expression language for scalar functions of cone points.

Grammar::

    expr  := term (("+"|"-") term)*
    term  := unary (("*"|"/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := number | const | var | func "(" expr ")" | "(" expr ")"
    var   := ("x"|"y"|"z"|"s") "[" integer "]"

``^`` is right-associative and binds tighter than unary minus, so
``-2^2`` is ``-(2^2)``.  Evaluation is vectorized: every variable is bound
to an array of shape ``(n, k)`` (or a single point) and the result has
shape ``(n,)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import DimensionError, DomainError, as_points

FUNCTIONS = ("ln", "log2", "log10", "exp", "abs")
CONSTANTS = {"e": math.e, "pi": math.pi}
VARIABLES = ("x", "y", "z", "s")
F_VARS = frozenset("xyz")
PSI_VARS = frozenset("s")


class DSLSyntaxError(ValueError):
    def __init__(self, message, source, pos):
        line = source.count("\n", 0, pos) + 1
        col = pos - (source.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.column = col


class DSLNameError(DSLSyntaxError):
    """Unknown identifier or a variable not allowed in this context."""


class DSLDimensionError(DSLSyntaxError, DimensionError):
    """Variable index outside ``0..k-1``."""


# --- AST -----------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Call]


# --- lexer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\]]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(source: str):
    toks = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            rest = source[pos:]
            if not rest.strip():
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise DSLSyntaxError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


# --- parser --------------------------------------------------------------

class _Parser:
    def __init__(self, source, k, allowed):
        self.source = source
        self.k = k
        self.allowed = allowed
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=DSLSyntaxError):
        tok = tok or self.tok
        return cls(msg, self.source, tok.pos)

    def take(self):
        t = self.tok
        self.i += 1
        return t

    def expect(self, text):
        if self.tok.text != text or self.tok.kind not in ("op",):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.take()

    def parse(self):
        if self.tok.kind == "end":
            raise self.error("empty expression")
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            self.take()
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name in CONSTANTS:
                return Const(name)
            if name in VARIABLES:
                if name not in self.allowed:
                    raise self.error(f"variable {name!r} is not available here", tok, DSLNameError)
                self.expect("[")
                idx = self.tok
                if idx.kind != "num" or not idx.text.isdigit():
                    raise self.error("expected an integer index")
                self.take()
                self.expect("]")
                index = int(idx.text)
                if self.k is not None and index >= self.k:
                    raise self.error(
                        f"index {name}[{index}] out of range for k={self.k}", tok, DSLDimensionError
                    )
                return Var(name, index)
            raise self.error(f"unknown identifier {name!r}", tok, DSLNameError)
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}")


def parse(source: str, k=None, allowed=VARIABLES) -> Node:
    """Parse ``source``; ``k`` bounds variable indices and ``allowed`` names the usable variables."""
    return _Parser(source, k, frozenset(allowed)).parse()


# --- printer -------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _wrap(node, need):
    text = to_source(node)
    return f"({text})" if _prec(node) < need else text


def to_source(node: Node) -> str:
    """Render ``node`` with the minimal parentheses needed to parse back to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return f"{node.name}[{node.index}]"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, 3)
    if node.op == "^":
        return f"{_wrap(node.left, 5)}^{_wrap(node.right, 3)}"
    p = _PREC[node.op]
    return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"


def variables(node: Node) -> set:
    """The set of ``(name, index)`` pairs referenced by ``node``."""
    if isinstance(node, Var):
        return {(node.name, node.index)}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, Call):
        return variables(node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set()


# --- evaluation ----------------------------------------------------------

def _domain(msg, node):
    return DomainError(f"{msg} in {to_source(node)!r}")


def _eval(node, env, n):
    if isinstance(node, Num):
        return np.full(n, node.value)
    if isinstance(node, Const):
        return np.full(n, CONSTANTS[node.name])
    if isinstance(node, Var):
        return env[node.name][:, node.index]
    if isinstance(node, Neg):
        return -_eval(node.operand, env, n)
    if isinstance(node, Call):
        a = _eval(node.arg, env, n)
        if node.func in ("ln", "log2", "log10"):
            if np.any(a <= 0):
                raise _domain("logarithm of a nonpositive value", node)
            return {"ln": np.log, "log2": np.log2, "log10": np.log10}[node.func](a)
        if node.func == "exp":
            return np.exp(a)
        return np.abs(a)
    a = _eval(node.left, env, n)
    b = _eval(node.right, env, n)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if np.any(b == 0):
            raise _domain("division by zero", node)
        return a / b
    if np.any((a == 0) & (b < 0)):
        raise _domain("zero raised to a negative power", node)
    if np.any((a < 0) & (b != np.round(b))):
        raise _domain("negative base with non-integer exponent", node)
    return np.power(a, b)


def evaluate(node: Node, bindings: dict):
    """Evaluate ``node`` with each variable name bound to a point or a batch of points."""
    env = {}
    single = True
    n = 1
    for name, value in bindings.items():
        arr = as_points(value)
        if arr.ndim == 2:
            single = False
            n = arr.shape[0]
        env[name] = arr
    for name, arr in env.items():
        arr = np.atleast_2d(arr)
        if arr.shape[0] != n:
            if arr.shape[0] != 1:
                raise DimensionError(f"binding {name!r} has {arr.shape[0]} rows, expected {n}")
            arr = np.repeat(arr, n, axis=0)
        env[name] = arr
    for name, index in variables(node):
        if name not in env:
            raise NameError(f"variable {name!r} is unbound")
        if index >= env[name].shape[1]:
            raise DimensionError(f"{name}[{index}] out of range for dimension {env[name].shape[1]}")
    with np.errstate(all="ignore"):
        out = _eval(node, env, n)
    return float(out[0]) if single else out
