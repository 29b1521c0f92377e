"""Small expression language for nonlinearities such as ``u + 0.5*u*sin(u)``.

Grammar (recursive descent)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are either variables from the caller's allowed set, the constant
``pi``, or one of the functions ``sin cos exp log abs``.  Trees are immutable
and can be differentiated symbolically and compiled to plain Python callables.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable

FUNCTIONS = ("sin", "cos", "exp", "log", "abs")
CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    """Raised for malformed expressions; ``pos`` is the offending character offset."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


# -- tree -------------------------------------------------------------------


class Node:
    prec = 5

    def children(self) -> tuple[Node, ...]:
        return ()


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node
    prec = 3

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    @property
    def prec(self):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[self.op]

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def children(self):
        return (self.arg,)


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: frozenset[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in self.variables:
                return Var(text)
            if text in CONSTANTS:
                return Var(text)
            raise ExpressionError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {found}", pos)


def parse(text: str, variables: Iterable[str] = ("u",)) -> Node:
    """Parse ``text`` into an expression tree over ``variables``."""
    variables = frozenset(variables)
    clash = variables & (set(FUNCTIONS) | set(CONSTANTS))
    if clash:
        raise ExpressionError(f"reserved names used as variables: {sorted(clash)}")
    return _Parser(text, variables).parse()


# -- printing ---------------------------------------------------------------


def _fmt_num(v: float) -> str:
    s = repr(float(v))
    return f"({s})" if v < 0 else s


def to_string(node: Node) -> str:
    """Render with the minimum parentheses needed for ``parse`` to rebuild the same tree."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.arg)
        return f"-({inner})" if node.arg.prec < 3 else f"-{inner}"
    if isinstance(node, BinOp):
        left, right = to_string(node.left), to_string(node.right)
        if node.op == "^":
            if node.left.prec <= 4:
                left = f"({left})"
            if node.right.prec < 3:
                right = f"({right})"
            return f"{left}^{right}"
        if node.left.prec < node.prec:
            left = f"({left})"
        if node.right.prec <= node.prec:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# -- differentiation --------------------------------------------------------

ZERO, ONE = Num(0.0), Num(1.0)


def _is(node, value):
    return isinstance(node, Num) and node.value == value


def _add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return BinOp("*", a, b)


def _div(a, b):
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    return Neg(a)


def _depends(node: Node, var: str) -> bool:
    if isinstance(node, Var):
        return node.name == var
    return any(_depends(c, var) for c in node.children())


def diff(node: Node, var: str) -> Node:
    """Symbolic derivative by the usual rules.  ``d|w|/dw`` is taken as ``sign(w)`` with sign(0) = 0."""
    if not _depends(node, var):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        return _neg(diff(node.arg, var))
    if isinstance(node, Call):
        w, dw = node.arg, diff(node.arg, var)
        outer = {
            "sin": lambda: Call("cos", w),
            "cos": lambda: Neg(Call("sin", w)),
            "exp": lambda: node,
            "log": lambda: BinOp("/", ONE, w),
            "abs": lambda: Call("sign", w),
        }[node.func]()
        return _mul(outer, dw)
    a, b = node.left, node.right
    da, db = diff(a, var), diff(b, var)
    if node.op == "+":
        return _add(da, db)
    if node.op == "-":
        return _sub(da, db)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if node.op == "/":
        return _div(_sub(_mul(da, b), _mul(a, db)), BinOp("^", b, Num(2.0)))
    # power
    if not _depends(b, var):
        lowered = Num(b.value - 1.0) if isinstance(b, Num) else _sub(b, ONE)
        return _mul(_mul(b, BinOp("^", a, lowered)), da)
    return _mul(node, _add(_mul(db, Call("log", a)), _div(_mul(b, da), a)))


# -- compilation ------------------------------------------------------------


def _sign(x):
    return (x > 0) - (x < 0)


def _pow(a, b):
    # math.pow raises for a negative base with a fractional exponent instead of going complex
    return math.pow(a, b)


_ENV = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "abs": abs,
    "sign": _sign,
    "_pow": _pow,
    "pi": math.pi,
}


def to_python(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_python(node.arg)})"
    if isinstance(node, Neg):
        return f"(-{to_python(node.arg)})"
    if node.op == "^":
        if isinstance(node.right, Num) and node.right.value.is_integer() and abs(node.right.value) < 64:
            return f"({to_python(node.left)}**{int(node.right.value)})"
        return f"_pow({to_python(node.left)}, {to_python(node.right)})"
    return f"({to_python(node.left)} {node.op} {to_python(node.right)})"


def compile_expr(node: Node, args: tuple[str, ...]) -> Callable[..., float]:
    """Compile ``node`` into a function of the positional ``args`` (unused args are ignored)."""
    src = f"lambda {', '.join(args)}: float({to_python(node)})"
    return eval(src, dict(_ENV))  # noqa: S307 - source is generated from a validated tree
