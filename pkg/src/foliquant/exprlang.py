"""A small expression language for scalar fields on a foliated chart.

Grammar (whitespace is ignored)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" ["-"] INT)*
    atom   := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"

Variables are ``x1 .. xp`` (leaf coordinates) and ``y1 .. yq`` (transverse
coordinates); functions are ``sin``, ``cos`` and ``exp``.  Evaluation only
uses ring operations, so points may hold floats, arrays or jets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import taylor


class ExprError(ValueError):
    """Base class for parse errors; ``offset`` is a byte offset into the text."""

    def __init__(self, message: str, offset: int | None = None):
        self.message = message
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class ExprSyntaxError(ExprError):
    pass


class UnknownVariableError(ExprError):
    pass


class ArityError(ExprError):
    pass


class EvaluationError(ArithmeticError):
    pass


FUNCTIONS = {"sin": taylor.sin, "cos": taylor.cos, "exp": taylor.exp}


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    slot: int


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
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


# ---------------------------------------------------------------------------
# tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    raw = text.encode()
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            bad = pos + stripped
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", len(text[:bad].encode()))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), len(text[:start].encode())))
        pos = m.end()
    tokens.append(_Token("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, p: int, q: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.p = p
        self.q = q

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.take()
        if tok.text != text or tok.kind == "end":
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", tok.offset)
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            sign = 1
            if self.peek().text == "-" and self.peek().kind == "op":
                self.take()
                sign = -1
            tok = self.take()
            if tok.kind != "num" or not tok.text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", tok.offset)
            node = Pow(node, sign * int(tok.text))
        return node

    def atom(self) -> Node:
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if self.peek().text == "(" and self.peek().kind == "op":
                return self.call(tok)
            if tok.text in FUNCTIONS:
                raise ArityError(f"function {tok.text!r} needs exactly one argument", tok.offset)
            return self.variable(tok)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {found}", tok.offset)

    def call(self, name: _Token) -> Node:
        if name.text not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name.text!r}", name.offset)
        self.expect("(")
        if self.peek().text == ")" and self.peek().kind == "op":
            raise ArityError(f"function {name.text!r} needs exactly one argument", name.offset)
        arg = self.expr()
        if self.peek().text == ",":
            raise ArityError(f"function {name.text!r} needs exactly one argument", name.offset)
        self.expect(")")
        return Call(name.text, arg)

    def variable(self, tok: _Token) -> Node:
        m = re.fullmatch(r"([xy])([1-9]\d*)", tok.text)
        if not m:
            raise UnknownVariableError(f"unknown identifier {tok.text!r}", tok.offset)
        kind, idx = m.group(1), int(m.group(2))
        limit = self.p if kind == "x" else self.q
        if idx > limit:
            raise UnknownVariableError(
                f"variable {tok.text!r} out of range for (p, q) = ({self.p}, {self.q})", tok.offset
            )
        slot = idx - 1 if kind == "x" else self.p + idx - 1
        return Var(tok.text, slot)


# ---------------------------------------------------------------------------
# evaluation and printing
# ---------------------------------------------------------------------------


def _is_zero(x) -> bool:
    return bool(np.any(taylor.standard_part(x) == 0))


def _product_factors(node: Node) -> tuple[float, list[Node]]:
    """Split a product chain into its numeric constant and remaining factors."""
    if isinstance(node, Num):
        return node.value, []
    if isinstance(node, Neg):
        c, rest = _product_factors(node.operand)
        return -c, rest
    if isinstance(node, BinOp) and node.op == "*":
        cl, fl = _product_factors(node.left)
        cr, fr = _product_factors(node.right)
        return cl * cr, fl + fr
    return 1.0, [node]


def _cached(key: str, fn: Callable) -> Callable:
    def run(pt, cache):
        val = cache.get(key)
        if val is None:
            val = cache[key] = fn(pt, cache)
        return val

    return run


def _compile_product(node: Node) -> Callable:
    """Constant times sorted factors; partial products are shared through the cache.

    Polynomial fields repeat the same monomials across many components, so
    ``c1*y1*y2`` and ``c2*y2*y1`` reuse a single jet product.
    """
    const, factors = _product_factors(node)
    if not factors:
        return lambda pt, cache: const
    keyed = sorted(((pretty(f), _compile(f)) for f in factors), key=lambda kf: kf[0])
    steps = []
    prefix = ""
    for key, fn in keyed:
        prefix = f"{prefix}*{key}" if prefix else key
        steps.append((prefix, fn))

    def product(pt, cache):
        acc = None
        for pkey, fn in steps:
            val = cache.get(pkey)
            if val is None:
                val = fn(pt, cache) if acc is None else acc * fn(pt, cache)
                cache[pkey] = val
            acc = val
        return acc if const == 1.0 else acc * const

    return product


def _compile(node: Node) -> Callable:
    """Compile to ``fn(point, cache)``; ``cache`` holds shared subresults for one point."""
    if isinstance(node, Num):
        v = node.value
        return lambda pt, cache: v
    if isinstance(node, Var):
        s = node.slot
        return lambda pt, cache: pt[s]
    if isinstance(node, Neg) or (isinstance(node, BinOp) and node.op == "*"):
        return _compile_product(node)
    if isinstance(node, Pow):
        f = _compile(node.base)
        e = node.exponent

        def power(pt, cache):
            base = f(pt, cache)
            if e < 0 and _is_zero(base):
                raise EvaluationError("negative power of a value with zero standard part")
            if isinstance(base, taylor.Jet):
                return base**e
            return np.asarray(base, dtype=float) ** float(e) if e < 0 else base**e

        return _cached(pretty(node), power)
    if isinstance(node, Call):
        f = _compile(node.arg)
        fn = FUNCTIONS[node.name]
        return _cached(pretty(node), lambda pt, cache: fn(f(pt, cache)))
    if isinstance(node, BinOp):
        left = _compile(node.left)
        right = _compile(node.right)
        if node.op == "+":
            return lambda pt, cache: left(pt, cache) + right(pt, cache)
        if node.op == "-":
            return lambda pt, cache: left(pt, cache) - right(pt, cache)

        def divide(pt, cache):
            den = right(pt, cache)
            if _is_zero(den):
                raise EvaluationError("division by a value with zero standard part")
            num = left(pt, cache)
            if not isinstance(den, taylor.Jet) and not isinstance(num, taylor.Jet):
                return np.asarray(num, dtype=float) / den
            return num / den

        return divide
    raise TypeError(f"unknown node {node!r}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def pretty(node: Node, parent: int = 0) -> str:
    """Canonical text for ``node``; parses back to the same tree."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({pretty(node.arg)})"
    if isinstance(node, Pow):
        base = pretty(node.base, 4)
        return f"{base}^{node.exponent}"
    if isinstance(node, Neg):
        text = "-" + pretty(node.operand, 3)
        return f"({text})" if parent > 3 else text
    prec = _PREC[node.op]
    # left-associative: the right operand needs brackets at equal precedence
    text = f"{pretty(node.left, prec)} {node.op} {pretty(node.right, prec + 1)}"
    return f"({text})" if parent > prec else text


@dataclass(frozen=True)
class ScalarFieldExpr:
    """Parsed scalar field over a chart with ``p`` leaf and ``q`` transverse coordinates."""

    root: Node
    p: int
    q: int
    _fn: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.root))

    @property
    def n(self) -> int:
        return self.p + self.q

    def __call__(self, point: Sequence):
        return self.evaluate(point)

    def evaluate(self, point: Sequence, cache: dict | None = None):
        """Value at ``point``; pass one ``cache`` dict to share work across fields at the same point."""
        if len(point) != self.n:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.n}")
        return self._fn(point, {} if cache is None else cache)

    def text(self) -> str:
        return pretty(self.root)

    def __str__(self) -> str:
        return self.text()

    def slots(self) -> frozenset[int]:
        """Coordinate slots the expression references."""
        out = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.slot)
            elif isinstance(node, (Neg,)):
                stack.append(node.operand)
            elif isinstance(node, Pow):
                stack.append(node.base)
            elif isinstance(node, Call):
                stack.append(node.arg)
            elif isinstance(node, BinOp):
                stack.extend([node.left, node.right])
        return frozenset(out)

    def is_zero_literal(self) -> bool:
        return isinstance(self.root, Num) and self.root.value == 0.0


def parse(text: str, p: int, q: int) -> ScalarFieldExpr:
    """Parse ``text`` into an expression over ``x1..xp, y1..yq``."""
    return ScalarFieldExpr(_Parser(text, p, q).parse(), p, q)


def evaluate(expr: ScalarFieldExpr, point: Sequence):
    return expr.evaluate(point)


def constant(value: float, p: int, q: int) -> ScalarFieldExpr:
    return ScalarFieldExpr(Num(float(value)), p, q)


def substitute(expr: ScalarFieldExpr, values: dict[int, float], p: int, q: int) -> ScalarFieldExpr:
    """Replace the slots in ``values`` by constants and renumber the rest.

    The remaining variables keep their names' kind: the result lives on a
    chart with ``p`` leaf and ``q`` transverse coordinates, and every
    surviving slot moves down by the number of removed leaf slots before it.
    """

    def rebuild(node: Node) -> Node:
        if isinstance(node, Var):
            if node.slot in values:
                return Num(float(values[node.slot]))
            shift = sum(1 for s in values if s < node.slot)
            new_slot = node.slot - shift
            kind = "x" if new_slot < p else "y"
            idx = new_slot + 1 if kind == "x" else new_slot - p + 1
            return Var(f"{kind}{idx}", new_slot)
        if isinstance(node, Neg):
            return Neg(rebuild(node.operand))
        if isinstance(node, Pow):
            return Pow(rebuild(node.base), node.exponent)
        if isinstance(node, Call):
            return Call(node.name, rebuild(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, rebuild(node.left), rebuild(node.right))
        return node

    return ScalarFieldExpr(rebuild(expr.root), p, q)


def combine(op: str, a: ScalarFieldExpr, b: ScalarFieldExpr) -> ScalarFieldExpr:
    """``a op b`` as a new expression, dropping literal zeros for ``+`` and ``-``."""
    if op in "+-" and b.is_zero_literal():
        return a
    if op == "+" and a.is_zero_literal():
        return b
    return ScalarFieldExpr(BinOp(op, a.root, b.root), a.p, a.q)
