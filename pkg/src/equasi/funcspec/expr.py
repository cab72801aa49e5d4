"""Expression trees: nodes, a recursive-descent parser and a serializer.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?            # right-associative
    atom    := NUMBER | 'pi' | VAR | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``VAR`` is ``x1 .. xn`` (plus ``x`` for ``x1`` when n = 1).  Bifunction trees use
a second block ``y1 .. yn`` (alias ``y``).  The Unicode operators ``−``, ``×``,
``÷`` are accepted as aliases for ``-``, ``*``, ``/``.  A unary minus applied
directly to a numeric literal is folded into the literal, so that
``parse(serialize(tree)) == tree`` holds for every tree, including ones built
programmatically with negative constants.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from equasi.errors import ExpressionSyntaxError, UnknownIdentifier

FUNCTIONS: dict[str, tuple[int, int | None]] = {
    # name -> (min arity, max arity or None for variadic)
    "abs": (1, 1),
    "sqrt": (1, 1),
    "sin": (1, 1),
    "cos": (1, 1),
    "exp": (1, 1),
    "log": (1, 1),
    "min": (2, None),
    "max": (2, None),
}

CONSTANTS = {"pi": math.pi}

_UNICODE_OPS = {"−": "-", "×": "*", "÷": "/", "·": "*"}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]


def variable_names(arity: int, blocks: tuple[str, ...] = ("x",)) -> tuple[str, ...]:
    """Canonical variable names, block by block: ``x1..xn`` then ``y1..yn``."""
    return tuple(f"{b}{i + 1}" for b in blocks for i in range(arity))


@dataclass(frozen=True)
class ExpressionTree:
    """A parsed scalar expression together with its variable namespace."""

    root: Node
    arity: int
    names: tuple[str, ...]

    @property
    def n_inputs(self) -> int:
        return len(self.names)

    def __str__(self) -> str:
        return serialize(self)


# --------------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    for uni, ascii_op in _UNICODE_OPS.items():
        source = source.replace(uni, ascii_op)
    tokens: list[_Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# -------------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, source: str, namespace: dict[str, int]):
        self.tokens = _tokenize(source)
        self.i = 0
        self.namespace = namespace

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _expect(self, text: str) -> None:
        if self.tok.text != text:
            raise ExpressionSyntaxError(
                f"unexpected {self.tok.text or 'end of input'!r}", self.tok.pos, (text,)
            )
        self._advance()

    def parse(self) -> Node:
        node = self._expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected {self.tok.text!r}", self.tok.pos, ("+", "-", "*", "/", "^", "end")
            )
        return node

    def _expr(self) -> Node:
        node = self._term()
        while self.tok.text in ("+", "-"):
            op = self._advance().text
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> Node:
        node = self._unary()
        while self.tok.text in ("*", "/"):
            op = self._advance().text
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> Node:
        if self.tok.text == "-":
            self._advance()
            nxt = self.tokens[self.i + 1]
            if self.tok.kind == "num" and nxt.text != "^":
                return Num(-float(self._advance().text))
            return Neg(self._unary())
        if self.tok.text == "+":
            self._advance()
            return self._unary()
        return self._power()

    def _power(self) -> Node:
        base = self._atom()
        if self.tok.text == "^":
            self._advance()
            return BinOp("^", base, self._unary())
        return base

    def _atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self._advance()
            return Num(float(tok.text))
        if tok.text == "(":
            self._advance()
            node = self._expr()
            self._expect(")")
            return node
        if tok.kind == "name":
            self._advance()
            if self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifier(tok.text, tok.pos)
                return self._call(tok)
            if tok.text in self.namespace:
                return Var(self.namespace[tok.text])
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            raise UnknownIdentifier(tok.text, tok.pos)
        raise ExpressionSyntaxError(
            f"unexpected {tok.text or 'end of input'!r}", tok.pos, ("number", "variable", "function", "(")
        )

    def _call(self, name_tok: _Token) -> Node:
        self._expect("(")
        args = [self._expr()]
        while self.tok.text == ",":
            self._advance()
            args.append(self._expr())
        self._expect(")")
        lo, hi = FUNCTIONS[name_tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExpressionSyntaxError(
                f"{name_tok.text} takes {lo if hi == lo else f'at least {lo}'} argument(s), got {len(args)}",
                name_tok.pos,
            )
        return Call(name_tok.text, tuple(args))


def _namespace(arity: int, blocks: tuple[str, ...]) -> dict[str, int]:
    ns = {name: k for k, name in enumerate(variable_names(arity, blocks))}
    if arity == 1:
        for b, block in enumerate(blocks):
            ns[block] = b
    return ns


def parse_expression(source: str, arity: int, blocks: tuple[str, ...] = ("x",)) -> ExpressionTree:
    """Parse ``source`` into a tree over ``arity`` variables per block."""
    if arity < 1:
        raise ValueError("arity must be >= 1")
    root = _Parser(source, _namespace(arity, blocks)).parse()
    return ExpressionTree(root, arity, variable_names(arity, blocks))


# ---------------------------------------------------------------------- serializer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_num(v: float) -> str:
    if math.isinf(v) or math.isnan(v):
        raise ValueError(f"cannot serialize non-finite literal {v}")
    return repr(float(v))


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Num) and math.copysign(1.0, node.value) < 0):
        return _PREC["neg"]
    return 5


def _emit(node: Node, names: tuple[str, ...]) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return names[node.index]
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_emit(a, names) for a in node.args)})"
    if isinstance(node, Neg):
        inner = _emit(node.arg, names)
        # a Num argument would be folded on re-parse, so it must be bracketed
        if _prec(node.arg) < _PREC["^"] or isinstance(node.arg, Num):
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left, right = _emit(node.left, names), _emit(node.right, names)
    lp, rp = _prec(node.left), _prec(node.right)
    if node.op == "^":
        if lp <= p:
            left = f"({left})"
        if rp < _PREC["neg"]:
            right = f"({right})"
    else:
        if lp < p:
            left = f"({left})"
        if rp <= p:
            right = f"({right})"
    return f"{left} {node.op} {right}"


def serialize(tree: ExpressionTree) -> str:
    return _emit(tree.root, tree.names)


# ----------------------------------------------------------------- tree builders


def reparent(tree: ExpressionTree, root: Node) -> ExpressionTree:
    return ExpressionTree(root, tree.arity, tree.names)


def linear_form(coeffs, offset: int = 0) -> Node:
    """Tree for ``sum_i coeffs[i] * x_{offset+i}``; zero coefficients are dropped."""
    terms: list[Node] = [
        BinOp("*", Num(float(c)), Var(offset + i)) for i, c in enumerate(coeffs) if c != 0.0
    ]
    if not terms:
        return Num(0.0)
    node = terms[0]
    for t in terms[1:]:
        node = BinOp("+", node, t)
    return node
