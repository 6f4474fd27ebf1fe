"""Boolean context predicates over a single data row.

Grammar (EBNF)::

    expr    = conj , { "or" , conj } ;
    conj    = neg , { "and" , neg } ;
    neg     = "not" , neg | atom ;
    atom    = "(" , expr , ")" | "true" | "false" | compare ;
    compare = name , ( "==" | "!=" ) , number ;
    name    = letter , { letter | digit | "_" } ;

Comparisons are numeric; ``enemy_exists == 1`` is true for a row value of
``1`` or ``1.0``.
"""

from __future__ import annotations

import re

from .errors import PredicateError

_TOKEN = re.compile(r"\s*(?:(==|!=)|(\()|(\))|([A-Za-z_][A-Za-z0-9_]*)|(-?\d+(?:\.\d+)?))")
_KEYWORDS = {"and", "or", "not", "true", "false"}


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PredicateError(f"unexpected character at {pos} in predicate {text!r}")
        op, lp, rp, word, num = m.groups()
        if op:
            tokens.append(("op", op))
        elif lp:
            tokens.append(("(", lp))
        elif rp:
            tokens.append((")", rp))
        elif word:
            tokens.append(("kw" if word in _KEYWORDS else "name", word))
        else:
            tokens.append(("num", float(num)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self, kind, value=None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise PredicateError(f"expected {want!r} in predicate {self.text!r}, got {tok[1]!r}")
        self.i += 1
        return tok[1]

    def parse(self):
        node = self.expr()
        if self.i != len(self.tokens):
            raise PredicateError(f"trailing tokens in predicate {self.text!r}")
        return node

    def expr(self):
        node = self.conj()
        while self.peek() == ("kw", "or"):
            self.i += 1
            node = ("or", node, self.conj())
        return node

    def conj(self):
        node = self.neg()
        while self.peek() == ("kw", "and"):
            self.i += 1
            node = ("and", node, self.neg())
        return node

    def neg(self):
        if self.peek() == ("kw", "not"):
            self.i += 1
            return ("not", self.neg())
        return self.atom()

    def atom(self):
        kind, value = self.peek()
        if kind == "(":
            self.i += 1
            node = self.expr()
            self.take(")")
            return node
        if kind == "kw" and value in ("true", "false"):
            self.i += 1
            return ("const", value == "true")
        name = self.take("name")
        op = self.take("op")
        num = self.take("num")
        return (op, name, num)


def _eval(node, row):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "not":
        return not _eval(node[1], row)
    if tag == "and":
        return _eval(node[1], row) and _eval(node[2], row)
    if tag == "or":
        return _eval(node[1], row) or _eval(node[2], row)
    _, name, num = node
    try:
        value = float(row[name])
    except KeyError:
        raise PredicateError(f"row has no value for predicate variable {name!r}") from None
    return (value == num) if tag == "==" else (value != num)


def _names(node, out):
    if node[0] in ("==", "!="):
        out.add(node[1])
    elif node[0] in ("and", "or"):
        _names(node[1], out)
        _names(node[2], out)
    elif node[0] == "not":
        _names(node[1], out)
    return out


class Predicate:
    """A parsed context predicate; call it with a ``{name: value}`` row."""

    __slots__ = ("source", "_ast", "variables")

    def __init__(self, source: str):
        self.source = source.strip()
        self._ast = _Parser(self.source).parse()
        self.variables = frozenset(_names(self._ast, set()))

    def __call__(self, row) -> bool:
        return bool(_eval(self._ast, row))

    def __repr__(self):
        return f"Predicate({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Predicate) and other.source == self.source

    def __hash__(self):
        return hash(self.source)
