"""Scalar-field expressions: parser, printer, evaluation and exact derivatives.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ['-'] atom
    atom   := number | identifier | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | exp

Trees are built through folding constructors (``0*x -> 0``, ``1*x -> x``,
numeric subtrees collapse) so repeated differentiation stays small. No other
simplification is attempted.
"""

from __future__ import annotations

import math
import re
from typing import Mapping, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "exp")

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, text: str = ""):
        self.line = line
        self.column = column
        self.text = text
        super().__init__(f"{message} at line {line}, column {column}")


class ScalarField:
    """Immutable expression over named variables (coordinates and ``t``)."""

    __slots__ = ("node", "_compiled", "_vars")

    def __init__(self, node: tuple):
        self.node = node
        self._compiled = {}
        self._vars = None

    # construction -------------------------------------------------------
    @classmethod
    def const(cls, value: float) -> "ScalarField":
        return cls(("num", float(value) + 0.0))

    @classmethod
    def var(cls, name: str) -> "ScalarField":
        return cls(("var", name))

    @staticmethod
    def coerce(value) -> "ScalarField":
        if isinstance(value, ScalarField):
            return value
        if isinstance(value, str):
            return parse(value)
        return ScalarField(("num", float(value)))

    def __add__(self, other):
        return ScalarField(_add(self.node, ScalarField.coerce(other).node))

    def __radd__(self, other):
        return ScalarField(_add(ScalarField.coerce(other).node, self.node))

    def __sub__(self, other):
        return ScalarField(_sub(self.node, ScalarField.coerce(other).node))

    def __rsub__(self, other):
        return ScalarField(_sub(ScalarField.coerce(other).node, self.node))

    def __mul__(self, other):
        return ScalarField(_mul(self.node, ScalarField.coerce(other).node))

    def __rmul__(self, other):
        return ScalarField(_mul(ScalarField.coerce(other).node, self.node))

    def __truediv__(self, other):
        return ScalarField(_div(self.node, ScalarField.coerce(other).node))

    def __rtruediv__(self, other):
        return ScalarField(_div(ScalarField.coerce(other).node, self.node))

    def __neg__(self):
        return ScalarField(_neg(self.node))

    def __eq__(self, other):
        return isinstance(other, ScalarField) and self.node == other.node

    def __hash__(self):
        return hash(self.node)

    def __repr__(self):
        return f"ScalarField({to_string(self.node)!r})"

    def __str__(self):
        return to_string(self.node)

    # queries ------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.node == ("num", 0.0)

    @property
    def constant_value(self) -> float | None:
        return self.node[1] if self.node[0] == "num" else None

    def variables(self) -> frozenset:
        if self._vars is None:
            self._vars = frozenset(_collect_vars(self.node))
        return self._vars

    def depends_on(self, name: str) -> bool:
        return name in self.variables()

    # calculus -----------------------------------------------------------
    def diff(self, name: str) -> "ScalarField":
        """Exact partial derivative, built by forward propagation through the tree."""
        return ScalarField(_diff(self.node, name))

    def value_and_grad(self, env: Mapping[str, float], wrt: Sequence[str]):
        """Forward-mode evaluation: returns (value, gradient array over ``wrt``)."""
        seeds = {name: np.eye(len(wrt))[i] for i, name in enumerate(wrt)}
        return _dual_eval(self.node, env, seeds, len(wrt))

    # evaluation ---------------------------------------------------------
    def compile(self, names: Sequence[str]):
        """Vectorised callable ``f(*arrays)`` over the given variable order."""
        key = tuple(names)
        fn = self._compiled.get(key)
        if fn is None:
            missing = self.variables() - set(key)
            if missing:
                raise KeyError(f"unbound variable(s) {sorted(missing)} in {self}")
            src = f"lambda {', '.join(_py_name(n) for n in key) or '*_'}: {_to_python(self.node)}"
            fn = eval(src, {"_np": np})  # noqa: S307 - source is generated from a parsed tree
            self._compiled[key] = fn
        return fn

    def __call__(self, **env):
        return self.evaluate(env)

    def evaluate(self, env: Mapping[str, object]):
        names = sorted(self.variables())
        fn = self.compile(names)
        return fn(*(env[n] for n in names))


# folding constructors -----------------------------------------------------

def _num(node):
    return node[1] if node[0] == "num" else None


def _add(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return ("num", va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    return ("add", a, b)


def _sub(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return ("num", va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return _neg(b)
    if a == b:
        return ("num", 0.0)
    return ("sub", a, b)


def _mul(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return ("num", va * vb)
    if va == 0.0 or vb == 0.0:
        return ("num", 0.0)
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return _neg(b)
    if vb == -1.0:
        return _neg(a)
    return ("mul", a, b)


def _div(a, b):
    va, vb = _num(a), _num(b)
    if vb is not None and vb != 0.0:
        if va is not None:
            return ("num", va / vb)
        if vb == 1.0:
            return a
    if va == 0.0 and vb != 0.0:
        return ("num", 0.0)
    return ("div", a, b)


def _neg(a):
    if a[0] == "num":
        return ("num", -a[1] + 0.0)
    if a[0] == "neg":
        return a[1]
    return ("neg", a)


def _call(fname, a):
    if a[0] == "num":
        return ("num", float(getattr(math, fname)(a[1])))
    return ("call", fname, a)


def sin(x) -> ScalarField:
    return ScalarField(_call("sin", ScalarField.coerce(x).node))


def cos(x) -> ScalarField:
    return ScalarField(_call("cos", ScalarField.coerce(x).node))


def exp(x) -> ScalarField:
    return ScalarField(_call("exp", ScalarField.coerce(x).node))


ZERO = ScalarField(("num", 0.0))
ONE = ScalarField(("num", 1.0))


# tree walks -----------------------------------------------------------------

def _collect_vars(node, out=None):
    out = set() if out is None else out
    kind = node[0]
    if kind == "var":
        out.add(node[1])
    elif kind in _PREC:
        _collect_vars(node[1], out)
        _collect_vars(node[2], out)
    elif kind == "neg":
        _collect_vars(node[1], out)
    elif kind == "call":
        _collect_vars(node[2], out)
    return out


def _diff(node, name):
    kind = node[0]
    if kind == "num":
        return ("num", 0.0)
    if kind == "var":
        return ("num", 1.0 if node[1] == name else 0.0)
    if kind == "neg":
        return _neg(_diff(node[1], name))
    if kind == "add":
        return _add(_diff(node[1], name), _diff(node[2], name))
    if kind == "sub":
        return _sub(_diff(node[1], name), _diff(node[2], name))
    if kind == "mul":
        a, b = node[1], node[2]
        return _add(_mul(_diff(a, name), b), _mul(a, _diff(b, name)))
    if kind == "div":
        a, b = node[1], node[2]
        da, db = _diff(a, name), _diff(b, name)
        if db == ("num", 0.0):
            return _div(da, b)
        return _div(_sub(_mul(da, b), _mul(a, db)), _mul(b, b))
    if kind == "call":
        fname, u = node[1], node[2]
        du = _diff(u, name)
        if du == ("num", 0.0):
            return du
        if fname == "sin":
            return _mul(_call("cos", u), du)
        if fname == "cos":
            return _neg(_mul(_call("sin", u), du))
        return _mul(node, du)
    raise ValueError(f"unknown node {kind}")


def _substitute(node, name, value):
    kind = node[0]
    if kind == "num":
        return node
    if kind == "var":
        return ("num", float(value)) if node[1] == name else node
    if kind == "neg":
        return _neg(_substitute(node[1], name, value))
    if kind == "call":
        return _call(node[1], _substitute(node[2], name, value))
    build = {"add": _add, "sub": _sub, "mul": _mul, "div": _div}[kind]
    return build(_substitute(node[1], name, value), _substitute(node[2], name, value))


def _dual_eval(node, env, seeds, m):
    kind = node[0]
    if kind == "num":
        return node[1], np.zeros(m)
    if kind == "var":
        return float(env[node[1]]), seeds.get(node[1], np.zeros(m))
    if kind == "neg":
        v, g = _dual_eval(node[1], env, seeds, m)
        return -v, -g
    if kind == "call":
        v, g = _dual_eval(node[2], env, seeds, m)
        if node[1] == "sin":
            return math.sin(v), math.cos(v) * g
        if node[1] == "cos":
            return math.cos(v), -math.sin(v) * g
        e = math.exp(v)
        return e, e * g
    a, ga = _dual_eval(node[1], env, seeds, m)
    b, gb = _dual_eval(node[2], env, seeds, m)
    if kind == "add":
        return a + b, ga + gb
    if kind == "sub":
        return a - b, ga - gb
    if kind == "mul":
        return a * b, ga * b + a * gb
    if b == 0.0:
        raise ZeroDivisionError("division by zero")
    return a / b, (ga * b - a * gb) / (b * b)


def _py_name(name):
    return f"v_{name}"


def _to_python(node):
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "var":
        return _py_name(node[1])
    if kind == "neg":
        return f"(-{_to_python(node[1])})"
    if kind == "call":
        return f"_np.{node[1]}({_to_python(node[2])})"
    op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[kind]
    return f"({_to_python(node[1])} {op} {_to_python(node[2])})"


def _fmt_num(v):
    text = repr(float(v) + 0.0)  # no "-0.0" in printed trees
    if text in ("inf", "-inf", "nan"):
        raise ValueError(f"non-finite literal {text}")
    return text


def to_string(node) -> str:
    kind = node[0]
    if kind == "num":
        return _fmt_num(node[1])
    if kind == "var":
        return node[1]
    if kind == "call":
        return f"{node[1]}({to_string(node[2])})"
    if kind == "neg":
        child = node[1]
        inner = to_string(child)
        if child[0] not in ("var", "call"):
            inner = f"({inner})"
        return "-" + inner
    prec = _PREC[kind]
    left, right = node[1], node[2]
    ls, rs = to_string(left), to_string(right)
    if _prec_of(left) < prec:
        ls = f"({ls})"
    if _prec_of(right) <= prec:
        rs = f"({rs})"
    op = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[kind]
    return ls + op + rs


def _prec_of(node):
    kind = node[0]
    if kind in _PREC:
        return _PREC[kind]
    return 3


# parser ---------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/()]))"
)


def _position(text, pos):
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = variables
        self.tokens = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", *_position(text, pos), text)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, *_position(self.text, tok[2]), self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {what}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = _add(node, rhs) if op == "+" else _sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            node = _mul(node, rhs) if op == "*" else _div(node, rhs)
        return node

    def factor(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return _neg(self.atom())
        return self.atom()

    def atom(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "num":
            self.take()
            return ("num", float(value))
        if kind == "id":
            self.take()
            if value in FUNCTIONS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return _call(value, inner)
            if self.variables is not None and value not in self.variables:
                raise self.error(f"unknown identifier {value!r}", tok)
            return ("var", value)
        if kind == "op" and value == "(":
            self.take()
            inner = self.expr()
            self.expect(")")
            return inner
        what = "end of input" if kind == "end" else repr(value)
        raise self.error(f"expected a number, identifier or '(', found {what}", tok)


def parse(text: str, variables: Sequence[str] | None = None) -> ScalarField:
    """Parse ``text``; when ``variables`` is given, other identifiers are rejected."""
    allowed = None if variables is None else set(variables)
    return ScalarField(_Parser(text, allowed).parse())
