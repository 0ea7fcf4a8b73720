"""A small arithmetic language for scalar nets and smooth functions.

Grammar (Pratt): ``^`` binds tightest, then unary minus, then ``* /``, then
``+ -``; all binary operators are left-associative.  Symbols are ``eps`` and
``x1 .. xd``; functions are ``log exp sqrt sin cos abs`` (one argument) and
``pow`` (two).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .jets import Jet
from .netcalc import EpsilonGrid, ScalarNet

FUNCTIONS = {"log": 1, "exp": 1, "sqrt": 1, "sin": 1, "cos": 1, "abs": 1, "pow": 2}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        got = f", found {found!r}" if found else ", found end of input"
        super().__init__(f"at position {position}: expected {expected}{got}")


class UnknownSymbol(ExprError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown symbol {name!r} at position {position}")


class DomainError(ExprError):
    pass


class NonScalar(ExprError):
    pass


# --- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float
    pos: int = 0

    def key(self):
        return ("num", self.value)


@dataclass(frozen=True)
class Sym:
    name: str
    pos: int = 0

    def key(self):
        return ("sym", self.name)


@dataclass(frozen=True)
class Neg:
    arg: object
    pos: int = 0

    def key(self):
        return ("neg", self.arg.key())


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object
    pos: int = 0

    def key(self):
        return ("bin", self.op, self.left.key(), self.right.key())


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple
    pos: int = 0

    def key(self):
        return ("call", self.fn, tuple(a.key() for a in self.args))


def same(a, b) -> bool:
    """Structural equality ignoring source positions."""
    return a.key() == b.key()


def symbols(node) -> set:
    if isinstance(node, Sym):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return symbols(node.arg)
    if isinstance(node, Bin):
        return symbols(node.left) | symbols(node.right)
    return set().union(*(symbols(a) for a in node.args))


# --- lexer / parser ---------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)

_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, text: str, d: int):
        self.text = text
        self.d = d
        self.toks = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ExprSyntaxError(pos, "a number, symbol or operator", text[pos])
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.toks.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, v, pos = self.peek()
        if v != value or kind != "op":
            raise ExprSyntaxError(pos, repr(value), v)
        self.advance()

    def expression(self, rbp: int = 0):
        left = self.prefix()
        while True:
            kind, v, pos = self.peek()
            if kind != "op" or v not in _BINARY or _BINARY[v] <= rbp:
                break
            self.advance()
            right = self.expression(_BINARY[v])
            left = Bin(v, left, right, pos)
        return left

    def prefix(self):
        kind, v, pos = self.advance()
        if kind == "num":
            return Num(float(v), pos)
        if kind == "op" and v == "-":
            return Neg(self.expression(_UNARY_BP), pos)
        if kind == "op" and v == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        if kind == "name":
            if v in FUNCTIONS:
                self.expect("(")
                args = [self.expression()]
                while self.peek()[1] == "," and self.peek()[0] == "op":
                    self.advance()
                    args.append(self.expression())
                if len(args) != FUNCTIONS[v]:
                    raise ExprSyntaxError(self.peek()[2], f"{FUNCTIONS[v]} argument(s) for {v}")
                self.expect(")")
                return Call(v, tuple(args), pos)
            if v == "eps":
                return Sym(v, pos)
            m = re.fullmatch(r"x([1-9]\d*)", v)
            if m and int(m.group(1)) <= self.d:
                return Sym(v, pos)
            raise UnknownSymbol(v, pos)
        raise ExprSyntaxError(pos, "an operand", v)


def parse(text: str, d: int = 1):
    p = _Parser(text, d)
    node = p.expression()
    kind, v, pos = p.peek()
    if kind != "end":
        raise ExprSyntaxError(pos, "end of input or operator", v)
    return node


# --- pretty printer -----------------------------------------------------------

def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def pretty(node, _ctx: int = 0, _right: bool = False) -> str:
    """Render with the minimal parentheses that reparse to the same tree."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(pretty(a) for a in node.args)})"
    if isinstance(node, Neg):
        s = "-" + pretty(node.arg, _UNARY_BP)
        return f"({s})" if _ctx >= _UNARY_BP else s
    bp = _BINARY[node.op]
    s = f"{pretty(node.left, bp - 1)} {node.op} {pretty(node.right, bp, True)}"
    if bp < _ctx or (bp == _ctx and _right):
        return f"({s})"
    return s


# --- evaluation -------------------------------------------------------------

def _is_jet(v) -> bool:
    return isinstance(v, Jet)


def _check_domain(fn: str, v):
    val = v.value if _is_jet(v) else np.asarray(v)
    if fn == "log" and np.any(np.real(val) <= 0):
        raise DomainError("log of a non-positive value")
    if fn == "sqrt" and np.any(np.real(val) < 0):
        raise DomainError("sqrt of a negative value")


def _call(fn: str, args):
    if fn == "pow":
        return _power(*args)
    (a,) = args
    _check_domain(fn, a)
    if _is_jet(a):
        if fn == "sqrt" and np.any(a.value == 0) and a.K > 0:
            raise DomainError("sqrt is not differentiable at 0")
        return getattr(a, fn)()
    with np.errstate(all="ignore"):
        return getattr(np, fn)(a)


def _power(base, expo):
    if _is_jet(expo):
        b = base.value if _is_jet(base) else np.asarray(base)
        if np.any(b <= 0):
            raise DomainError("variable exponent needs a positive base")
        return (base.log() * expo).exp() if _is_jet(base) else (expo * math.log(float(base))).exp()
    e = np.asarray(expo, dtype=float)
    integral = np.all(e == np.round(e))
    b = base.value if _is_jet(base) else np.asarray(base)
    if not integral and np.any(b < 0):
        raise DomainError("non-integer power of a negative base")
    if _is_jet(base):
        if e.ndim:
            raise NonScalar("array exponent on a jet base")
        if float(e) < 0 and np.any(b == 0):
            raise DomainError("negative power of zero")
        return base ** float(e)
    with np.errstate(all="ignore"):
        if np.any(b == 0) and np.any(e < 0):
            raise DomainError("negative power of zero")
        return np.power(np.asarray(base, dtype=float), e)


def evaluate(node, env: dict):
    """Evaluate over floats, numpy arrays or :class:`Jet` values."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Sym):
        try:
            return env[node.name]
        except KeyError:
            raise UnknownSymbol(node.name, node.pos) from None
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        return _call(node.fn, [evaluate(a, env) for a in node.args])
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        bv = b.value if _is_jet(b) else np.asarray(b)
        if np.any(bv == 0):
            raise DomainError("division by zero")
        with np.errstate(all="ignore"):
            return a / b
    return _power(a, b)


def _finite(v):
    val = v.c if _is_jet(v) else np.asarray(v)
    if not np.all(np.isfinite(val)):
        raise DomainError("evaluation produced a non-finite value")
    return v


def eval_scalar(expr, eps: float, x=None) -> float:
    """Evaluate at one ``eps`` (and optionally one point ``x``) to a float."""
    node = parse(expr, len(x) if x is not None else 1) if isinstance(expr, str) else expr
    env = {"eps": float(eps)}
    if x is not None:
        env.update({f"x{j + 1}": float(v) for j, v in enumerate(x)})
    for s in symbols(node) - env.keys():
        raise NonScalar(f"expression depends on {s}")
    return float(_finite(evaluate(node, env)))


def net_from_expr(expr, grid: EpsilonGrid) -> ScalarNet:
    node = parse(expr, 1) if isinstance(expr, str) else expr
    extra = symbols(node) - {"eps"}
    if extra:
        raise NonScalar(f"net expression depends on {sorted(extra)}")
    vals = _finite(evaluate(node, {"eps": grid.values}))
    return ScalarNet(grid, np.broadcast_to(np.asarray(vals, dtype=float), (len(grid),)).copy())


def eval_array(node, eps: float, x: np.ndarray):
    """Values at points ``x`` of shape (n, d)."""
    x = np.atleast_2d(x)
    env = {"eps": float(eps)}
    env.update({f"x{j + 1}": x[:, j] for j in range(x.shape[1])})
    v = _finite(evaluate(node, env))
    return np.broadcast_to(np.asarray(v, dtype=float), (x.shape[0],)).copy()


def eval_jet(node, eps: float, coords: list) -> Jet:
    """Exact derivatives of the expression: evaluate it on coordinate jets."""
    env = {"eps": float(eps)}
    env.update({f"x{j + 1}": c for j, c in enumerate(coords)})
    v = evaluate(node, env)
    if not _is_jet(v):
        c0 = coords[0]
        v = Jet.constant(c0.d, c0.K, float(v), len(c0))
    return _finite(v)
