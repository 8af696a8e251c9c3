"""A small expression language for test functions.

Grammar (EBNF):

    expr    = term , { ("+" | "-") , term } ;
    term    = factor , { "*" , factor } ;
    factor  = [ "-" ] , power ;
    power   = atom , [ "^" , integer ] ;
    atom    = number | variable | call | "(" , expr , ")" ;
    call    = ("exp" | "log" | "sin" | "cos") , "(" , expr , ")" ;
    variable= ("x" | "z") , positive integer ;

Variables x1..xn address the horizontal layer and z1..zm the vertical
layer of a group; indices are checked against the target dimensions when
those are known.  Exponents are nonnegative integers.  There is no
division: checks that need quotients form them from evaluated values.

Expressions evaluate three ways: to truncated Taylor expansions (jets)
around a point, to vectorized numpy functions over coordinate arrays,
and symbolically to their first partial derivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import CarnotouError
from .group import Point
from .jets import Jet, JetSpace, constant_jet, jet_space, variable_jet

FUNCTIONS = ("exp", "log", "sin", "cos")


class ExprError(CarnotouError):
    pass


class ExprSyntaxError(ExprError):
    """Parse failure; ``offset`` is the byte offset into the source text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownVariable(ExprError):
    """Variable index outside the (n, m) dimensions of the target group."""


class LogOfNonPositive(ExprError):
    """log evaluated at a non-positive point during jet expansion."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    # kind "x" or "z", idx is 1-based within its layer
    kind: str
    idx: int


@dataclass(frozen=True)
class BinOp:
    op: str  # "+", "-", "*"
    left: object
    right: object


@dataclass(frozen=True)
class Power:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


Expr = (Const, Var, BinOp, Power, Call)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        mo = _TOKEN.match(text, pos)
        if mo is None or mo.end() == pos:
            stripped = text[pos:].lstrip()
            where = len(text) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {text[where]!r}", where)
        if mo.group("num") is not None:
            tokens.append(("num", mo.group(0).strip(), mo.start(0)))
        elif mo.group("name") is not None:
            tokens.append(("name", mo.group("name"), mo.start("name")))
        else:
            tokens.append(("op", mo.group("op"), mo.start("op")))
        pos = mo.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int | None, m: int | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.m = m

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)
        return self.advance()

    def parse(self):
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {val!r}", off)
        return e

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.advance()
                node = BinOp("*", node, self.factor())
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return BinOp("-", Const(0.0), self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            kind, val, off = self.advance()
            if kind != "num" or not re.fullmatch(r"\d+", val):
                raise ExprSyntaxError("exponent must be a nonnegative integer", off)
            return Power(base, int(val))
        return base

    def atom(self):
        kind, val, off = self.advance()
        if kind == "num":
            return Const(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            if val in FUNCTIONS:
                self.expect_op("(")
                node = self.expr()
                self.expect_op(")")
                return Call(val, node)
            mo = re.fullmatch(r"([xz])([1-9]\d*)", val)
            if mo is None:
                raise ExprSyntaxError(f"unknown name {val!r}", off)
            var = Var(mo.group(1), int(mo.group(2)))
            self._check_var(var, off)
            return var
        raise ExprSyntaxError(f"unexpected token {val!r}" if val else "unexpected end of input", off)

    def _check_var(self, var: Var, off: int):
        bound = self.n if var.kind == "x" else self.m
        if bound is not None and var.idx > bound:
            raise UnknownVariable(
                f"variable {var.kind}{var.idx} out of range for "
                f"(n, m) = ({self.n}, {self.m}) (at offset {off})"
            )


def parse_expr(text: str, n: int | None = None, m: int | None = None, spec=None):
    """Parse an expression; validates variable indices when dims are known."""
    if spec is not None:
        n, m = spec.n, spec.m
    return _Parser(text, n, m).parse()


def expr_to_text(e) -> str:
    """Serialize an AST back to parseable text (for reports and logs)."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"{e.kind}{e.idx}"
    if isinstance(e, BinOp):
        return f"({expr_to_text(e.left)} {e.op} {expr_to_text(e.right)})"
    if isinstance(e, Power):
        return f"{expr_to_text(e.base)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.fn}({expr_to_text(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def _axis(var: Var, n: int, m: int) -> int:
    bound = n if var.kind == "x" else m
    if var.idx > bound:
        raise UnknownVariable(
            f"variable {var.kind}{var.idx} out of range for (n, m) = ({n}, {m})"
        )
    return var.idx - 1 if var.kind == "x" else n + var.idx - 1


def series_coefficients(fn: str, c: np.ndarray, order: int) -> np.ndarray:
    """u^(d)(c)/d! for d = 0..order, stacked on axis 0."""
    c = np.asarray(c, dtype=float)
    out = np.empty((order + 1,) + c.shape)
    if fn == "exp":
        e = np.exp(c)
        for d in range(order + 1):
            out[d] = e / factorial(d)
    elif fn == "log":
        if np.any(c <= 0.0):
            raise LogOfNonPositive(
                f"log expanded at non-positive value (min = {np.min(c):.6g})"
            )
        out[0] = np.log(c)
        for d in range(1, order + 1):
            out[d] = ((-1.0) ** (d - 1)) / (d * c**d)
    elif fn == "sin":
        cyc = (np.sin(c), np.cos(c), -np.sin(c), -np.cos(c))
        for d in range(order + 1):
            out[d] = cyc[d % 4] / factorial(d)
    elif fn == "cos":
        cyc = (np.cos(c), -np.sin(c), -np.cos(c), np.sin(c))
        for d in range(order + 1):
            out[d] = cyc[d % 4] / factorial(d)
    else:
        raise ExprError(f"unknown function {fn!r}")
    return out


def eval_jet_at(e, center: np.ndarray, order: int, n: int, m: int) -> Jet:
    """Jet of an expression around center (shape (..., n+m)); batched."""
    space = jet_space(n + m)
    center = np.asarray(center, dtype=float)

    def rec(node) -> Jet:
        if isinstance(node, Const):
            return constant_jet(space, node.value, center, order)
        if isinstance(node, Var):
            return variable_jet(space, _axis(node, n, m), center, order)
        if isinstance(node, BinOp):
            left, right = rec(node.left), rec(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            return left * right
        if isinstance(node, Power):
            if node.exponent == 0:
                return constant_jet(space, 1.0, center, order)
            base = rec(node.base)
            acc = base
            for _ in range(node.exponent - 1):
                acc = acc * base
            return acc
        if isinstance(node, Call):
            arg = rec(node.arg)
            return arg.compose_series(series_coefficients(node.fn, arg.value, order))
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


def eval_jet(e, p: Point, order: int) -> Jet:
    """Jet of an expression at a group point; dims come from the point."""
    n, m = p.x.shape[-1], p.z.shape[-1]
    center = np.concatenate([np.atleast_1d(p.x), np.atleast_1d(p.z)], axis=-1)
    return eval_jet_at(e, center, order, n, m)


def compile_expr(e, n: int, m: int):
    """Compile to a vectorized function of stacked coordinates (..., n+m)."""

    def rec(node):
        if isinstance(node, Const):
            v = node.value
            return lambda y: np.full(y.shape[:-1], v)
        if isinstance(node, Var):
            ax = _axis(node, n, m)
            return lambda y: y[..., ax]
        if isinstance(node, BinOp):
            lf, rf = rec(node.left), rec(node.right)
            op = {"+": np.add, "-": np.subtract, "*": np.multiply}[node.op]
            return lambda y: op(lf(y), rf(y))
        if isinstance(node, Power):
            bf, k = rec(node.base), node.exponent
            return lambda y: bf(y) ** k
        if isinstance(node, Call):
            af = rec(node.arg)
            fn = getattr(np, node.fn)
            return lambda y: fn(af(y))
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


def point_function(e, n: int, m: int):
    """Compile to a function of split coordinates (xs, zs) -> values."""
    f = compile_expr(e, n, m)

    def apply(xs, zs):
        y = np.concatenate(
            [np.asarray(xs, dtype=float), np.asarray(zs, dtype=float)], axis=-1
        )
        return f(y)

    return apply


def diff(e, kind: str, idx: int):
    """Symbolic first partial derivative with light constant folding."""

    def is_zero(node):
        return isinstance(node, Const) and node.value == 0.0

    def is_one(node):
        return isinstance(node, Const) and node.value == 1.0

    def add(a, b):
        if is_zero(a):
            return b
        if is_zero(b):
            return a
        return BinOp("+", a, b)

    def sub(a, b):
        if is_zero(b):
            return a
        return BinOp("-", a, b)

    def mul(a, b):
        if is_zero(a) or is_zero(b):
            return Const(0.0)
        if is_one(a):
            return b
        if is_one(b):
            return a
        return BinOp("*", a, b)

    def rec(node):
        if isinstance(node, Const):
            return Const(0.0)
        if isinstance(node, Var):
            hit = node.kind == kind and node.idx == idx
            return Const(1.0 if hit else 0.0)
        if isinstance(node, BinOp):
            dl, dr = rec(node.left), rec(node.right)
            if node.op == "+":
                return add(dl, dr)
            if node.op == "-":
                return sub(dl, dr)
            return add(mul(dl, node.right), mul(node.left, dr))
        if isinstance(node, Power):
            if node.exponent == 0:
                return Const(0.0)
            db = rec(node.base)
            if node.exponent == 1:
                return db
            lead = mul(Const(float(node.exponent)), Power(node.base, node.exponent - 1))
            return mul(lead, db)
        if isinstance(node, Call):
            da = rec(node.arg)
            if node.fn == "exp":
                outer = Call("exp", node.arg)
            elif node.fn == "sin":
                outer = Call("cos", node.arg)
            elif node.fn == "cos":
                outer = BinOp("-", Const(0.0), Call("sin", node.arg))
            else:
                # d log(u) = u' * u^-1 is outside the closed grammar; the
                # quotient is applied at evaluation time instead.
                raise ExprError("symbolic derivative of log is not supported")
            return mul(outer, da)
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


def gradient_functions(e, n: int, m: int):
    """Compiled first partials in all ambient directions.

    Returns a function (xs, zs) -> array (..., n+m) of partial-derivative
    values.  Uses the symbolic derivative; falls back to jets when the
    expression contains log.
    """
    try:
        parts = [diff(e, "x", i + 1) for i in range(n)] + [
            diff(e, "z", k + 1) for k in range(m)
        ]
        fns = [point_function(p, n, m) for p in parts]

        def apply(xs, zs):
            return np.stack([fn(xs, zs) for fn in fns], axis=-1)

        return apply
    except ExprError:
        def apply(xs, zs):
            center = np.concatenate(
                [np.asarray(xs, dtype=float), np.asarray(zs, dtype=float)], axis=-1
            )
            jet = eval_jet_at(e, center, 1, n, m)
            space = jet.space
            cols = []
            for v in range(n + m):
                alpha = tuple(1 if w == v else 0 for w in range(n + m))
                cols.append(jet.coeffs[..., space.index[alpha]])
            return np.stack(cols, axis=-1)

        return apply


def numeric_grad(e, p: Point, h: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient in ambient coordinates.

    Second-order accurate; serves as the independent cross-check for the
    jet derivatives.
    """
    n, m = p.x.shape[-1], p.z.shape[-1]
    f = compile_expr(e, n, m)
    base = np.concatenate([p.x, p.z])
    nv = n + m
    plus = np.tile(base, (nv, 1)) + h * np.eye(nv)
    minus = np.tile(base, (nv, 1)) - h * np.eye(nv)
    return (f(plus) - f(minus)) / (2.0 * h)
