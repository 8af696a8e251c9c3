"""Truncated multivariate Taylor expansions (jets) and frame derivatives.

A jet of order q at a center p stores the Taylor coefficients c_alpha =
d^alpha f(p) / alpha! for all multi-indices with |alpha| <= q, laid out
densely over a fixed enumeration ordered by total degree.  Arithmetic is
exact for every derivative the order can certify: multiplying two order-q
jets yields the order-q jet of the product, applying a vector field with
polynomial coefficients to an order-q jet yields the exact order-(q-1)
jet of the derivative, and composing with an analytic scalar function
uses the truncated univariate series of that function.

Coefficients may carry leading batch axes (shape (..., K)); the center
then has shape (..., nvars).  All operations broadcast over the batch, so
corpus sweeps evaluate thousands of jets in a handful of vectorized calls.

Orders are capped at 4 and the ambient dimension at 16; the dense tables
stay tiny under these caps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product as _iproduct
from math import comb, factorial

import numpy as np

from .errors import CarnotouError
from .group import GroupSpec

MAX_ORDER = 4
MAX_VARS = 16


class OrderTooHigh(CarnotouError):
    """Requested jet order above the supported cap."""


class OrderExhausted(CarnotouError):
    """A derivative was requested from a jet of insufficient order."""


class TooManyVariables(CarnotouError):
    """Ambient dimension beyond the dense-table cap."""


class UnknownField(CarnotouError):
    """Vector-field label not of the form X<i>, Z<k> or E."""


def _enumerate_alphas(nvars: int, max_order: int):
    out = []
    for deg in range(max_order + 1):
        out.extend(
            sorted(
                alpha
                for alpha in _iproduct(range(deg + 1), repeat=nvars)
                if sum(alpha) == deg
            )
        )
    return out


class JetSpace:
    """Cached index tables for jets in a fixed number of variables.

    Holds the degree-ordered multi-index list, per-order product tables
    (pairs (i, j) grouped by their output index for segment summation),
    per-variable differentiation maps, and the Taylor-shift table used to
    expand dense polynomials around arbitrary centers.
    """

    def __init__(self, nvars: int):
        if nvars > MAX_VARS:
            raise TooManyVariables(f"nvars = {nvars} exceeds cap {MAX_VARS}")
        self.nvars = nvars
        self.alphas = _enumerate_alphas(nvars, MAX_ORDER)
        self.index = {a: i for i, a in enumerate(self.alphas)}
        self.degrees = np.array([sum(a) for a in self.alphas])
        # counts[q] = number of multi-indices with |alpha| <= q; the first
        # counts[q] rows of the enumeration are exactly those indices.
        self.counts = [int(np.sum(self.degrees <= q)) for q in range(MAX_ORDER + 1)]
        self.factorials = np.array(
            [np.prod([factorial(e) for e in a]) for a in self.alphas], dtype=float
        )
        self._products = [self._build_products(q) for q in range(MAX_ORDER + 1)]
        self._derivs = self._build_derivs()
        self._shift = self._build_shift()
        self._pow_chain = self._build_pow_chain()

    def _build_products(self, order: int):
        K = self.counts[order]
        triples = []
        for i in range(K):
            di = self.degrees[i]
            for j in range(K):
                if di + self.degrees[j] > order:
                    continue
                out = tuple(a + b for a, b in zip(self.alphas[i], self.alphas[j]))
                triples.append((self.index[out], i, j))
        triples.sort()
        L = np.array([t[0] for t in triples], dtype=np.intp)
        I = np.array([t[1] for t in triples], dtype=np.intp)
        J = np.array([t[2] for t in triples], dtype=np.intp)
        uniq, starts = np.unique(L, return_index=True)
        return I, J, uniq, starts

    def _build_derivs(self):
        # For d/dv: output index b (|beta| <= MAX_ORDER-1) reads source
        # index of beta + e_v scaled by (beta_v + 1).
        K = self.counts[MAX_ORDER - 1]
        src = np.zeros((self.nvars, K), dtype=np.intp)
        fac = np.zeros((self.nvars, K))
        for b in range(K):
            beta = self.alphas[b]
            for v in range(self.nvars):
                up = tuple(e + (1 if w == v else 0) for w, e in enumerate(beta))
                src[v, b] = self.index[up]
                fac[v, b] = beta[v] + 1
        return src, fac

    def _build_shift(self):
        # Taylor shift: a polynomial sum_a c_a y^a recentered at p has jet
        # coefficients c'_b = sum_{a >= b} C(a, b) p^(a-b) c_a.  Entries
        # are the flat triples (a_idx, b_idx, gap_idx, binom).
        entries = []
        for ai, alpha in enumerate(self.alphas):
            ranges = [range(e + 1) for e in alpha]
            for beta in _iproduct(*ranges):
                gap = tuple(a - b for a, b in zip(alpha, beta))
                bino = float(np.prod([comb(a, b) for a, b in zip(alpha, beta)]))
                entries.append((self.index[beta], ai, self.index[gap], bino))
        entries.sort()
        return (
            np.array([e[0] for e in entries], dtype=np.intp),
            np.array([e[1] for e in entries], dtype=np.intp),
            np.array([e[2] for e in entries], dtype=np.intp),
            np.array([e[3] for e in entries]),
        )

    def _build_pow_chain(self):
        # powers[idx] = powers[parent] * coord[var]; parents precede children
        # in the degree ordering, so one forward pass fills the table.
        chain = []
        for i, alpha in enumerate(self.alphas):
            if sum(alpha) == 0:
                continue
            v = next(w for w, e in enumerate(alpha) if e > 0)
            parent = tuple(e - (1 if w == v else 0) for w, e in enumerate(alpha))
            chain.append((i, self.index[parent], v))
        return chain

    def monomial_powers(self, center: np.ndarray) -> np.ndarray:
        """center^alpha for every enumerated alpha; center shape (..., nvars)."""
        center = np.asarray(center, dtype=float)
        out = np.ones(center.shape[:-1] + (len(self.alphas),))
        for idx, parent, v in self._pow_chain:
            out[..., idx] = out[..., parent] * center[..., v]
        return out


@lru_cache(maxsize=None)
def jet_space(nvars: int) -> JetSpace:
    return JetSpace(nvars)


@dataclass
class Jet:
    """Order-q truncated Taylor expansion around a center.

    coeffs[..., i] is the Taylor coefficient of offset^alpha_i; the batch
    axes of coeffs and center must agree.
    """

    space: JetSpace
    order: int
    center: np.ndarray
    coeffs: np.ndarray

    # make ndarray * Jet defer to our reflected operators
    __array_ufunc__ = None

    @property
    def value(self):
        return self.coeffs[..., 0]

    def derivative(self, alpha) -> np.ndarray:
        """Partial-derivative value d^alpha f(center) for |alpha| <= order."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise OrderExhausted(
                f"derivative of total degree {sum(alpha)} from an order-"
                f"{self.order} jet"
            )
        i = self.space.index[alpha]
        return self.coeffs[..., i] * self.space.factorials[i]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExhausted(f"cannot extend order {self.order} to {order}")
        if order == self.order:
            return self
        K = self.space.counts[order]
        return Jet(self.space, order, self.center, self.coeffs[..., :K])

    def __neg__(self) -> "Jet":
        return Jet(self.space, self.order, self.center, -self.coeffs)

    def __add__(self, other):
        if isinstance(other, Jet):
            q = min(self.order, other.order)
            a, b = self.truncate(q), other.truncate(q)
            return Jet(self.space, q, self.center, a.coeffs + b.coeffs)
        out = np.array(self.coeffs, copy=True)
        out[..., 0] = out[..., 0] + other
        return Jet(self.space, self.order, self.center, out)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if other.ndim > 0:
                # batch-shaped scalars broadcast over the coefficient axis
                other = other[..., None]
            return Jet(self.space, self.order, self.center, self.coeffs * other)
        q = min(self.order, other.order)
        a, b = self.truncate(q), other.truncate(q)
        I, J, uniq, starts = self.space._products[q]
        vals = a.coeffs[..., I] * b.coeffs[..., J]
        segs = np.add.reduceat(vals, starts, axis=-1)
        out = np.zeros(vals.shape[:-1] + (self.space.counts[q],))
        out[..., uniq] = segs
        return Jet(self.space, q, self.center, out)

    __rmul__ = __mul__

    def deriv(self, var: int) -> "Jet":
        """Exact jet of the partial derivative in ambient variable var."""
        if self.order < 1:
            raise OrderExhausted("cannot differentiate an order-0 jet")
        q = self.order - 1
        src, fac = self.space._derivs
        K = self.space.counts[q]
        out = self.coeffs[..., src[var, :K]] * fac[var, :K]
        return Jet(self.space, q, self.center, out)

    def compose_series(self, series: np.ndarray) -> "Jet":
        """Substitute this jet into a univariate truncated series.

        series has shape (order+1, ...batch) holding u^(d)(value)/d!; the
        result is the jet of u(f) to the same order, evaluated by Horner
        in the nilpotent part of f.
        """
        w = np.array(self.coeffs, copy=True)
        w[..., 0] = 0.0
        wj = Jet(self.space, self.order, self.center, w)
        acc = constant_jet(self.space, series[self.order], self.center, self.order)
        for d in range(self.order - 1, -1, -1):
            acc = acc * wj + series[d]
        return acc


def constant_jet(space: JetSpace, value, center, order: int) -> Jet:
    center = np.asarray(center, dtype=float)
    value = np.asarray(value, dtype=float)
    batch = np.broadcast_shapes(center.shape[:-1], value.shape)
    coeffs = np.zeros(batch + (space.counts[order],))
    coeffs[..., 0] = value
    return Jet(space, order, center, coeffs)


def variable_jet(space: JetSpace, var: int, center, order: int) -> Jet:
    """Jet of the coordinate function y_var around the center."""
    center = np.asarray(center, dtype=float)
    coeffs = np.zeros(center.shape[:-1] + (space.counts[order],))
    coeffs[..., 0] = center[..., var]
    if order >= 1:
        e = tuple(1 if w == var else 0 for w in range(space.nvars))
        coeffs[..., space.index[e]] = 1.0
    return Jet(space, order, center, coeffs)


def polynomial_jet(space: JetSpace, poly_coeffs, center, order: int) -> Jet:
    """Exact jet of a dense polynomial sum_a poly_coeffs[..., a] y^alpha_a.

    poly_coeffs runs over the full degree <= MAX_ORDER enumeration; the
    Taylor-shift table recenters it in one vectorized pass.
    """
    if order > MAX_ORDER:
        raise OrderTooHigh(f"order {order} exceeds cap {MAX_ORDER}")
    center = np.asarray(center, dtype=float)
    poly_coeffs = np.asarray(poly_coeffs, dtype=float)
    powers = space.monomial_powers(center)
    bidx, aidx, gidx, bino = space._shift
    K = space.counts[order]
    keep = bidx < K
    vals = bino[keep] * poly_coeffs[..., aidx[keep]] * powers[..., gidx[keep]]
    bk = bidx[keep]
    uniq, starts = np.unique(bk, return_index=True)
    segs = np.add.reduceat(vals, starts, axis=-1)
    out = np.zeros(vals.shape[:-1] + (K,))
    out[..., uniq] = segs
    return Jet(space, order, center, out)


def parse_field(field) -> tuple:
    """Normalize a field label: "X2" -> ("X", 2), "Z1" -> ("Z", 1), "E"."""
    if isinstance(field, tuple):
        kind, idx = field
        return (str(kind).upper(), int(idx))
    s = str(field).strip().upper()
    if s == "E":
        return ("E", 0)
    if len(s) >= 2 and s[0] in "XZ" and s[1:].isdigit():
        return (s[0], int(s[1:]))
    raise UnknownField(f"field must be X<i>, Z<k> or E, got {field!r}")


def _affine_jet(space, value, lin_vars, lin_coeffs, center, order):
    """Jet of an affine function value + sum lin_coeffs[j] * offset_var[j]."""
    coeffs = np.zeros(np.asarray(center).shape[:-1] + (space.counts[order],))
    coeffs[..., 0] = value
    if order >= 1:
        for v, c in zip(lin_vars, lin_coeffs):
            e = tuple(1 if w == v else 0 for w in range(space.nvars))
            coeffs[..., space.index[e]] += c
    return Jet(space, order, center, coeffs)


def vf_apply(spec: GroupSpec, field, jet: Jet) -> Jet:
    """Apply a left-invariant frame field (or E) to a jet.

    The coefficients of X_i are affine in x, so the order drops by exactly
    one and the result is exact to its stated order.
    """
    kind, idx = parse_field(field)
    if jet.order < 1:
        raise OrderExhausted("vector field application needs order >= 1")
    n, m = spec.n, spec.m
    space = jet.space
    q = jet.order - 1
    center = jet.center
    if kind == "Z":
        if not 1 <= idx <= m:
            raise UnknownField(f"Z{idx} out of range for m = {m}")
        return jet.deriv(n + idx - 1)
    if kind == "X":
        if not 1 <= idx <= n:
            raise UnknownField(f"X{idx} out of range for n = {n}")
        res = jet.deriv(idx - 1)
        cx = center[..., :n]
        for k in range(m):
            row = spec.B[k, idx - 1, :]
            if not np.any(row):
                continue
            val = -0.5 * np.einsum("j,...j->...", row, cx)
            coeff = _affine_jet(
                space, val, range(n), -0.5 * row, center, q
            )
            res = res + coeff * jet.deriv(n + k)
        return res
    # E = sum_i x_i d/dx_i + 2 sum_k z_k d/dz_k
    res = None
    for i in range(n):
        term = variable_jet(space, i, center, q) * jet.deriv(i)
        res = term if res is None else res + term
    for k in range(m):
        term = variable_jet(space, n + k, center, q) * jet.deriv(n + k)
        res = res + 2.0 * term
    return res


def bracket(spec: GroupSpec, field_a, field_b, jet: Jet) -> Jet:
    """Commutator [A, B] applied to a jet; costs two orders."""
    if jet.order < 2:
        raise OrderExhausted("bracket application needs order >= 2")
    ab = vf_apply(spec, field_a, vf_apply(spec, field_b, jet))
    ba = vf_apply(spec, field_b, vf_apply(spec, field_a, jet))
    return ab - ba
