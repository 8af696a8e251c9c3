"""Curvature constants of a step-2 group and the induced decay rates.

Two spectral quantities of the structure matrices drive every estimate:

    kappa = sup_{|x| = 1} sum_{j,k} ( sum_i B^(k)[i, j] x_i )^2
          = largest eigenvalue of M = sum_k B^(k) B^(k)^T,

    rho2  = 1/4 * inf_{|z| = 1} sum_{i,j} ( sum_k z_k B^(k)[i, j] )^2
          = 1/4 * smallest eigenvalue of the Frobenius Gram matrix
            N[k, l] = <B^(k), B^(l)>_F.

Eigenvalues come from a cyclic Jacobi sweep (the matrices are tiny and
symmetric); an independent oracle maximizes the defining quadratic forms
directly over sampled sphere directions with power-iteration refinement,
never assembling M or N.

From a constant tuple (rho1, rho2, rho3, kappa) the interpolation weight
eps > kappa/rho1 yields the exponential rate

    lambda_eps = min( rho1 - kappa/eps, rho2/eps + rho3 )

and the convergence prefactor C = e (1 + 2 lambda_eps eps / rho2)
(1 + 2 kappa / rho2).  For the Ornstein-Uhlenbeck drift -s E the tuple
defaults to (rho1, rho3) = (s, 2s): the drift adds s Gamma to Gamma2 and
2 s GammaZ to Gamma2Z through the dilation weights, which is the split
verified exactly by the jet identity suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import e as _E

import numpy as np

from .errors import CarnotouError
from .group import GroupSpec


class RateNotPositive(CarnotouError):
    """lambda_eps <= 0 at the requested eps."""


class NoPositiveRate(CarnotouError):
    """No eps can give a positive rate (rho1 <= 0)."""


class JacobiNoConvergence(CarnotouError):
    """Off-diagonal mass failed to fall below tolerance."""


@dataclass(frozen=True)
class CDConstants:
    """Constants of the curvature-dimension inequality.

    The inequality reads, for every eps > 0,

        Gamma2 + eps Gamma2Z >=
            (rho1 - kappa/eps) Gamma + (rho2 + rho3 eps) GammaZ.
    """

    rho1: float
    rho2: float
    rho3: float
    kappa: float

    def __post_init__(self):
        if not self.rho2 > 0.0:
            raise CarnotouError(f"rho2 must be > 0, got {self.rho2}")
        if not self.kappa >= 0.0:
            raise CarnotouError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class RatePlan:
    """A chosen eps with its rate and prefactor.

    bound = ln(prefactor) - 2 * lam * t is the log of the decay estimate
    the plan optimizes at its target time.
    """

    epsilon: float
    lam: float
    prefactor: float


def jacobi_eigenvalues(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm falls below tol times
    the matrix norm.  Returns eigenvalues in ascending order.
    """
    A = np.array(A, dtype=float, copy=True)
    d = A.shape[0]
    if d == 1:
        return A[0, :1].copy()
    norm = max(np.linalg.norm(A), 1e-300)

    def offdiag(mat):
        # strict upper triangle only: no cancellation near convergence
        return np.sqrt(2.0 * np.sum(np.triu(mat, 1) ** 2))

    for _ in range(max_sweeps):
        off = offdiag(A)
        if off <= tol * norm:
            return np.sort(np.diag(A))
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1.0e150:
                    # theta**2 would overflow; use the small-t asymptote
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
    off = offdiag(A)
    raise JacobiNoConvergence(
        f"off-diagonal norm {off:.3e} above tolerance after {max_sweeps} sweeps"
    )


def kappa(spec: GroupSpec) -> float:
    """Largest eigenvalue of sum_k B^(k) B^(k)^T."""
    M = np.einsum("kij,klj->il", spec.B, spec.B)
    return float(jacobi_eigenvalues(M)[-1])


def rho2(spec: GroupSpec) -> float:
    """Quarter of the smallest eigenvalue of the Frobenius Gram matrix."""
    N = np.einsum("kij,lij->kl", spec.B, spec.B)
    return 0.25 * float(jacobi_eigenvalues(N)[0])


def _horizontal_form(spec: GroupSpec, xs: np.ndarray) -> np.ndarray:
    """sum_{j,k} (sum_i B^(k)[i,j] x_i)^2 per row of xs, via the raw sums."""
    y = np.einsum("kij,...i->...kj", spec.B, xs)
    return np.sum(y**2, axis=(-2, -1))


def _horizontal_matvec(spec: GroupSpec, x: np.ndarray) -> np.ndarray:
    y = np.einsum("kij,i->kj", spec.B, x)
    return np.einsum("kij,kj->i", spec.B, y)


def _vertical_form(spec: GroupSpec, zs: np.ndarray) -> np.ndarray:
    """sum_{i,j} (sum_k z_k B^(k)[i,j])^2 per row of zs."""
    mats = np.einsum("...k,kij->...ij", zs, spec.B)
    return np.sum(mats**2, axis=(-2, -1))


def _vertical_matvec(spec: GroupSpec, z: np.ndarray) -> np.ndarray:
    mat = np.einsum("k,kij->ij", z, spec.B)
    return np.einsum("kij,ij->k", spec.B, mat)


def sphere_extreme_oracle(
    spec: GroupSpec,
    which: str,
    samples: int = 100000,
    seed: int = 0,
    refine_iters: int = 400,
) -> float:
    """Extremize the defining quadratic form over sampled sphere directions.

    which = "kappa" maximizes the horizontal form over the unit sphere in
    R^n; which = "rho2" minimizes the vertical form over the unit sphere
    in R^m and applies the 1/4 factor.  The best sampled direction is
    refined by (shifted) power iteration whose matrix-vector products are
    evaluated through the structure-constant sums directly, keeping this
    route independent of the eigenvalue assembly.
    """
    rng = np.random.default_rng(seed)
    if which == "kappa":
        dim, form, matvec = spec.n, _horizontal_form, _horizontal_matvec
        maximize = True
    elif which == "rho2":
        dim, form, matvec = spec.m, _vertical_form, _vertical_matvec
        maximize = False
    else:
        raise ValueError(f"which must be 'kappa' or 'rho2', got {which!r}")
    if dim == 1:
        v = np.ones(1)
        val = float(form(spec, v))
        return val if maximize else 0.25 * val
    dirs = rng.normal(size=(samples, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vals = form(spec, dirs)
    best = dirs[np.argmax(vals) if maximize else np.argmin(vals)]
    if maximize:
        # plain power iteration on the positive semidefinite form
        v = best
        for _ in range(refine_iters):
            w = _horizontal_matvec(spec, v)
            nw = np.linalg.norm(w)
            if nw < 1e-300:
                break
            v = w / nw
        return float(form(spec, v))
    # smallest eigenvalue: power-iterate on shift*I - N
    shift = float(np.max(vals)) + 1.0
    v = best
    for _ in range(refine_iters):
        w = shift * v - _vertical_matvec(spec, v)
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            break
        v = w / nw
    return 0.25 * float(form(spec, v))


def carnot_ou_constants(spec: GroupSpec, s: float = 1.0) -> CDConstants:
    """Default constant tuple for the drift -s E on the given group."""
    return CDConstants(rho1=s, rho2=rho2(spec), rho3=2.0 * s, kappa=kappa(spec))


def lambda_eps(c: CDConstants, eps: float) -> float:
    """Exponential rate at weight eps; positive iff eps > kappa/rho1."""
    if not eps > 0.0:
        raise CarnotouError(f"eps must be > 0, got {eps}")
    return min(c.rho1 - c.kappa / eps, c.rho2 / eps + c.rho3)


def prefactor_C(c: CDConstants, eps: float) -> float:
    """Convergence prefactor e (1 + 2 lam eps / rho2)(1 + 2 kappa / rho2)."""
    lam = lambda_eps(c, eps)
    if not lam > 0.0:
        raise RateNotPositive(
            f"lambda_eps = {lam:.6g} <= 0 at eps = {eps}; need eps > kappa/rho1"
        )
    return _E * (1.0 + 2.0 * lam * eps / c.rho2) * (1.0 + 2.0 * c.kappa / c.rho2)


def harnack_coefficient(c: CDConstants) -> float:
    """1 + 2 kappa / rho2: the distance-squared weight in Harnack bounds."""
    return 1.0 + 2.0 * c.kappa / c.rho2


def decay_objective(c: CDConstants, eps: float, t: float) -> float:
    """ln C(eps) - 2 lambda_eps t, the log of the decay estimate at t."""
    return float(np.log(prefactor_C(c, eps)) - 2.0 * lambda_eps(c, eps) * t)


def optimal_eps_for_time(c: CDConstants, t: float) -> RatePlan:
    """Minimize ln C(eps) - 2 lambda_eps(eps) t over admissible eps.

    Deterministic: a log-spaced grid over (kappa/rho1, ~1e6 kappa/rho1]
    locates the basin, then golden-section search refines it.
    """
    if not c.rho1 > 0.0:
        raise NoPositiveRate(f"rho1 = {c.rho1} <= 0 admits no positive rate")
    if not t > 0.0:
        raise CarnotouError(f"time must be > 0, got {t}")
    lo_edge = c.kappa / c.rho1 if c.kappa > 0.0 else 0.0
    start = lo_edge * (1.0 + 1e-9) + 1e-12
    grid = np.exp(np.linspace(np.log(start), np.log(max(start * 1e6, 1.0)), 400))
    vals = np.array([decay_objective(c, g, t) for g in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.log(lo), np.log(hi)
    c1 = b - phi * (b - a)
    c2 = a + phi * (b - a)
    f1 = decay_objective(c, np.exp(c1), t)
    f2 = decay_objective(c, np.exp(c2), t)
    for _ in range(200):
        if b - a < 1e-12 * (1.0 + abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = decay_objective(c, np.exp(c1), t)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = decay_objective(c, np.exp(c2), t)
    eps = float(np.exp((a + b) / 2.0))
    return RatePlan(
        epsilon=eps, lam=lambda_eps(c, eps), prefactor=prefactor_C(c, eps)
    )
