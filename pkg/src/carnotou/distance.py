"""Control distance of the horizontal gradient, exact on the Heisenberg group.

A horizontal path lifts a planar curve; its vertical displacement is the
B-weighted swept area and its length is the Euclidean length of the
horizontal trace.  On the Heisenberg group the minimizers are circular
arcs, so d(0, (x, y, z)) reduces to one scalar equation: with chord
r = sqrt(x^2 + y^2) and area |z|, the arc angle theta solves

    (theta - sin theta) / (4 (1 - cos theta)) = |z| / r^2,

and d = r theta / (2 sin(theta/2)).  Degenerate branches: z = 0 gives the
straight chord r, r = 0 gives the full circle sqrt(4 pi |z|).

Other step-2 groups get certified two-sided bounds instead of a formula:
d >= ||x|| (projection is 1-Lipschitz) and d >= sqrt(2 |z_k| / ||B_k||)
(area swept at speed at most ||B_k|| ||x|| <= ||B_k|| * length), while an
explicit path - straight segment plus coordinate-plane circles chosen to
close the vertical error - gives the upper bound.  Both bounds are
homogeneous of degree 1 under the dilations, so scale-free constants
against the quasi-norm N(g) = (||x||^4 + ||z||^2)^{1/4} are calibrated
once per group on the N-sphere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CarnotouError
from .group import GroupSpec, Point, heisenberg, is_heisenberg, mul_arrays
from .reports import Estimate, mean_estimate
from .rng import derive_rng
from .simulate import SimConfig, sample_invariant

HEIS_EXACT = "heisenberg-exact"
HOMOGENEOUS = "homogeneous-bounds"


class NewtonNoConvergence(CarnotouError):
    """Arc-angle solve failed even after the bisection fallback."""


class NotHeisenberg(CarnotouError):
    """Exact distance is implemented for the Heisenberg layout only."""


class HeavyTailWarning(UserWarning):
    """A single sample dominates an exponential-moment estimate."""


@dataclass(frozen=True)
class DistanceResult:
    """Distance value or certified interval, tagged with its method."""

    lower: float
    upper: float
    method: str

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise CarnotouError(
                f"lower bound {self.lower} exceeds upper bound {self.upper}"
            )

    @property
    def exact(self) -> bool:
        return self.method == HEIS_EXACT

    @property
    def value(self) -> float:
        if not self.exact:
            raise CarnotouError("interval result has no single value")
        return self.lower


def _arc_ratio(theta):
    # half-angle form: 1 - cos = 2 sin^2(theta/2) stays accurate near 2 pi
    s2 = np.sin(0.5 * theta)
    return (theta - np.sin(theta)) / (8.0 * s2**2)


def _arc_ratio_deriv(theta):
    s2 = np.sin(0.5 * theta)
    c2 = np.cos(0.5 * theta)
    denom = 8.0 * s2**2
    return (1.0 - np.cos(theta)) / denom - (theta - np.sin(theta)) * (
        8.0 * s2 * c2
    ) / denom**2


def solve_arc_angle(zeta: np.ndarray) -> np.ndarray:
    """Arc angle theta in (0, 2 pi) with _arc_ratio(theta) = zeta (> 0).

    60 bisection steps shrink the bracket to machine width, then Newton
    polishes from the midpoint (safeguarded to stay inside the bracket).
    Vectorized; raises only if the residual stays large while the bracket
    also failed to close, which no representable zeta triggers.
    """
    zeta = np.asarray(zeta, dtype=float)
    lo = np.full(zeta.shape, 1e-9)
    hi = np.full(zeta.shape, 2.0 * np.pi - 1e-9)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        high = _arc_ratio(mid) > zeta
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    theta = 0.5 * (lo + hi)
    for _ in range(50):
        resid = _arc_ratio(theta) - zeta
        converged = np.abs(resid) <= 1e-12 * (1.0 + np.abs(zeta))
        if np.all(converged):
            break
        cand = theta - resid / _arc_ratio_deriv(theta)
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        theta = np.where(
            converged, theta, np.where(bad, 0.5 * (lo + hi), cand)
        )
    resid = np.abs(_arc_ratio(theta) - zeta)
    ok = (resid <= 1e-9 * (1.0 + np.abs(zeta))) | (hi - lo <= 1e-12)
    if not np.all(ok):
        raise NewtonNoConvergence("arc-angle residual above tolerance")
    return theta


def heis_distance_origin(xs, zs) -> np.ndarray:
    """Vectorized d(0, (x, z)) on the Heisenberg group."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    r = np.hypot(xs[..., 0], xs[..., 1])
    az = np.abs(zs[..., 0])
    out = np.empty(r.shape)
    flat_r = r.reshape(-1)
    flat_z = az.reshape(-1)
    flat = np.empty(flat_r.shape)
    planar = flat_z == 0.0
    with np.errstate(divide="ignore"):
        zeta = np.where(planar, 0.0, flat_z / np.where(planar, 1.0, flat_r) ** 2)
    # beyond zeta ~ 1e12 the arc is a full circle to relative 1e-6 and the
    # generic formula is ill-conditioned; use the polar branch there
    polar = (~planar) & ((flat_r == 0.0) | (zeta > 1e12))
    generic = ~planar & ~polar
    flat[planar] = flat_r[planar]
    flat[polar] = np.sqrt(4.0 * np.pi * flat_z[polar])
    if np.any(generic):
        rr = flat_r[generic]
        theta = solve_arc_angle(flat_z[generic] / rr**2)
        flat[generic] = rr * theta / (2.0 * np.sin(0.5 * theta))
    out.reshape(-1)[:] = flat
    return out


def heis_distance(p: Point, q: Point) -> float:
    """Exact Carnot-Caratheodory distance between two Heisenberg points."""
    px, pz = np.atleast_1d(p.x), np.atleast_1d(p.z)
    qx, qz = np.atleast_1d(q.x), np.atleast_1d(q.z)
    if px.shape[-1] != 2 or pz.shape[-1] != 1:
        raise NotHeisenberg(
            f"expected layout n=2, m=1, got n={px.shape[-1]}, m={pz.shape[-1]}"
        )
    spec = heisenberg()
    gx, gz = mul_arrays(spec, -px, -pz, qx, qz)
    return float(heis_distance_origin(gx[None, :], gz[None, :])[0])


def _matrix_2norms(B: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.norm(Bk, 2) for Bk in B])


def _pair_columns(spec: GroupSpec):
    """Structure vectors gamma_(ij) for i < j, as columns of an m x P matrix."""
    n, m = spec.n, spec.m
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    G = np.empty((m, len(pairs)))
    for col, (i, j) in enumerate(pairs):
        G[:, col] = spec.B[:, i, j]
    return G, pairs


def certified_lower(spec: GroupSpec, xs, zs) -> np.ndarray:
    """Pointwise certified lower bound for d(0, (x, z))."""
    xs = np.asarray(xs, dtype=float)
    zs = np.asarray(zs, dtype=float)
    norms = _matrix_2norms(spec.B)
    horiz = np.linalg.norm(xs, axis=-1)
    vert = np.sqrt(2.0 * np.abs(zs) / norms)
    return np.maximum(horiz, np.max(vert, axis=-1))


def certified_upper(spec: GroupSpec, xs, zs) -> np.ndarray:
    """Pointwise certified upper bound: straight segment plus closing circles."""
    xs = np.asarray(xs, dtype=float)
    zs = np.asarray(zs, dtype=float)
    G, _ = _pair_columns(spec)
    pinv = np.linalg.pinv(G)
    areas = np.einsum("pk,...k->...p", pinv, zs)
    return np.linalg.norm(xs, axis=-1) + np.sum(
        2.0 * np.sqrt(np.pi * np.abs(areas)), axis=-1
    )


def quasi_norm(xs, zs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    zs = np.asarray(zs, dtype=float)
    return (np.sum(xs**2, axis=-1) ** 2 + np.sum(zs**2, axis=-1)) ** 0.25


_CALIBRATION: dict = {}


def calibration_constants(spec: GroupSpec) -> tuple[float, float]:
    """Scale-free constants (c1, c2) with c1 N <= d <= c2 N.

    Extremes of the certified bounds over a seeded sample of the N-sphere
    (both bounds are homogeneous, so directions suffice), cushioned by 1%.
    Cached per group layout.
    """
    key = (spec.n, spec.m, spec.B.tobytes())
    if key in _CALIBRATION:
        return _CALIBRATION[key]
    rng = derive_rng(0, "distance-calibration", spec.n, spec.m)
    raw_x = rng.standard_normal((4096, spec.n))
    raw_z = rng.standard_normal((4096, spec.m))
    N = quasi_norm(raw_x, raw_z)
    xs = raw_x / N[:, None]
    zs = raw_z / (N**2)[:, None]
    lo = certified_lower(spec, xs, zs)
    hi = certified_upper(spec, xs, zs)
    c1 = 0.99 * float(np.min(lo))
    c2 = 1.01 * float(np.max(hi))
    _CALIBRATION[key] = (c1, c2)
    return c1, c2


def homogeneous_bounds(spec: GroupSpec, p: Point, q: Point) -> DistanceResult:
    """Certified interval around d(p, q) from the quasi-norm calibration."""
    px, pz = np.atleast_1d(p.x), np.atleast_1d(p.z)
    qx, qz = np.atleast_1d(q.x), np.atleast_1d(q.z)
    gx, gz = mul_arrays(spec, -px, -pz, qx, qz)
    c1, c2 = calibration_constants(spec)
    N = float(quasi_norm(gx, gz))
    return DistanceResult(c1 * N, c2 * N, HOMOGENEOUS)


def distance(spec: GroupSpec, p: Point, q: Point) -> DistanceResult:
    """Exact value on Heisenberg, calibrated interval elsewhere."""
    if is_heisenberg(spec):
        d = heis_distance(p, q)
        return DistanceResult(d, d, HEIS_EXACT)
    return homogeneous_bounds(spec, p, q)


def _squared_distances(spec: GroupSpec, cfg: SimConfig, s: float, tag: str):
    """Paired invariant-measure samples and their d^2 values (or bounds)."""
    a = sample_invariant(spec, s, cfg, rng=derive_rng(cfg.seed, tag, "a", float(s)))
    b = sample_invariant(spec, s, cfg, rng=derive_rng(cfg.seed, tag, "b", float(s)))
    gx, gz = mul_arrays(spec, -a.xs, -a.zs, b.xs, b.zs)
    if is_heisenberg(spec):
        d = heis_distance_origin(gx, gz)
        return d**2, d**2
    lo = certified_lower(spec, gx, gz)
    hi = certified_upper(spec, gx, gz)
    return lo**2, hi**2


def estimate_D2(spec: GroupSpec, s: float, cfg: SimConfig) -> Estimate:
    """Mean squared distance between independent invariant-measure draws.

    Exact distances on Heisenberg; on other groups the conservative upper
    bound is averaged (estimate_D2_interval exposes both sides).
    """
    _, hi2 = _squared_distances(spec, cfg, s, "d2")
    return mean_estimate(hi2)


def estimate_D2_interval(
    spec: GroupSpec, s: float, cfg: SimConfig
) -> tuple[Estimate, Estimate]:
    lo2, hi2 = _squared_distances(spec, cfg, s, "d2")
    return mean_estimate(lo2), mean_estimate(hi2)


def _warn_heavy_tail(terms: np.ndarray, label: str):
    total = float(np.sum(terms))
    peak = float(np.max(terms))
    if total > 0.0 and peak > 0.1 * total:
        warnings.warn(
            f"{label}: single sample contributes {100.0 * peak / total:.1f}% "
            "of the exponential-moment sum; estimate is tail-dominated",
            HeavyTailWarning,
            stacklevel=3,
        )


def estimate_exp_integrability(
    spec: GroupSpec, s: float, c0: float, cfg: SimConfig
) -> Estimate:
    """Monte Carlo mean of exp(c0 d^2) over independent mu-pairs.

    Emits HeavyTailWarning when one sample carries more than 10% of the
    sum; such estimates say "no finite-moment evidence", not a value.
    """
    if not c0 > 0.0:
        raise CarnotouError(f"c0 must be > 0, got {c0}")
    _, hi2 = _squared_distances(spec, cfg, s, "expint")
    terms = np.exp(c0 * hi2)
    _warn_heavy_tail(terms, f"exp-integrability c0={c0}")
    return mean_estimate(terms)
