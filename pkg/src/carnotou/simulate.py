"""Samplers and Monte Carlo estimators for the confined diffusion.

Horizontal Brownian motion is simulated coordinate-wise (increments of
variance 2 dt, so the generator is the sub-Laplacian) while the vertical
part accumulates the discretized area integrals z_k += 1/2 x^T B^(k) dx,
the same twist that defines the group product.  The semigroup Q_t of
L = Delta_H - s E is realized two independent ways:

  * a time change of the heat flow composed with a dilation,
        Q_t f(x) = E f(dilate(e^{-st}, x) . g),   g ~ heat((1-e^{-2st})/(2s)),
  * direct Euler-Maruyama integration of dx = -s x dt + sqrt(2) dB with
    the matching vertical drift -2 s z dt.

Their agreement within confidence intervals is the sharpest convention
test in the package and is enforced by the test suite.  The invariant
measure is the heat law at time 1/(2s).

All estimators draw from named counter-based streams (see rng), chunk
outer loops at a fixed width, and therefore reproduce bit-identically
across reruns and thread counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import carnot_ou_constants, lambda_eps
from .errors import CarnotouError
from .expr import parse_expr, point_function
from .gamma import gamma_values, gammaZ_values
from .group import GroupSpec, Point, frame_at, mul_arrays
from .reports import Estimate, exact_estimate, make_report, mean_estimate
from .rng import Z95, derive_rng


class NegativeTime(CarnotouError):
    """Simulation horizons must be >= 0."""


class NonPositiveDrift(CarnotouError):
    """Invariant-measure sampling needs drift strength s > 0."""


class NonPositiveFunction(CarnotouError):
    """Entropy-type functionals need strictly positive integrands."""


class InvalidSimConfig(CarnotouError):
    """Simulation configuration violated an invariant."""


class TimesNotIncreasing(CarnotouError):
    """Decay curves require strictly increasing time grids."""


@dataclass(frozen=True)
class SimConfig:
    """Reproducible Monte Carlo configuration.

    paths is the (outer) ensemble size; steps_per_unit_time scales the
    Euler grid with the integration horizon; s is the drift strength a
    scenario runs with unless an operation takes s explicitly.
    """

    seed: int
    paths: int = 10000
    steps_per_unit_time: int = 256
    s: float = 1.0

    def __post_init__(self):
        if self.paths < 1:
            raise InvalidSimConfig(f"paths must be >= 1, got {self.paths}")
        if self.steps_per_unit_time < 16:
            raise InvalidSimConfig(
                f"steps_per_unit_time must be >= 16, got {self.steps_per_unit_time}"
            )
        if not self.s > 0.0:
            raise InvalidSimConfig(f"drift strength must be > 0, got {self.s}")


@dataclass(frozen=True)
class PathEnsemble:
    """Endpoint cloud with its provenance (config and time horizon)."""

    xs: np.ndarray
    zs: np.ndarray
    config: SimConfig
    t: float

    def __len__(self) -> int:
        return self.xs.shape[0]

    def __getitem__(self, i: int) -> Point:
        return Point(self.xs[i].copy(), self.zs[i].copy())

    def points(self):
        for i in range(len(self)):
            yield self[i]


# Fixed outer-chunk width for nested estimators.  Part of the algorithm,
# not a tuning knob: stream derivation keys on the chunk start index, so
# changing this would change the numbers.
_CHUNK = 16


def as_point_function(spec: GroupSpec, f):
    """Accept an expression string, a parsed expression, or (xs, zs) callable."""
    if isinstance(f, str):
        f = parse_expr(f, n=spec.n, m=spec.m)
    if callable(f):
        return f
    return point_function(f, spec.n, spec.m)


def _nsteps(t: float, cfg: SimConfig) -> int:
    return max(1, int(np.ceil(t * cfg.steps_per_unit_time)))


def _simulate_heat(spec: GroupSpec, t: float, npaths: int, nsteps: int, rng):
    """Endpoint arrays of the horizontal Brownian motion started at 0."""
    x = np.zeros((npaths, spec.n))
    z = np.zeros((npaths, spec.m))
    if t == 0.0:
        return x, z
    dt = t / nsteps
    scale = np.sqrt(2.0 * dt)
    for _ in range(nsteps):
        dx = scale * rng.standard_normal((npaths, spec.n))
        z += 0.5 * np.einsum("pi,kij,pj->pk", x, spec.B, dx)
        x += dx
    return x, z


def sample_heat(
    spec: GroupSpec, t: float, cfg: SimConfig, *, rng=None, paths: int | None = None
) -> PathEnsemble:
    """Approximate-in-law sample of the heat kernel at time t from the origin.

    The x-marginal is exact Brownian; the area accumulation carries the
    O(dt) weak bias of the Euler grid.  t = 0 returns the origin exactly.
    """
    t = float(t)
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got {t}")
    npaths = cfg.paths if paths is None else int(paths)
    if rng is None:
        rng = derive_rng(cfg.seed, "heat", t)
    nsteps = _nsteps(t, cfg) if t > 0.0 else 0
    xs, zs = _simulate_heat(spec, t, npaths, nsteps, rng)
    return PathEnsemble(xs, zs, cfg, t)


def sample_invariant(
    spec: GroupSpec, s: float, cfg: SimConfig, *, rng=None, paths: int | None = None
) -> PathEnsemble:
    """Sample of the invariant measure: the heat law at time 1/(2s)."""
    if not s > 0.0:
        raise NonPositiveDrift(f"drift strength must be > 0, got {s}")
    if rng is None:
        rng = derive_rng(cfg.seed, "invariant", float(s))
    return sample_heat(spec, 1.0 / (2.0 * s), cfg, rng=rng, paths=paths)


def mehler_time_scale(s: float, t: float) -> tuple[float, float]:
    """Heat time a(t) and dilation scale c(t) of the semigroup time change.

    a(t) = (1 - e^{-2st})/(2s) (continuously a(t) = t at s = 0) and
    c(t) = e^{-st}; derived by generator matching and cross-validated
    against the direct integrator.
    """
    if s == 0.0:
        return float(t), 1.0
    return float(-np.expm1(-2.0 * s * t) / (2.0 * s)), float(np.exp(-s * t))


def _dilated(spec: GroupSpec, c: float, x: Point):
    return c * np.atleast_1d(x.x), c * c * np.atleast_1d(x.z)


def mehler_qt(
    spec: GroupSpec, s: float, f, t: float, x: Point, cfg: SimConfig
) -> Estimate:
    """Q_t f(x) by averaging f over dilated-and-translated heat endpoints."""
    t = float(t)
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got {t}")
    if s < 0.0:
        raise NonPositiveDrift(f"drift strength must be >= 0, got {s}")
    fn = as_point_function(spec, f)
    cx, cz = np.atleast_1d(x.x), np.atleast_1d(x.z)
    if t == 0.0:
        return exact_estimate(fn(cx[None, :], cz[None, :])[0])
    a, c = mehler_time_scale(s, t)
    ens = sample_heat(spec, a, cfg, rng=derive_rng(cfg.seed, "mehler", float(s), t))
    dx, dz = _dilated(spec, c, x)
    wx, wz = mul_arrays(spec, dx[None, :], dz[None, :], ens.xs, ens.zs)
    return mean_estimate(fn(wx, wz))


def sde_qt(
    spec: GroupSpec, s: float, f, t: float, x: Point, cfg: SimConfig
) -> Estimate:
    """Q_t f(x) by Euler-Maruyama integration of the confined diffusion.

    dx = -s x dt + sqrt(2) dB,  dz_k = -2 s z_k dt + 1/2 x^T B^(k) sqrt(2) dB;
    no Ito-Stratonovich correction arises because the B^(k) have zero
    diagonal.  Must agree with mehler_qt within confidence intervals.
    """
    t = float(t)
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got {t}")
    if s < 0.0:
        raise NonPositiveDrift(f"drift strength must be >= 0, got {s}")
    fn = as_point_function(spec, f)
    x0, z0 = np.atleast_1d(x.x), np.atleast_1d(x.z)
    if t == 0.0:
        return exact_estimate(fn(x0[None, :], z0[None, :])[0])
    rng = derive_rng(cfg.seed, "sde", float(s), t)
    nsteps = _nsteps(t, cfg)
    dt = t / nsteps
    scale = np.sqrt(2.0 * dt)
    X = np.broadcast_to(x0, (cfg.paths, spec.n)).copy()
    Z = np.broadcast_to(z0, (cfg.paths, spec.m)).copy()
    for _ in range(nsteps):
        noise = scale * rng.standard_normal((cfg.paths, spec.n))
        dZ = -2.0 * s * Z * dt + 0.5 * np.einsum("pi,kij,pj->pk", X, spec.B, noise)
        X += -s * X * dt + noise
        Z += dZ
    return mean_estimate(fn(X, Z))


def estimate_mu_integral(spec: GroupSpec, s: float, g, cfg: SimConfig) -> Estimate:
    """Monte Carlo mean of g against the invariant measure."""
    fn = as_point_function(spec, g)
    ens = sample_invariant(
        spec, s, cfg, rng=derive_rng(cfg.seed, "mu-integral", float(s))
    )
    return mean_estimate(fn(ens.xs, ens.zs))


def qt_single_draw_values(
    spec: GroupSpec, s: float, f, t: float, xs, zs, rng, cfg: SimConfig
) -> np.ndarray:
    """One-sample unbiased draws of Q_t f at each point.

    Each point gets its own independent heat endpoint, so the values are
    iid conditional draws with mean Q_t f(x_i): summing them against an
    outer sample of mu gives a single-level unbiased estimate of
    integrals of Q_t f with valid spread-based confidence intervals.
    """
    fn = as_point_function(spec, f)
    xs = np.asarray(xs, dtype=float)
    zs = np.asarray(zs, dtype=float)
    a, c = mehler_time_scale(s, t)
    nsteps = _nsteps(a, cfg) if a > 0.0 else 0
    hx, hz = _simulate_heat(spec, a, xs.shape[0], nsteps, rng)
    wx, wz = mul_arrays(spec, c * xs, c * c * zs, hx, hz)
    return fn(wx, wz)


def estimate_qt_mu_integral(
    spec: GroupSpec, s: float, f, t: float, cfg: SimConfig
) -> Estimate:
    """Unbiased single-level estimate of the mu-mean of Q_t f."""
    t = float(t)
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got {t}")
    outer = sample_invariant(
        spec, s, cfg, rng=derive_rng(cfg.seed, "qtmu", "outer", float(s), t)
    )
    vals = qt_single_draw_values(
        spec, s, f, t, outer.xs, outer.zs,
        derive_rng(cfg.seed, "qtmu", "heat", float(s), t), cfg,
    )
    return mean_estimate(vals)


def _validate_times(times) -> list[float]:
    ts = [float(t) for t in times]
    if any(t < 0.0 for t in ts):
        raise NegativeTime(f"times must be >= 0, got {ts}")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise TimesNotIncreasing(f"times must be strictly increasing, got {ts}")
    return ts


def _inner_qt_stats(
    spec: GroupSpec,
    s: float,
    fn,
    t: float,
    xs: np.ndarray,
    zs: np.ndarray,
    cfg: SimConfig,
    inner: int,
    tag: tuple,
    positive: bool = False,
):
    """Per-outer-point inner means and variances of Q_t f.

    Inner ensembles are independent across outer points (a requirement of
    the variance-bias correction), drawn chunk by chunk from streams keyed
    on the chunk start index so any execution order gives the same result.
    """
    nouter = xs.shape[0]
    a, c = mehler_time_scale(s, t)
    nsteps = _nsteps(a, cfg)
    Y = np.empty(nouter)
    S2 = np.empty(nouter)
    for start in range(0, nouter, _CHUNK):
        stop = min(start + _CHUNK, nouter)
        csize = stop - start
        rng = derive_rng(cfg.seed, *tag, start)
        hx, hz = _simulate_heat(spec, a, csize * inner, nsteps, rng)
        hx = hx.reshape(csize, inner, spec.n)
        hz = hz.reshape(csize, inner, spec.m)
        cx = (c * xs[start:stop])[:, None, :]
        cz = (c * c * zs[start:stop])[:, None, :]
        wx, wz = mul_arrays(spec, cx, cz, hx, hz)
        vals = fn(wx, wz)
        if positive and np.any(vals <= 0.0):
            raise NonPositiveFunction(
                "integrand must be strictly positive on the sampled support"
            )
        Y[start:stop] = vals.mean(axis=1)
        S2[start:stop] = vals.var(axis=1, ddof=1)
    return Y, S2


def _spread_estimate(contrib: np.ndarray) -> Estimate:
    n = contrib.size
    hw = Z95 * float(np.std(contrib, ddof=1)) / np.sqrt(n)
    return Estimate(float(np.mean(contrib)), hw, n)


def estimate_variance_decay(
    spec: GroupSpec, s: float, f, times, cfg: SimConfig, inner: int = 1000
) -> list[tuple[float, Estimate]]:
    """Var_mu(Q_t f) over a strictly increasing time grid.

    Nested Monte Carlo: outer points from the invariant measure, an inner
    ensemble per point for Q_t f.  The inner-noise inflation of the outer
    spread is removed by subtracting the within-point sample variance over
    the inner count; confidence intervals come from the spread of the
    per-point contributions.
    """
    ts = _validate_times(times)
    fn = as_point_function(spec, f)
    outer = sample_invariant(
        spec, s, cfg, rng=derive_rng(cfg.seed, "vardecay", "outer", float(s))
    )
    nouter = len(outer)
    bessel = nouter / (nouter - 1.0)
    out = []
    for t in ts:
        if t == 0.0:
            y = fn(outer.xs, outer.zs)
            contrib = bessel * (y - np.mean(y)) ** 2
        else:
            Y, S2 = _inner_qt_stats(
                spec, s, fn, t, outer.xs, outer.zs, cfg, inner,
                ("vardecay", "inner", float(s), t),
            )
            contrib = bessel * (Y - np.mean(Y)) ** 2 - S2 / inner
        out.append((t, _spread_estimate(contrib)))
    return out


def _phi(y):
    return y * np.log(y)


def estimate_entropy_decay(
    spec: GroupSpec, s: float, f, times, cfg: SimConfig, inner: int = 1000
) -> list[tuple[float, Estimate]]:
    """Ent_mu(Q_t f) over a time grid, for strictly positive f.

    Plug-in estimator mu(phi(Qt f)) - phi(mu(Qt f)) with the second-order
    inner-noise bias of the first term removed (phi''(y) = 1/y); the
    residual plug-in bias is noted by callers that report it.  Confidence
    intervals use the delta-method contributions
    phi(Y_i) - (ln Ybar + 1) Y_i.
    """
    ts = _validate_times(times)
    fn = as_point_function(spec, f)
    outer = sample_invariant(
        spec, s, cfg, rng=derive_rng(cfg.seed, "entdecay", "outer", float(s))
    )
    out = []
    for t in ts:
        if t == 0.0:
            y = fn(outer.xs, outer.zs)
            if np.any(y <= 0.0):
                raise NonPositiveFunction(
                    "entropy decay needs f > 0 on the sampled support"
                )
            term1 = _phi(y)
            Y = y
        else:
            Y, S2 = _inner_qt_stats(
                spec, s, fn, t, outer.xs, outer.zs, cfg, inner,
                ("entdecay", "inner", float(s), t), positive=True,
            )
            term1 = _phi(Y) - S2 / (2.0 * Y * inner)
        ybar = float(np.mean(Y))
        ent = float(np.mean(term1)) - _phi(ybar)
        contrib = term1 - (np.log(ybar) + 1.0) * Y
        n = contrib.size
        hw = Z95 * float(np.std(contrib, ddof=1)) / np.sqrt(n)
        out.append((t, Estimate(ent, hw, n)))
    return out


def qt_frame_gradient(
    spec: GroupSpec, s: float, f, t: float, x: Point, cfg: SimConfig, h: float = 1e-3
):
    """Frame derivatives (X_i Q_t f, Z_k Q_t f) at x by central differences.

    One heat ensemble is shared across the whole stencil (common random
    numbers), so the difference quotients are low-variance.  Returns
    (values, half_widths, stencil_errors), each of length n+m; stencil
    errors are Richardson estimates |D_h - D_2h| / 3 of the O(h^2) term.
    """
    t = float(t)
    if t < 0.0:
        raise NegativeTime(f"time must be >= 0, got {t}")
    fn = as_point_function(spec, f)
    a, c = mehler_time_scale(s, t)
    ens = sample_heat(
        spec, a, cfg, rng=derive_rng(cfg.seed, "qtgrad", float(s), t)
    )
    frame = frame_at(spec, x)
    dirs = np.vstack([frame.X, frame.Z])
    base = np.concatenate([np.atleast_1d(x.x), np.atleast_1d(x.z)])

    def qt_samples(point_ambient):
        px, pz = point_ambient[: spec.n], point_ambient[spec.n :]
        wx, wz = mul_arrays(spec, (c * px)[None, :], (c * c * pz)[None, :],
                            ens.xs, ens.zs)
        return fn(wx, wz)

    nv = spec.n + spec.m
    vals = np.empty(nv)
    hws = np.empty(nv)
    sten = np.empty(nv)
    npaths = len(ens)
    for i in range(nv):
        d = dirs[i]
        q_h = (qt_samples(base + h * d) - qt_samples(base - h * d)) / (2.0 * h)
        q_2h = (qt_samples(base + 2 * h * d) - qt_samples(base - 2 * h * d)) / (4.0 * h)
        vals[i] = np.mean(q_h)
        hws[i] = (
            Z95 * float(np.std(q_h, ddof=1)) / np.sqrt(npaths) if npaths > 1 else 0.0
        )
        sten[i] = abs(vals[i] - np.mean(q_2h)) / 3.0
    return vals, hws, sten


def estimate_gradient_decay(
    spec: GroupSpec, s: float, f, t: float, x: Point, eps: float, cfg: SimConfig
):
    """Check Gamma(Q_t f) + eps GammaZ(Q_t f) <= e^{-2 lam t} Q_t(Gamma(f) + eps GammaZ(f)).

    Left side from the common-random-number stencil; right side by
    averaging the jet-computed carre du champ over an independent
    ensemble.  Stencil error enters the combined tolerance linearly.
    """
    if not eps > 0.0:
        raise CarnotouError(f"eps must be > 0, got {eps}")
    consts = carnot_ou_constants(spec, s)
    lam = lambda_eps(consts, eps)
    vals, hws, sten = qt_frame_gradient(spec, s, f, t, x, cfg)
    weights = np.concatenate([np.ones(spec.n), eps * np.ones(spec.m)])
    lhs_mean = float(np.sum(weights * vals**2))
    lhs_hw = float(np.sum(weights * (2.0 * np.abs(vals) * hws + hws**2)))
    stencil = float(np.sum(weights * (2.0 * np.abs(vals) * sten + sten**2)))
    lhs = Estimate(lhs_mean, lhs_hw, cfg.paths)

    def gfun(xs, zs):
        return gamma_values(spec, f, xs, zs) + eps * gammaZ_values(spec, f, xs, zs)

    qt_g = mehler_qt(spec, s, gfun, t, x, cfg)
    damp = float(np.exp(-2.0 * lam * t))
    rhs = Estimate(damp * qt_g.mean, damp * qt_g.half_width, qt_g.n)
    params = {
        "s": s, "eps": eps, "t": t, "lambda": lam,
        "x": [float(v) for v in np.atleast_1d(x.x)],
        "z": [float(v) for v in np.atleast_1d(x.z)],
        "stencil": stencil,
    }
    return make_report("gradient-decay", lhs, rhs, params, stencil=stencil)
