"""Carre-du-champ calculus for the subelliptic Ornstein-Uhlenbeck operator.

The operator under study is L = sum_i X_i^2 - s E on a validated step-2
group, with horizontal frame X_i, vertical frame Z_k and weighted Euler
field E.  The module evaluates, exactly via jets:

    Gamma(f, g)   = sum_i (X_i f)(X_i g)
    GammaZ(f, g)  = sum_k (Z_k f)(Z_k g)
    Gamma2(f)     = 1/2 ( L Gamma(f, f) - 2 Gamma(f, L f) )
    Gamma2Z(f)    = 1/2 ( L GammaZ(f, f) - 2 GammaZ(f, L f) )

together with the curvature slack

    Gamma2 + eps * Gamma2Z - (rho1 - kappa/eps) Gamma - (rho2 + rho3*eps) GammaZ

whose nonnegativity is the curvature-dimension condition being verified.
A single order-3 jet of f at the evaluation point feeds the whole chain;
inner arguments such as Gamma(f, .) are jets derived from it, never
re-parsed expressions.

The module also ships a seeded random corpus (dense degree <= 4
polynomials plus exp-of-negative-quadratic bumps at uniform points) and
batched sweep kernels used by the identity and slack test suites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CarnotouError
from .expr import (
    eval_jet_at,
    gradient_functions,
    parse_expr,
    point_function,
    series_coefficients,
)
from .group import GroupSpec, Point, ValidatedSpec
from .jets import Jet, jet_space, polynomial_jet, variable_jet, vf_apply


class NonPositiveEpsilon(CarnotouError):
    """The interpolation weight eps must be strictly positive."""


class WBelowOne(CarnotouError):
    """Lyapunov candidate dipped below 1 on the scan region."""


@dataclass(frozen=True)
class OperatorContext:
    """A validated group together with the drift strength s >= 0."""

    spec: ValidatedSpec
    s: float = 1.0

    def __post_init__(self):
        if not self.s >= 0.0:
            raise CarnotouError(f"drift strength must be >= 0, got {self.s}")


def _as_center(spec: GroupSpec, p: Point) -> np.ndarray:
    return np.concatenate([np.atleast_1d(p.x), np.atleast_1d(p.z)], axis=-1)


def _f_jet(spec: GroupSpec, f, p: Point, order: int = 3) -> Jet:
    if isinstance(f, str):
        f = parse_expr(f, n=spec.n, m=spec.m)
    return eval_jet_at(f, _as_center(spec, p), order, spec.n, spec.m)


def gamma_jet(spec: GroupSpec, jf: Jet, jg: Jet) -> Jet:
    """Jet of Gamma(f, g); drops one order."""
    out = None
    for i in range(spec.n):
        term = vf_apply(spec, ("X", i + 1), jf) * vf_apply(spec, ("X", i + 1), jg)
        out = term if out is None else out + term
    return out


def gammaZ_jet(spec: GroupSpec, jf: Jet, jg: Jet) -> Jet:
    out = None
    for k in range(spec.m):
        term = vf_apply(spec, ("Z", k + 1), jf) * vf_apply(spec, ("Z", k + 1), jg)
        out = term if out is None else out + term
    return out


def L_jet(spec: GroupSpec, s: float, jf: Jet) -> Jet:
    """Jet of L f = sum_i X_i X_i f - s E f; drops two orders."""
    out = None
    for i in range(spec.n):
        term = vf_apply(spec, ("X", i + 1), vf_apply(spec, ("X", i + 1), jf))
        out = term if out is None else out + term
    if s != 0.0:
        out = out - s * vf_apply(spec, "E", jf).truncate(jf.order - 2)
    return out


def gamma2_value(spec: GroupSpec, s: float, jf: Jet):
    """Gamma2(f) from an order-3 jet; returns value(s)."""
    G = gamma_jet(spec, jf, jf)  # order 2
    lf = L_jet(spec, s, jf)  # order 1
    cross = gamma_jet(spec, jf, lf)  # order 0
    return 0.5 * (L_jet(spec, s, G).value - 2.0 * cross.value)


def gamma2Z_value(spec: GroupSpec, s: float, jf: Jet):
    GZ = gammaZ_jet(spec, jf, jf)
    lf = L_jet(spec, s, jf)
    cross = gammaZ_jet(spec, jf, lf)
    return 0.5 * (L_jet(spec, s, GZ).value - 2.0 * cross.value)


def a2_residual_value(spec: GroupSpec, jf: Jet):
    """Gamma(f, GammaZ(f)) - GammaZ(f, Gamma(f)) from an order-3 jet."""
    G = gamma_jet(spec, jf, jf)  # order 2
    GZ = gammaZ_jet(spec, jf, jf)  # order 2
    lhs = gamma_jet(spec, jf.truncate(2), GZ).value
    rhs = gammaZ_jet(spec, jf.truncate(2), G).value
    return lhs - rhs


def gamma(ctx: OperatorContext, f, g, p: Point) -> float:
    jf = _f_jet(ctx.spec, f, p, 1)
    jg = _f_jet(ctx.spec, g, p, 1)
    return float(gamma_jet(ctx.spec, jf, jg).value)


def gammaZ(ctx: OperatorContext, f, g, p: Point) -> float:
    jf = _f_jet(ctx.spec, f, p, 1)
    jg = _f_jet(ctx.spec, g, p, 1)
    return float(gammaZ_jet(ctx.spec, jf, jg).value)


def apply_L(ctx: OperatorContext, f, p: Point) -> float:
    return float(L_jet(ctx.spec, ctx.s, _f_jet(ctx.spec, f, p, 2)).value)


def gamma2(ctx: OperatorContext, f, p: Point) -> float:
    return float(gamma2_value(ctx.spec, ctx.s, _f_jet(ctx.spec, f, p, 3)))


def gamma2Z(ctx: OperatorContext, f, p: Point) -> float:
    return float(gamma2Z_value(ctx.spec, ctx.s, _f_jet(ctx.spec, f, p, 3)))


def carre_oracle(ctx: OperatorContext, f, g, p: Point) -> float:
    """Independent route to Gamma: 1/2 (L(fg) - g Lf - f Lg).

    The drift contribution cancels, so the value must agree with the
    frame formula for every s.
    """
    jf = _f_jet(ctx.spec, f, p, 2)
    jg = _f_jet(ctx.spec, g, p, 2)
    spec, s = ctx.spec, ctx.s
    lfg = L_jet(spec, s, jf * jg).value
    return float(
        0.5 * (lfg - jg.value * L_jet(spec, s, jf).value - jf.value * L_jet(spec, s, jg).value)
    )


def check_A2(ctx: OperatorContext, f, p: Point) -> float:
    """Residual of the gradient-commutation identity; 0 for step-2 frames."""
    return float(a2_residual_value(ctx.spec, _f_jet(ctx.spec, f, p, 3)))


def cd_slack(ctx: OperatorContext, f, p: Point, eps: float, consts) -> float:
    """Pointwise slack of the curvature-dimension inequality at eps."""
    if not eps > 0.0:
        raise NonPositiveEpsilon(f"eps must be > 0, got {eps}")
    jf = _f_jet(ctx.spec, f, p, 3)
    spec, s = ctx.spec, ctx.s
    g2 = gamma2_value(spec, s, jf)
    g2z = gamma2Z_value(spec, s, jf)
    g = gamma_jet(spec, jf, jf).value
    gz = gammaZ_jet(spec, jf, jf).value
    lhs = g2 + eps * g2z
    rhs = (consts.rho1 - consts.kappa / eps) * g + (consts.rho2 + consts.rho3 * eps) * gz
    return float(lhs - rhs)


def cd_slack_values(spec: GroupSpec, s: float, jf: Jet, eps, consts):
    """Batched slack from precomputed order-3 jets; eps may be an array."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0.0):
        raise NonPositiveEpsilon("eps must be > 0")
    g2 = gamma2_value(spec, s, jf)
    g2z = gamma2Z_value(spec, s, jf)
    g = gamma_jet(spec, jf, jf).value
    gz = gammaZ_jet(spec, jf, jf).value
    lhs = g2 + eps * g2z
    rhs = (consts.rho1 - consts.kappa / eps) * g + (consts.rho2 + consts.rho3 * eps) * gz
    return lhs - rhs


# ---------------------------------------------------------------------------
# Random corpus


@dataclass(frozen=True)
class CorpusConfig:
    """Seeded corpus of smooth test functions and evaluation points.

    size samples split between dense polynomials of total degree <=
    degree (coefficients uniform in [-coef_range, coef_range]) and
    polynomial + exp(-positive quadratic) bumps; points uniform in
    [-box, box]^(n+m).
    """

    seed: int = 20240817
    size: int = 10000
    degree: int = 4
    coef_range: float = 2.0
    box: float = 3.0
    bump_fraction: float = 0.2


@dataclass
class Corpus:
    """Realized corpus: polynomial coefficients, bump parameters, points."""

    spec: GroupSpec
    config: CorpusConfig
    points: np.ndarray  # (size, n+m)
    poly: np.ndarray  # (size, K4) dense coefficients
    bump_mask: np.ndarray  # (size,) bool
    bump_lin: np.ndarray  # (size, r, n+m) rows of the quadratic's factors
    bump_shift: np.ndarray  # (size, n+m) centers of the bumps
    bump_scale: np.ndarray  # (size,)

    @property
    def size(self) -> int:
        return self.points.shape[0]


def make_corpus(spec: GroupSpec, cfg: CorpusConfig | None = None) -> Corpus:
    cfg = cfg or CorpusConfig()
    nv = spec.n + spec.m
    space = jet_space(nv)
    rng = np.random.default_rng(cfg.seed)
    points = rng.uniform(-cfg.box, cfg.box, size=(cfg.size, nv))
    keep = space.degrees <= cfg.degree
    poly = np.where(
        keep[None, :],
        rng.uniform(-cfg.coef_range, cfg.coef_range, size=(cfg.size, len(space.alphas))),
        0.0,
    )
    n_bump = int(round(cfg.bump_fraction * cfg.size))
    bump_mask = np.zeros(cfg.size, dtype=bool)
    bump_mask[:n_bump] = True
    rank = 2
    bump_lin = rng.normal(scale=0.5, size=(cfg.size, rank, nv))
    bump_shift = rng.uniform(-1.0, 1.0, size=(cfg.size, nv))
    bump_scale = rng.uniform(-cfg.coef_range, cfg.coef_range, size=cfg.size)
    return Corpus(
        spec, cfg, points, poly, bump_mask, bump_lin, bump_shift, bump_scale
    )


def corpus_jets(corpus: Corpus, order: int = 3) -> Jet:
    """Order-q jets of every corpus sample at its point, in one batch."""
    spec = corpus.spec
    nv = spec.n + spec.m
    space = jet_space(nv)
    jf = polynomial_jet(space, corpus.poly, corpus.points, order)
    if np.any(corpus.bump_mask):
        # bump = scale * exp(-sum_r l_r(y)^2) with affine l_r; built from
        # the same jet algebra so it stays exact to the order.
        q = None
        for r in range(corpus.bump_lin.shape[1]):
            lin = None
            for v in range(nv):
                coef = corpus.bump_lin[:, r, v]
                term = coef * (
                    variable_jet(space, v, corpus.points, order)
                    - corpus.bump_shift[:, v]
                )
                lin = term if lin is None else lin + term
            sq = lin * lin
            q = sq if q is None else q + sq
        neg = -1.0 * q
        bump = neg.compose_series(series_coefficients("exp", neg.value, order))
        scale = np.where(corpus.bump_mask, corpus.bump_scale, 0.0)
        jf = jf + scale * bump
    return jf


def identity_residuals(ctx: OperatorContext, corpus: Corpus) -> dict:
    """Scaled residuals of the structural identities over the corpus.

    Returns arrays keyed by identity name; each entry is
    |lhs - rhs| / (1 + |lhs| + |rhs|) per sample.
    """
    spec, s = ctx.spec, ctx.s
    jf = corpus_jets(corpus, 3)
    jg_poly = np.roll(corpus.poly, 1, axis=0)
    space = jet_space(spec.n + spec.m)
    jg = polynomial_jet(space, jg_poly, corpus.points, 3)

    def rel(a, b):
        return np.abs(a - b) / (1.0 + np.abs(a) + np.abs(b))

    out = {}
    # carre-du-champ defining formula vs frame formula, asymmetric pair
    g_frame = gamma_jet(spec, jf.truncate(2), jg.truncate(2)).value
    lfg = L_jet(spec, s, jf.truncate(2) * jg.truncate(2)).value
    carre = 0.5 * (
        lfg
        - jg.value * L_jet(spec, s, jf.truncate(2)).value
        - jf.value * L_jet(spec, s, jg.truncate(2)).value
    )
    out["carre"] = rel(g_frame, carre)
    # drift-independence of the carre value
    carre0 = 0.5 * (
        L_jet(spec, 0.0, jf.truncate(2) * jg.truncate(2)).value
        - jg.value * L_jet(spec, 0.0, jf.truncate(2)).value
        - jf.value * L_jet(spec, 0.0, jg.truncate(2)).value
    )
    out["carre_drift_free"] = rel(carre, carre0)
    # Gamma2 for drift s equals the driftless Gamma2 plus s * Gamma
    g2 = gamma2_value(spec, s, jf)
    g2_free = gamma2_value(spec, 0.0, jf)
    g_val = gamma_jet(spec, jf, jf).value
    out["gamma2_drift_split"] = rel(g2, g2_free + s * g_val)
    # Gamma2Z likewise picks up 2 s GammaZ from the drift
    g2z = gamma2Z_value(spec, s, jf)
    g2z_free = gamma2Z_value(spec, 0.0, jf)
    gz_val = gammaZ_jet(spec, jf, jf).value
    out["gamma2Z_drift_split"] = rel(g2z, g2z_free + 2.0 * s * gz_val)
    # driftless Gamma2Z equals sum_k Gamma(Z_k f) since Z_k commutes with L0
    acc = None
    for k in range(spec.m):
        zf = vf_apply(spec, ("Z", k + 1), jf)  # order 2
        term = gamma_jet(spec, zf, zf).value
        acc = term if acc is None else acc + term
    out["gamma2Z_vertical_gradient"] = rel(g2z_free, acc)
    # gradient-commutation identity
    a2 = a2_residual_value(spec, jf)
    scale_a2 = 1.0 + np.abs(gamma_jet(spec, jf.truncate(2), gammaZ_jet(spec, jf, jf)).value)
    out["a2"] = np.abs(a2) / scale_a2
    # Cauchy-Schwarz for the bilinear Gamma
    gfg = gamma_jet(spec, jf.truncate(1), jg.truncate(1)).value
    gff = gamma_jet(spec, jf.truncate(1), jf.truncate(1)).value
    ggg = gamma_jet(spec, jg.truncate(1), jg.truncate(1)).value
    cs = gfg**2 - gff * ggg
    out["cauchy_schwarz"] = np.maximum(cs, 0.0) / (1.0 + gff * ggg)
    return out


def cd_slack_sweep(ctx: OperatorContext, corpus: Corpus, consts, eps=None):
    """Slack of the curvature condition per corpus sample.

    eps defaults to a log-uniform draw in [0.1, 10] seeded alongside the
    corpus.  Returns (eps_values, slack_values).
    """
    if eps is None:
        rng = np.random.default_rng(corpus.config.seed + 1)
        eps = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=corpus.size))
    else:
        eps = np.broadcast_to(np.asarray(eps, dtype=float), (corpus.size,))
    jf = corpus_jets(corpus, 3)
    slack = cd_slack_values(ctx.spec, ctx.s, jf, eps, consts)
    return eps, slack


def check_lyapunov(ctx: OperatorContext, W, box, grid: int = 41):
    """Scan sup (Gamma(W) + GammaZ(W)) / W^2 and sup L W / W on a box grid.

    box is either a scalar half-width (the region is [-a, a]^(n+m)) or a
    list of (lo, hi) pairs per ambient coordinate.  W must stay >= 1 on
    the region; returns the pair of suprema.
    """
    spec = ctx.spec
    nv = spec.n + spec.m
    if isinstance(W, str):
        W = parse_expr(W, n=spec.n, m=spec.m)
    if np.isscalar(box):
        bounds = [(-float(box), float(box))] * nv
    else:
        bounds = [(float(lo), float(hi)) for lo, hi in box]
    axes = [np.linspace(lo, hi, grid) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.reshape(-1) for a in mesh], axis=-1)
    xs, zs = pts[:, : spec.n], pts[:, spec.n :]
    wvals = point_function(W, spec.n, spec.m)(xs, zs)
    if np.min(wvals) < 1.0 - 1e-12:
        raise WBelowOne(
            f"Lyapunov candidate drops to {np.min(wvals):.6g} < 1 on the region"
        )
    grads = gradient_functions(W, spec.n, spec.m)(xs, zs)
    dx, dz = grads[:, : spec.n], grads[:, spec.n :]
    # X_i W = d_i W - 1/2 (B^(k) x)_i d_zk W
    bx = np.einsum("kij,pj->pki", spec.B, xs)
    xw = dx - 0.5 * np.einsum("pki,pk->pi", bx, dz)
    gw = np.sum(xw**2, axis=-1) + np.sum(dz**2, axis=-1)
    jw = eval_jet_at(W, pts, 2, spec.n, spec.m)
    lw = L_jet(spec, ctx.s, jw).value
    sup_grad = float(np.max(gw / wvals**2))
    sup_drift = float(np.max(lw / wvals))
    return sup_grad, sup_drift


def _first_partials(spec: GroupSpec, f, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Ambient gradient (..., n+m) at batched points via order-1 jets."""
    if isinstance(f, str):
        f = parse_expr(f, n=spec.n, m=spec.m)
    centers = np.concatenate(
        [np.asarray(xs, dtype=float), np.asarray(zs, dtype=float)], axis=-1
    )
    jf = eval_jet_at(f, centers, 1, spec.n, spec.m)
    space = jf.space
    nv = spec.n + spec.m
    cols = []
    for v in range(nv):
        alpha = tuple(1 if w == v else 0 for w in range(nv))
        cols.append(jf.coeffs[..., space.index[alpha]])
    return np.stack(cols, axis=-1)


def gamma_values(spec: GroupSpec, f, xs, zs) -> np.ndarray:
    """Gamma(f, f) at batched points; jets for derivatives, frame at each point."""
    grads = _first_partials(spec, f, xs, zs)
    dx, dz = grads[..., : spec.n], grads[..., spec.n :]
    bx = np.einsum("kij,...j->...ki", spec.B, np.asarray(xs, dtype=float))
    xf = dx - 0.5 * np.einsum("...ki,...k->...i", bx, dz)
    return np.sum(xf**2, axis=-1)


def gammaZ_values(spec: GroupSpec, f, xs, zs) -> np.ndarray:
    """GammaZ(f, f) at batched points."""
    grads = _first_partials(spec, f, xs, zs)
    return np.sum(grads[..., spec.n :] ** 2, axis=-1)
