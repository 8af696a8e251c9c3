"""Estimate and check-report records shared by samplers and check runners."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CarnotouError
from .rng import Z95

HOLDS = "holds"
HOLDS_CI = "holds-within-CI"
VIOLATED = "violated"


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with a 95% normal confidence half-width."""

    mean: float
    half_width: float
    n: int

    def __post_init__(self):
        if self.half_width < 0.0:
            raise CarnotouError(f"half_width must be >= 0, got {self.half_width}")


def mean_estimate(values: np.ndarray) -> Estimate:
    """Sample mean with Z95 * stderr half-width."""
    values = np.asarray(values, dtype=float).ravel()
    n = values.size
    if n == 0:
        raise CarnotouError("cannot estimate from zero samples")
    if n == 1:
        return Estimate(float(values[0]), 0.0, 1)
    hw = Z95 * float(np.std(values, ddof=1)) / np.sqrt(n)
    return Estimate(float(np.mean(values)), hw, n)


def exact_estimate(value: float) -> Estimate:
    return Estimate(float(value), 0.0, 1)


def combined_half_width(*estimates: Estimate) -> float:
    """Half-widths combined in quadrature (independent or conservative)."""
    return float(np.sqrt(sum(e.half_width**2 for e in estimates)))


def verdict_of(slack: float, half_width: float) -> str:
    """Three-tier verdict: sign of the slack against its uncertainty."""
    if slack >= 0.0:
        return HOLDS
    if slack + half_width >= 0.0:
        return HOLDS_CI
    return VIOLATED


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one inequality check.

    slack = rhs.mean - lhs.mean; half_width is the combined uncertainty
    (quadrature over the two estimates, plus any stencil tolerance added
    linearly by the caller).  parameters carries full provenance: s, eps,
    t, alpha, beta, c0, the test point, and anything else applicable.
    """

    name: str
    lhs: Estimate
    rhs: Estimate
    slack: float
    half_width: float
    verdict: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict == VIOLATED and self.slack + self.half_width >= 0.0:
            raise CarnotouError("verdict 'violated' requires slack + ci < 0")


def make_report(
    name: str, lhs: Estimate, rhs: Estimate, parameters: dict, stencil: float = 0.0
) -> CheckReport:
    slack = rhs.mean - lhs.mean
    hw = combined_half_width(lhs, rhs) + stencil
    return CheckReport(
        name=name,
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        half_width=hw,
        verdict=verdict_of(slack, hw),
        parameters=dict(parameters),
    )


def report_to_dict(r: CheckReport) -> dict:
    return {
        "name": r.name,
        "lhs": {"mean": r.lhs.mean, "half_width": r.lhs.half_width, "n": r.lhs.n},
        "rhs": {"mean": r.rhs.mean, "half_width": r.rhs.half_width, "n": r.rhs.n},
        "slack": r.slack,
        "half_width": r.half_width,
        "verdict": r.verdict,
        "parameters": r.parameters,
    }


CSV_HEADER = ["name", "t", "lhs", "rhs", "slack", "ci", "verdict"]


def report_csv_row(r: CheckReport) -> list:
    t = r.parameters.get("t", "")
    return [
        r.name,
        _fmt(t) if t != "" else "",
        _fmt(r.lhs.mean),
        _fmt(r.rhs.mean),
        _fmt(r.slack),
        _fmt(r.half_width),
        r.verdict,
    ]


def _fmt(v) -> str:
    """repr-based float formatting: shortest exact round-trip, stable bytes."""
    return repr(float(v))
