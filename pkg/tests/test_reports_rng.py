"""Estimates, verdicts, report serialization, and stream derivation."""

import numpy as np
import pytest

from carnotou.reports import (
    CSV_HEADER,
    Estimate,
    HOLDS,
    HOLDS_CI,
    VIOLATED,
    combined_half_width,
    exact_estimate,
    make_report,
    mean_estimate,
    report_csv_row,
    report_to_dict,
    verdict_of,
)
from carnotou.rng import Z95, derive_rng, stream_key


def test_mean_estimate_normal_ci():
    rng = np.random.default_rng(0)
    est = mean_estimate(rng.normal(size=40000))
    assert abs(est.mean) < est.half_width
    assert est.half_width == pytest.approx(Z95 / np.sqrt(40000), rel=0.05)
    assert est.n == 40000


def test_single_sample_estimate():
    est = mean_estimate(np.array([3.0]))
    assert est.mean == 3.0 and est.half_width == 0.0 and est.n == 1


def test_exact_estimate():
    est = exact_estimate(2.5)
    assert est.mean == 2.5 and est.half_width == 0.0


def test_estimate_rejects_negative_half_width():
    with pytest.raises(Exception):
        Estimate(0.0, -1.0, 3)


def test_verdict_tiers():
    assert verdict_of(0.1, 0.0) == HOLDS
    assert verdict_of(0.0, 0.0) == HOLDS
    assert verdict_of(-0.05, 0.1) == HOLDS_CI
    assert verdict_of(-0.3, 0.1) == VIOLATED


def test_combined_half_width_quadrature():
    a = Estimate(0.0, 3.0, 10)
    b = Estimate(0.0, 4.0, 10)
    assert combined_half_width(a, b) == pytest.approx(5.0)


def test_make_report_and_serialization():
    lhs = Estimate(1.0, 0.3, 100)
    rhs = Estimate(2.0, 0.4, 100)
    rep = make_report("demo", lhs, rhs, {"t": 1.5, "s": 1.0}, stencil=0.1)
    assert rep.slack == pytest.approx(1.0)
    assert rep.half_width == pytest.approx(0.5 + 0.1)
    assert rep.verdict == HOLDS
    d = report_to_dict(rep)
    assert d["name"] == "demo" and d["lhs"]["mean"] == 1.0
    row = report_csv_row(rep)
    assert len(row) == len(CSV_HEADER)
    assert row[CSV_HEADER.index("t")] == repr(1.5)
    assert row[CSV_HEADER.index("verdict")] == HOLDS


def test_report_verdict_consistency_enforced():
    # a "violated" verdict with slack inside the CI is self-contradictory
    from carnotou.reports import CheckReport

    with pytest.raises(Exception):
        CheckReport(
            name="bad",
            lhs=Estimate(1.0, 0.0, 1),
            rhs=Estimate(5.0, 0.0, 1),
            slack=4.0,
            half_width=0.0,
            verdict=VIOLATED,
            parameters={},
        )


def test_stream_key_stable_and_distinct():
    k1 = stream_key(7, "heat", 1.0)
    assert k1 == stream_key(7, "heat", 1.0)
    assert k1 != stream_key(7, "heat", 2.0)
    assert k1 != stream_key(8, "heat", 1.0)
    assert 0 <= k1 < 2**128


def test_derive_rng_reproducible_and_independent():
    a = derive_rng(3, "x").normal(size=5)
    b = derive_rng(3, "x").normal(size=5)
    c = derive_rng(3, "y").normal(size=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    # correlation across many derived streams stays at noise level
    draws = np.stack([derive_rng(3, "s", i).normal(size=2000) for i in range(8)])
    corr = np.corrcoef(draws)
    off = corr[~np.eye(8, dtype=bool)]
    assert float(np.max(np.abs(off))) < 0.08
