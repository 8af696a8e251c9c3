"""Inequality checks: verdicts on known-good inputs, degenerate cases, runner."""

import dataclasses
import json
import warnings

import numpy as np
import pytest

from carnotou.checks import (
    REGISTRY,
    UnknownCheck,
    check_cd_slack_corpus,
    check_entropy_decay,
    check_hyperbound,
    check_identities_corpus,
    check_l2_decay,
    check_log_harnack,
    check_logsob,
    check_lyapunov_region,
    check_poincare,
    check_reverse_logsob,
    check_reverse_poincare,
    check_wang_harnack,
    estimate_Nt,
    run_checks,
    scenario_constants,
)
from carnotou.constants import carnot_ou_constants
from carnotou.distance import HeavyTailWarning
from carnotou.errors import CarnotouError
from carnotou.group import Point
from carnotou.reports import HOLDS, HOLDS_CI, VIOLATED, report_to_dict
from carnotou.simulate import SimConfig


OK = (HOLDS, HOLDS_CI)


@pytest.fixture(scope="module")
def cfg():
    return SimConfig(seed=20240817, paths=4000, steps_per_unit_time=64, s=1.0)


@pytest.fixture(scope="module")
def consts(heis):
    return carnot_ou_constants(heis, 1.0)


def _p(x1, x2, z):
    return Point(np.array([x1, x2]), np.array([z]))


def test_poincare_holds(heis, cfg, consts):
    rep = check_poincare(
        heis, 1.0, "sin(x1) + 0.5*z1", 1.0, _p(0.3, -0.2, 0.1), 2.0, consts, cfg
    )
    assert rep.verdict in OK
    assert rep.lhs.mean <= rep.rhs.mean + rep.half_width


def test_poincare_constant_function_trivial(heis, cfg, consts):
    # variance of a constant is zero on both sides up to round-off
    rep = check_poincare(heis, 1.0, "2", 1.0, _p(0.0, 0.0, 0.0), 2.0, consts, cfg)
    assert rep.verdict in OK
    assert abs(rep.lhs.mean) <= 1e-12


def test_logsob_holds(heis, cfg, consts):
    rep = check_logsob(
        heis, 1.0, "exp(2*sin(0.5*x1))", 1.0, _p(0.3, -0.2, 0.1), 2.0, consts, cfg
    )
    assert rep.verdict in OK


def test_reverse_poincare_holds(heis, cfg, consts):
    rep = check_reverse_poincare(
        heis, 1.0, "sin(x1) + 0.5*z1", 1.0, _p(0.3, -0.2, 0.1), consts, cfg
    )
    assert rep.verdict in OK
    assert rep.parameters["stencil"] >= 0.0


def test_reverse_logsob_holds_and_is_shift_stable(heis, cfg, consts):
    base = check_reverse_logsob(
        heis, 1.0, "0.5 + exp(0 - x1^2 - z1^2)", 1.0, _p(0.3, -0.2, 0.1), consts, cfg
    )
    assert base.verdict in OK
    # small positive shift of f must not flip the verdict
    shifted = check_reverse_logsob(
        heis, 1.0, "0.501 + exp(0 - x1^2 - z1^2)", 1.0, _p(0.3, -0.2, 0.1), consts, cfg
    )
    assert shifted.verdict in OK


def test_wang_harnack_distinct_points(heis, cfg, consts):
    rep = check_wang_harnack(
        heis, 1.0, "1 + x1^2", 2.0, 1.0, _p(0.0, 0.0, 0.0), _p(1.0, 1.0, 1.0),
        consts, cfg,
    )
    assert rep.verdict in OK
    assert rep.parameters["distance_method"] == "heisenberg-exact"


def test_wang_harnack_same_point_is_jensen(heis, cfg, consts):
    # x == y removes the distance cost; reduces to Jensen for u -> u^alpha
    rep = check_wang_harnack(
        heis, 1.0, "1 + x1^2", 2.0, 1.0, _p(0.2, 0.1, 0.0), _p(0.2, 0.1, 0.0),
        consts, cfg,
    )
    assert rep.verdict in OK
    assert rep.parameters["distance"] == 0.0


def test_log_harnack_constant_function_equality(heis, cfg, consts):
    # f = c: lhs = ln c exactly, rhs = ln c + cost; slack is the cost alone
    rep = check_log_harnack(
        heis, 1.0, "3", 1.0, _p(0.0, 0.0, 0.0), _p(0.5, 0.0, 0.2), consts, cfg
    )
    assert rep.verdict in OK
    cost = rep.parameters["distance"] ** 2 * 5.0 / 4.0
    assert rep.slack == pytest.approx(cost, abs=1e-9)


def test_hyperbound_holds(heis, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = check_hyperbound(heis, 1.0, "1 + 0.2*sin(x1)", 2.0, 4.0, 4.0, cfg)
    assert rep.verdict in OK


def test_estimate_Nt_decreasing_common_samples(heis, cfg):
    vals = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HeavyTailWarning)
        for t in (2.0, 4.0, 8.0):
            vals.append(estimate_Nt(heis, 1.0, 2.0, 4.0, t, cfg).mean)
    # same sample pairs at every t: the integrand decreases pointwise in t
    assert vals[0] > vals[1] > vals[2] >= 1.0


def test_estimate_Nt_validation(heis, cfg):
    with pytest.raises(CarnotouError):
        estimate_Nt(heis, 1.0, 4.0, 2.0, 1.0, cfg)  # beta <= alpha
    with pytest.raises(CarnotouError):
        estimate_Nt(heis, 1.0, 2.0, 4.0, 0.0, cfg)  # t = 0


def test_estimate_Nt_heavy_tail_warns(heis):
    cfg = SimConfig(seed=3, paths=2000, steps_per_unit_time=64, s=1.0)
    with pytest.warns(HeavyTailWarning):
        estimate_Nt(heis, 1.0, 2.0, 4.0, 2.0, cfg)


def test_entropy_decay_fits_rate(heis, cfg, consts):
    reps = check_entropy_decay(
        heis, 1.0, "exp(2*sin(0.5*x1))", (0.5, 1.0, 2.0), 2.0, consts, cfg
    )
    assert len(reps) == 3
    assert all(r.verdict in OK for r in reps)
    fit = reps[0].parameters["fitted_exponent"]
    assert fit >= 0.8 * reps[0].parameters["rate_bound"]


def test_l2_decay_bound_from_initial_value(heis, cfg, consts):
    reps = check_l2_decay(
        heis, 1.0, "sin(x1) + 0.5*z1", (0.5, 1.0, 2.0), 2.0, consts, cfg
    )
    assert all(r.verdict in OK for r in reps)
    assert [r.parameters["t"] for r in reps] == [0.5, 1.0, 2.0]
    # bound factor shrinks along the grid
    bounds = [r.rhs.mean for r in reps]
    assert bounds[0] > bounds[1] > bounds[2] > 0.0


def test_cd_slack_corpus_and_mutation(heis, consts):
    rep = check_cd_slack_corpus(heis, 1.0, consts, size=800)
    assert rep.verdict in OK
    bad = dataclasses.replace(consts, rho1=10.0)
    rep2 = check_cd_slack_corpus(heis, 1.0, bad, size=800)
    assert rep2.verdict == VIOLATED


def test_identities_corpus(heis):
    rep = check_identities_corpus(heis, 1.0, size=500)
    assert rep.verdict == HOLDS
    assert rep.lhs.mean <= 1e-10


def test_lyapunov_region_modes(heis):
    rep = check_lyapunov_region(heis, 1.0, "1 + (x1^2 + x2^2)^2 + z1^2", 3.0, grid=9)
    assert rep.verdict in OK
    assert rep.parameters["finite"]
    bounded = check_lyapunov_region(
        heis, 1.0, "1 + (x1^2 + x2^2)^2 + z1^2", 3.0, grid=9, bound=100.0
    )
    assert bounded.verdict in OK
    assert bounded.lhs.mean == pytest.approx(
        max(bounded.parameters["sup_gradient_ratio"], bounded.parameters["sup_drift_ratio"])
    )


def test_registry_covers_scenario_names():
    for name in (
        "poincare", "logsob", "poincare-mu", "logsob-mu", "reverse-poincare",
        "reverse-logsob", "gradient-decay", "wang-harnack", "log-harnack",
        "hyperbound", "entropy-decay", "l2-decay", "variance-decay",
        "cd-slack", "identities", "lyapunov",
    ):
        assert name in REGISTRY


def test_scenario_constants_overrides(heis):
    base = scenario_constants(heis, {})
    assert base.rho2 == pytest.approx(0.5)
    tweaked = scenario_constants(heis, {"constants": {"rho1": 3.0}})
    assert tweaked.rho1 == 3.0 and tweaked.rho2 == base.rho2
    with pytest.raises(CarnotouError):
        scenario_constants(heis, {"constants": {"bogus": 1.0}})


def _tiny_scenario(checks):
    return {
        "seed": 11,
        "paths": 600,
        "steps_per_unit_time": 32,
        "checks": checks,
    }


def test_run_checks_thread_invariance(heis):
    scenario = _tiny_scenario(
        [
            {"name": "poincare", "f": "sin(x1)", "t": 0.5, "x": [0.1, 0.0], "z": [0.0]},
            {"name": "identities", "size": 200},
            {"name": "cd-slack", "size": 200},
            {"name": "log-harnack", "f": "2", "t": 0.5, "x": [0.0, 0.0], "z": [0.0],
             "y": [0.3, 0.0], "yz": [0.1]},
        ]
    )
    r1, i1 = run_checks(heis, scenario, threads=1)
    r4, i4 = run_checks(heis, scenario, threads=4)
    assert not i1 and not i4
    as_json = lambda rs: json.dumps([report_to_dict(r) for r in rs], sort_keys=True)
    assert as_json(r1) == as_json(r4)
    assert [r.name for r in r1] == ["poincare", "identities", "cd-slack", "log-harnack"]


def test_run_checks_empty_and_unknown(heis):
    reps, interrupted = run_checks(heis, _tiny_scenario([]), threads=2)
    assert reps == [] and not interrupted
    with pytest.raises(UnknownCheck):
        run_checks(heis, _tiny_scenario([{"name": "nope"}]), threads=1)
    with pytest.raises(CarnotouError):
        run_checks(heis, {"checks": []}, threads=1)  # seed is mandatory


def test_run_checks_bad_point_shape(heis):
    scenario = _tiny_scenario(
        [{"name": "poincare", "f": "x1", "t": 0.5, "x": [0.1], "z": [0.0]}]
    )
    with pytest.raises(CarnotouError):
        run_checks(heis, scenario, threads=1)
