"""Curvature constants: exact Heisenberg values, eigen oracle, rate plans."""

import numpy as np
import numpy.testing as npt
import pytest

from carnotou.constants import (
    CDConstants,
    RateNotPositive,
    carnot_ou_constants,
    harnack_coefficient,
    jacobi_eigenvalues,
    kappa,
    lambda_eps,
    optimal_eps_for_time,
    prefactor_C,
    rho2,
)

from conftest import make_random_spec

_E = float(np.e)


def test_heisenberg_exact(heis):
    assert abs(kappa(heis) - 1.0) <= 1e-12
    assert abs(rho2(heis) - 0.5) <= 1e-12
    consts = carnot_ou_constants(heis, 1.0)
    assert consts.rho1 == 1.0 and consts.rho3 == 2.0
    assert lambda_eps(consts, 2.0) == pytest.approx(0.5, abs=1e-15)
    assert harnack_coefficient(consts) == pytest.approx(5.0, abs=1e-12)


def test_prefactor_formula_lock(heis):
    # C = e (1 + 2 lam eps / rho2)(1 + 2 kappa / rho2); at eps=2 this is 25e
    consts = carnot_ou_constants(heis, 1.0)
    lam = lambda_eps(consts, 2.0)
    want = _E * (1 + 2 * lam * 2.0 / consts.rho2) * (1 + 2 * consts.kappa / consts.rho2)
    assert prefactor_C(consts, 2.0) == pytest.approx(want, rel=1e-15)
    assert prefactor_C(consts, 2.0) == pytest.approx(25.0 * _E, rel=1e-12)
    # at eps=3 the same formula gives 45e
    assert prefactor_C(consts, 3.0) == pytest.approx(45.0 * _E, rel=1e-12)


def test_lambda_eps_shape(heis):
    consts = carnot_ou_constants(heis, 1.0)
    # for OU constants rho3 = 2s > rho1 = s, so the rho1 - kappa/eps branch
    # is always the minimum; the rate approaches rho1 from below
    assert lambda_eps(consts, 1.01) == pytest.approx(1.0 - 1.0 / 1.01)
    assert lambda_eps(consts, 100.0) == pytest.approx(0.99, abs=1e-15)
    assert lambda_eps(consts, 0.5) < 0.0
    # a synthetic constant set exercises the other branch
    other = CDConstants(rho1=10.0, rho2=0.5, rho3=0.1, kappa=1.0)
    assert lambda_eps(other, 1.0) == pytest.approx(0.6, abs=1e-15)


def test_prefactor_requires_positive_rate(heis):
    consts = carnot_ou_constants(heis, 1.0)
    with pytest.raises(RateNotPositive):
        prefactor_C(consts, 0.5)


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(3)
    for d in (1, 2, 3, 5, 8):
        for _ in range(10):
            A = rng.normal(size=(d, d))
            S = (A + A.T) / 2.0
            got = np.sort(jacobi_eigenvalues(S))
            want = np.sort(np.linalg.eigvalsh(S))
            npt.assert_allclose(got, want, atol=1e-10 * (1 + np.abs(want).max()))


def test_jacobi_extreme_scales():
    # huge dynamic range must not overflow or spin; agreement is relative
    # to the matrix scale, which is all double precision can promise here
    import warnings

    for off in (1e150, 1e-10):
        S = np.diag([1e160, 1.0, 1e-160])
        S[0, 1] = S[1, 0] = off
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            got = np.sort(jacobi_eigenvalues(S))
        want = np.sort(np.linalg.eigvalsh(S))
        scale = float(np.linalg.norm(S))
        npt.assert_allclose(got, want, atol=1e-12 * scale)
        assert got[-1] == pytest.approx(want[-1], rel=1e-12)


def _sphere_oracle_kappa(spec, samples=2000, iters=10000):
    """Best sphere sample polished by power iteration on the raw B tensors.

    The quadratic form is contracted as |B_k u|^2 per matrix, never through
    the assembled Gram operator, so the route is independent of kappa's.
    """
    rng = np.random.default_rng(0)

    def mv(v):
        return sum(spec.B[k].T @ (spec.B[k] @ v) for k in range(spec.m))

    us = rng.normal(size=(samples, spec.n))
    us /= np.linalg.norm(us, axis=1, keepdims=True)
    quads = np.einsum("kpi->pk", np.einsum("kij,pj->kpi", spec.B, us) ** 2).sum(axis=1)
    v = us[int(np.argmax(quads))]
    for _ in range(iters):
        w = mv(v)
        v = w / np.linalg.norm(w)
    return float(sum(np.sum((spec.B[k] @ v) ** 2) for k in range(spec.m)))


def _sphere_oracle_rho2(spec, samples=2000, iters=10000):
    """Shifted power iteration toward the smallest Frobenius-Gram direction."""
    rng = np.random.default_rng(1)

    def form(v):
        C = np.einsum("k,kij->ij", v, spec.B)
        return float(np.sum(C * C))

    def mv(v):
        C = np.einsum("k,kij->ij", v, spec.B)
        return np.einsum("ij,kij->k", C, spec.B)

    shift = float(np.sum(spec.B**2)) + 1.0
    us = rng.normal(size=(samples, spec.m))
    us /= np.linalg.norm(us, axis=1, keepdims=True)
    quads = np.array([form(u) for u in us])
    v = us[int(np.argmin(quads))]
    for _ in range(iters):
        w = shift * v - mv(v)
        v = w / np.linalg.norm(w)
    return 0.25 * form(v)


def test_kappa_rho2_oracle_on_random_specs():
    rng = np.random.default_rng(77)
    for _ in range(20):
        spec = make_random_spec(rng)
        k = kappa(spec)
        r = rho2(spec)
        assert abs(k - _sphere_oracle_kappa(spec)) <= 1e-6 * (1 + k)
        assert abs(r - _sphere_oracle_rho2(spec)) <= 1e-6 * (1 + r)


def test_scaling_covariance(heis):
    # B -> c B scales kappa and rho2 by c^2
    from carnotou.group import GroupSpec, validate_spec

    for c in (0.5, 3.0):
        scaled = validate_spec(GroupSpec("s", 2, 1, c * heis.B))
        assert kappa(scaled) == pytest.approx(c * c * kappa(heis), rel=1e-12)
        assert rho2(scaled) == pytest.approx(c * c * rho2(heis), rel=1e-12)


def test_optimal_eps_beats_grid(heis):
    consts = carnot_ou_constants(heis, 1.0)
    for t in (0.5, 2.0, 10.0, 50.0):
        plan = optimal_eps_for_time(consts, t)
        assert plan.lam == pytest.approx(lambda_eps(consts, plan.epsilon), rel=1e-12)
        assert plan.prefactor == pytest.approx(
            prefactor_C(consts, plan.epsilon), rel=1e-12
        )
        objective = plan.prefactor * np.exp(-2.0 * plan.lam * t)
        grid = np.linspace(1.001, 60.0, 2000)
        best = min(
            prefactor_C(consts, e) * np.exp(-2.0 * lambda_eps(consts, e) * t)
            for e in grid
            if lambda_eps(consts, e) > 0
        )
        assert objective <= best * (1 + 1e-6)


def test_constants_drift_scaling(heis):
    consts = carnot_ou_constants(heis, 2.5)
    assert consts.rho1 == 2.5 and consts.rho3 == 5.0
    assert consts.rho2 == pytest.approx(0.5) and consts.kappa == pytest.approx(1.0)
