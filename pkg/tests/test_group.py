"""Group layer: validation, product laws, dilations, frames."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from carnotou.group import (
    GroupSpec,
    NotBracketGenerating,
    Point,
    SkewSymmetryViolation,
    SpecFormatError,
    builtin_heisenberg,
    dilate,
    frame_at,
    group_inv,
    group_mul,
    heisenberg,
    is_heisenberg,
    load_group_spec,
    mul_arrays,
    origin,
    validate_spec,
)

from conftest import make_random_spec


def _rand_point(spec, rng):
    return Point(rng.normal(size=spec.n), rng.normal(size=spec.m))


def test_heisenberg_shape(heis):
    assert heis.n == 2 and heis.m == 1
    assert is_heisenberg(heis)
    assert not is_heisenberg(validate_spec(GroupSpec("h2", 2, 1, 2.0 * heis.B)))


def test_group_laws(heis, random_specs):
    rng = np.random.default_rng(3)
    for spec in [heis] + random_specs(4, seed=5):
        e = origin(spec)
        for _ in range(20):
            p, q, r = (_rand_point(spec, rng) for _ in range(3))
            left = group_mul(spec, group_mul(spec, p, q), r)
            right = group_mul(spec, p, group_mul(spec, q, r))
            npt.assert_allclose(left.x, right.x, atol=1e-12)
            npt.assert_allclose(left.z, right.z, atol=1e-12)
            back = group_mul(spec, p, group_inv(spec, p))
            npt.assert_allclose(back.x, e.x, atol=1e-12)
            npt.assert_allclose(back.z, e.z, atol=1e-12)
            same = group_mul(spec, e, p)
            npt.assert_allclose(same.x, p.x, atol=1e-15)
            npt.assert_allclose(same.z, p.z, atol=1e-15)


def test_noncommutative(heis):
    p = Point(np.array([1.0, 0.0]), np.array([0.0]))
    q = Point(np.array([0.0, 1.0]), np.array([0.0]))
    pq = group_mul(heis, p, q)
    qp = group_mul(heis, q, p)
    assert abs(pq.z[0] - 0.5) < 1e-15 and abs(qp.z[0] + 0.5) < 1e-15


def test_dilation_morphism(heis, random_specs):
    rng = np.random.default_rng(11)
    for spec in [heis] + random_specs(3, seed=2):
        for t in (0.5, 2.0, 3.7):
            p, q = _rand_point(spec, rng), _rand_point(spec, rng)
            a = dilate(spec, t, group_mul(spec, p, q))
            b = group_mul(spec, dilate(spec, t, p), dilate(spec, t, q))
            npt.assert_allclose(a.x, b.x, atol=1e-12)
            npt.assert_allclose(a.z, b.z, atol=1e-12)
        p = _rand_point(spec, rng)
        twice = dilate(spec, 2.0, dilate(spec, 3.0, p))
        once = dilate(spec, 6.0, p)
        npt.assert_allclose(twice.x, once.x, atol=1e-12)
        npt.assert_allclose(twice.z, once.z, atol=1e-12)


def test_mul_arrays_matches_pointwise(heis):
    rng = np.random.default_rng(8)
    xs1, zs1 = rng.normal(size=(15, 2)), rng.normal(size=(15, 1))
    xs2, zs2 = rng.normal(size=(15, 2)), rng.normal(size=(15, 1))
    bx, bz = mul_arrays(heis, xs1, zs1, xs2, zs2)
    for i in range(15):
        p = group_mul(heis, Point(xs1[i], zs1[i]), Point(xs2[i], zs2[i]))
        npt.assert_allclose(bx[i], p.x, atol=1e-14)
        npt.assert_allclose(bz[i], p.z, atol=1e-14)


def test_frame_shapes(heis):
    p = Point(np.array([1.0, -2.0]), np.array([0.3]))
    fr = frame_at(heis, p)
    assert fr.X.shape == (2, 3) and fr.Z.shape == (1, 3)
    e_fr = frame_at(heis, origin(heis))
    npt.assert_allclose(e_fr.X, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    npt.assert_allclose(e_fr.Z, np.array([[0.0, 0.0, 1.0]]))


def test_validate_rejects_non_skew():
    B = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    with pytest.raises(SkewSymmetryViolation):
        validate_spec(GroupSpec("bad", 2, 1, B))


def test_validate_rejects_dependent_family():
    base = builtin_heisenberg().B[0]
    B = np.stack([base, 2.0 * base])
    with pytest.raises(NotBracketGenerating):
        validate_spec(GroupSpec("dep", 2, 2, B))


def test_validate_rejects_no_brackets():
    with pytest.raises(NotBracketGenerating):
        validate_spec(GroupSpec("flat", 1, 1, np.zeros((1, 1, 1))))


def test_validate_rejects_bad_shape_and_nonfinite():
    with pytest.raises(SpecFormatError):
        validate_spec(GroupSpec("shape", 2, 1, np.zeros((1, 3, 3))))
    B = np.array([[[0.0, np.inf], [-np.inf, 0.0]]])
    with pytest.raises(SpecFormatError):
        validate_spec(GroupSpec("inf", 2, 1, B))


def test_load_group_spec_roundtrip(tmp_path, heis):
    doc = {"name": "heisenberg", "n": 2, "m": 1, "B": heis.B.tolist()}
    path = tmp_path / "h.json"
    path.write_text(json.dumps(doc))
    spec = load_group_spec(path)
    assert is_heisenberg(spec)
    spec2 = load_group_spec(doc)
    assert is_heisenberg(spec2)


def test_load_group_spec_error_pointers(tmp_path):
    bad = {"name": "x", "n": 2, "m": 1, "B": [[[0.0, "a"], [0.0, 0.0]]]}
    with pytest.raises(SpecFormatError) as exc:
        load_group_spec(bad)
    assert "/B/0" in str(exc.value.json_pointer)
    with pytest.raises(SpecFormatError):
        load_group_spec({"n": 2, "m": 1, "B": []})


def test_random_spec_factory_validates():
    rng = np.random.default_rng(0)
    for _ in range(5):
        spec = make_random_spec(rng)
        assert spec.bracket_rank == spec.m
