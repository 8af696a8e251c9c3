"""Step-2 Carnot groups given by skew-symmetric structure matrices.

A group here is R^n x R^m with the product

    (x, z) . (x', z') = (x + x', z + z' + 1/2 * x^T B x')

where the last term is taken componentwise in z: the k-th vertical
coordinate picks up 1/2 * x^T B^(k) x' for a skew-symmetric n x n matrix
B^(k).  The structure constants of the horizontal frame are read off as
gamma_ij^k = B^(k)[i, j], so that [X_i, X_j] = sum_k gamma_ij^k Z_k.

The left-invariant frame at a point p = (x, z) is

    X_i = d/dx_i - 1/2 * sum_{k,j} B^(k)[i, j] x_j d/dz_k
    Z_k = d/dz_k

together with the weighted Euler field E = sum_i x_i d/dx_i
+ 2 sum_k z_k d/dz_k generating the dilations dil_t(x, z) = (t x, t^2 z).

Specs are validated once (skew symmetry, bracket generation, linear
independence of the matrices) and then carried around as ValidatedSpec so
downstream code never re-checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CarnotouError

# Relative singular-value threshold used for the two rank checks.
RANK_RTOL = 1e-10


class GroupSpecError(CarnotouError):
    """A group spec failed validation.

    ``json_pointer`` locates the offending fragment when the spec came from
    a JSON document ("" means the whole document).
    """

    def __init__(self, message: str, json_pointer: str = ""):
        super().__init__(message)
        self.json_pointer = json_pointer


class SpecFormatError(GroupSpecError):
    """Malformed spec document (wrong types, shapes or missing keys)."""


class SkewSymmetryViolation(GroupSpecError):
    """Some B^(k) is not skew-symmetric."""


class DependentMatrices(GroupSpecError):
    """The matrices B^(1..m) are linearly dependent."""


class NotBracketGenerating(GroupSpecError):
    """The horizontal brackets do not span the vertical layer."""


class NonPositiveScale(CarnotouError):
    """Dilation parameter must be strictly positive."""


@dataclass(frozen=True)
class GroupSpec:
    """Presentation of a step-2 group: dimensions and structure matrices.

    B has shape (m, n, n); B[k] is the skew-symmetric matrix coupling the
    horizontal layer to the k-th vertical coordinate.
    """

    name: str
    n: int
    m: int
    B: np.ndarray

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "B": np.asarray(self.B).tolist(),
        }


@dataclass(frozen=True)
class ValidatedSpec(GroupSpec):
    """A GroupSpec whose invariants have been certified by validate_spec."""

    bracket_rank: int = 0


@dataclass(frozen=True)
class Point:
    """A group element: horizontal part x (n,) and vertical part z (m,)."""

    x: np.ndarray
    z: np.ndarray

    @staticmethod
    def of(x, z) -> "Point":
        return Point(np.asarray(x, dtype=float), np.asarray(z, dtype=float))


@dataclass(frozen=True)
class Frame:
    """Coefficients of the left-invariant frame at a point.

    Rows are vector fields, columns the ambient partials (x_1..x_n,
    z_1..z_m): X has shape (n, n+m), Z has shape (m, n+m) and E has shape
    (n+m,).
    """

    X: np.ndarray
    Z: np.ndarray
    E: np.ndarray


def origin(spec: GroupSpec) -> Point:
    return Point(np.zeros(spec.n), np.zeros(spec.m))


def _pair_matrix(B: np.ndarray) -> np.ndarray:
    """Stack the strictly upper-triangular entries of each B^(k) as rows.

    A skew matrix is determined by its upper triangle, so the row rank of
    this matrix equals both the rank of the bracket map on the vertical
    layer and the dimension spanned by the B^(k).
    """
    m, n, _ = B.shape
    iu = np.triu_indices(n, k=1)
    return B[:, iu[0], iu[1]].reshape(m, -1)


def _matrix_rank(A: np.ndarray) -> int:
    if A.size == 0:
        return 0
    svals = np.linalg.svd(A, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > RANK_RTOL * svals[0]))


def validate_spec(spec: GroupSpec) -> ValidatedSpec:
    """Certify the three structural invariants of a spec.

    Checks, in order: every B^(k) skew-symmetric; the horizontal brackets
    span the whole vertical layer; the matrices are linearly independent.
    Returns the spec wrapped as ValidatedSpec carrying the bracket rank.
    """
    B = np.asarray(spec.B, dtype=float)
    if B.shape != (spec.m, spec.n, spec.n):
        raise SpecFormatError(
            f"B must have shape ({spec.m}, {spec.n}, {spec.n}), got {B.shape}",
            json_pointer="/B",
        )
    if spec.n < 1 or spec.m < 1:
        raise SpecFormatError("need n >= 1 and m >= 1")
    if not np.all(np.isfinite(B)):
        raise SpecFormatError("B contains non-finite entries", json_pointer="/B")
    scale = 1.0 + float(np.max(np.abs(B)))
    for k in range(spec.m):
        asym = float(np.max(np.abs(B[k] + B[k].T)))
        if asym > 1e-12 * scale:
            raise SkewSymmetryViolation(
                f"B^({k + 1}) is not skew-symmetric (max |B + B^T| = {asym:.3e})",
                json_pointer=f"/B/{k}",
            )
    bracket_rank = _matrix_rank(_pair_matrix(B))
    if bracket_rank < spec.m:
        raise NotBracketGenerating(
            f"horizontal brackets span a {bracket_rank}-dimensional subspace "
            f"of the {spec.m}-dimensional vertical layer",
            json_pointer="/B",
        )
    stack_rank = _matrix_rank(B.reshape(spec.m, -1))
    if stack_rank < spec.m:
        raise DependentMatrices(
            f"structure matrices have rank {stack_rank} < m = {spec.m}",
            json_pointer="/B",
        )
    return ValidatedSpec(spec.name, spec.n, spec.m, B, bracket_rank=bracket_rank)


def load_group_spec(source) -> ValidatedSpec:
    """Load and validate a spec from a JSON file path or a parsed dict.

    Format: {"name": str, "n": int, "m": int, "B": [m][n][n] floats}.
    Errors carry a JSON pointer to the offending fragment.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise SpecFormatError("spec document must be a JSON object")
    for key in ("name", "n", "m", "B"):
        if key not in doc:
            raise SpecFormatError(f"missing key {key!r}", json_pointer=f"/{key}")
    name = doc["name"]
    if not isinstance(name, str):
        raise SpecFormatError("name must be a string", json_pointer="/name")
    n, m = doc["n"], doc["m"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SpecFormatError("n must be a positive integer", json_pointer="/n")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise SpecFormatError("m must be a positive integer", json_pointer="/m")
    raw = doc["B"]
    if not isinstance(raw, list) or len(raw) != m:
        raise SpecFormatError(f"B must be a list of {m} matrices", json_pointer="/B")
    for k, mat in enumerate(raw):
        if not isinstance(mat, list) or len(mat) != n:
            raise SpecFormatError(
                f"B[{k}] must be an {n}x{n} matrix", json_pointer=f"/B/{k}"
            )
        for r, row in enumerate(mat):
            if not isinstance(row, list) or len(row) != n:
                raise SpecFormatError(
                    f"B[{k}][{r}] must be a row of {n} numbers",
                    json_pointer=f"/B/{k}/{r}",
                )
            for c, entry in enumerate(row):
                if not isinstance(entry, (int, float)) or isinstance(entry, bool):
                    raise SpecFormatError(
                        "matrix entries must be numbers",
                        json_pointer=f"/B/{k}/{r}/{c}",
                    )
    B = np.asarray(raw, dtype=float)
    return validate_spec(GroupSpec(name, n, m, B))


def builtin_heisenberg() -> GroupSpec:
    """The first Heisenberg group: n=2, m=1, B = [[0, 1], [-1, 0]]."""
    B = np.array([[[0.0, 1.0], [-1.0, 0.0]]])
    return GroupSpec("heisenberg", 2, 1, B)


def heisenberg() -> ValidatedSpec:
    return validate_spec(builtin_heisenberg())


def is_heisenberg(spec: GroupSpec) -> bool:
    """True when the spec is exactly the built-in Heisenberg presentation."""
    return (
        spec.n == 2
        and spec.m == 1
        and np.array_equal(np.asarray(spec.B), builtin_heisenberg().B)
    )


def mul_arrays(spec: GroupSpec, x1, z1, x2, z2):
    """Group product on coordinate arrays, broadcasting over leading axes.

    x* have shape (..., n), z* shape (..., m).  Returns (x, z).
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    twist = 0.5 * np.einsum("...i,kij,...j->...k", x1, spec.B, x2)
    return x1 + x2, z1 + z2 + twist


def group_mul(spec: GroupSpec, p: Point, q: Point) -> Point:
    x, z = mul_arrays(spec, p.x, p.z, q.x, q.z)
    return Point(x, z)


def group_inv(spec: GroupSpec, p: Point) -> Point:
    # (x, z)^-1 = (-x, -z): the twist term vanishes at (x, -x) by skewness.
    return Point(-p.x, -p.z)


def dilate(spec: GroupSpec, t: float, p: Point) -> Point:
    if not t > 0:
        raise NonPositiveScale(f"dilation scale must be > 0, got {t}")
    return Point(t * p.x, t * t * p.z)


def frame_at(spec: GroupSpec, p: Point) -> Frame:
    n, m = spec.n, spec.m
    X = np.zeros((n, n + m))
    X[:, :n] = np.eye(n)
    # X_i picks up -1/2 (B^(k) x)_i on d/dz_k.
    X[:, n:] = -0.5 * np.einsum("kij,j->ik", spec.B, p.x)
    Z = np.zeros((m, n + m))
    Z[:, n:] = np.eye(m)
    E = np.concatenate([p.x, 2.0 * p.z])
    return Frame(X, Z, E)
