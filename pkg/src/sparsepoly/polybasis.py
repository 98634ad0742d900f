"""Orthonormal tensor Chebyshev/Legendre bases and sampling from their measures.

All bases are orthonormal with respect to a product probability measure on
(-1, 1)^d: the uniform measure 2^-d dz for Legendre, the product arcsine
measure prod_j (pi sqrt(1 - z_j^2))^-1 dz for Chebyshev.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .multiindex import CHEBYSHEV, LEGENDRE, IndexSet, family_name, intrinsic_weight


class Family(str, Enum):
    CHEBYSHEV = CHEBYSHEV
    LEGENDRE = LEGENDRE


@dataclass(frozen=True)
class BasisSpec:
    """A tensor polynomial family on (-1, 1)^dimension."""

    family: Family
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(family_name(self.family)))
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def gamma(self) -> float:
        """Growth exponent of the maximal lower-set weighted cardinality."""
        return math.log(3.0) / math.log(2.0) if self.family is Family.CHEBYSHEV else 2.0

    @property
    def tail_exponent(self) -> float:
        """Exponent of k in the computable robustness bound (1 or 2)."""
        return 1.0 if self.family is Family.CHEBYSHEV else 2.0


def eval_1d(family, degree: int, z):
    """Orthonormal 1-D basis value(s) at z in [-1, 1].

    Chebyshev uses the trigonometric closed form sqrt(2) cos(i arccos z); the
    Legendre recurrence runs directly in the orthonormal normalization.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    scalar = np.isscalar(z)
    x = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(np.abs(x) > 1.0):
        raise ValueError("evaluation points must lie in [-1, 1]")
    table = eval_table(family, degree, x)
    out = table[:, degree]
    return float(out[0]) if scalar else out


def eval_table(family, max_degree: int, z: np.ndarray) -> np.ndarray:
    """(len(z), max_degree + 1) table of orthonormal 1-D values."""
    fam = family_name(family)
    x = np.asarray(z, dtype=float)
    n = max_degree + 1
    if fam == CHEBYSHEV:
        theta = np.arccos(np.clip(x, -1.0, 1.0))
        table = np.cos(np.outer(theta, np.arange(n)))
        if n > 1:
            table[:, 1:] *= math.sqrt(2.0)
        return table
    # Orthonormal Legendre three-term recurrence: z p_i = a_{i+1} p_{i+1} + a_i p_{i-1}
    # with a_i = i / sqrt(4 i^2 - 1).
    table = np.empty((x.shape[0], n))
    table[:, 0] = 1.0
    if n > 1:
        table[:, 1] = math.sqrt(3.0) * x
    a_prev = 1.0 / math.sqrt(3.0)
    for i in range(1, n - 1):
        a_next = (i + 1) / math.sqrt(4.0 * (i + 1) ** 2 - 1.0)
        table[:, i + 1] = (x * table[:, i] - a_prev * table[:, i - 1]) / a_next
        a_prev = a_next
    return table


def eval_tensor(index: Sequence[int], z: Sequence[float], basis) -> float:
    """Tensor-product basis value prod_j phi_{i_j}(z_j)."""
    idx = tuple(int(i) for i in index)
    x = np.asarray(z, dtype=float)
    if x.shape != (len(idx),):
        raise ValueError(f"dimension mismatch: index {idx} vs point of shape {x.shape}")
    out = 1.0
    for i, xj in zip(idx, x):
        out *= eval_1d(basis, i, float(xj))
    return float(out)


def basis_matrix(basis, index_set: IndexSet, points: np.ndarray) -> np.ndarray:
    """(m, n) matrix of tensor basis values phi_i(z_j), columns in canonical order."""
    fam = family_name(basis)
    Z = np.asarray(points, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    m, d = Z.shape
    if d != index_set.dim:
        raise ValueError(f"points have dimension {d}, index set has {index_set.dim}")
    idx = index_set.as_array()
    out = np.ones((m, len(index_set)))
    for j in range(d):
        table = eval_table(fam, int(idx[:, j].max()), Z[:, j])
        out *= table[:, idx[:, j]]
    return out


def sample_measure(basis, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, d) i.i.d. draws from the orthogonality measure, strictly inside (-1,1)^d.

    Legendre samples coordinatewise uniform; Chebyshev uses the inverse
    transform z = cos(pi U) for the arcsine law.  Draws that land exactly on
    the boundary (probability ~2^-53 per coordinate) are redrawn.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    fam = family_name(basis)
    d = basis.dimension if isinstance(basis, BasisSpec) else None
    if d is None:
        raise ValueError("sample_measure needs a BasisSpec to know the dimension")
    if fam == LEGENDRE:
        Z = rng.uniform(-1.0, 1.0, size=(count, d))
        while True:
            bad = np.abs(Z) >= 1.0
            if not bad.any():
                return Z
            Z[bad] = rng.uniform(-1.0, 1.0, size=int(bad.sum()))
    U = rng.random(size=(count, d))
    while True:
        bad = U <= 0.0
        if not bad.any():
            break
        U[bad] = rng.random(size=int(bad.sum()))
    return np.cos(np.pi * U)


def sup_norm_consistency(index: Sequence[int], basis, grid_points: int = 10_000) -> float:
    """Grid estimate of ||phi_i||_inf over [-1, 1]^d.

    The tensor structure factorizes the maximum per coordinate, so a fine 1-D
    grid (endpoints included) per dimension suffices.  Matches the intrinsic
    weight to grid accuracy; the maximum sits at z = (1, ..., 1).
    """
    idx = tuple(int(i) for i in index)
    fam = family_name(basis)
    grid = np.linspace(-1.0, 1.0, grid_points)
    out = 1.0
    for i in idx:
        table = eval_table(fam, i, grid)
        out *= float(np.max(np.abs(table[:, i])))
    return out


def measure_name(basis) -> str:
    """Human-readable description of the orthogonality measure."""
    fam = family_name(basis)
    if fam == LEGENDRE:
        return "uniform product measure 2^-d dz"
    return "product arcsine (Chebyshev) measure"


__all__ = [
    "Family",
    "BasisSpec",
    "eval_1d",
    "eval_table",
    "eval_tensor",
    "basis_matrix",
    "sample_measure",
    "sup_norm_consistency",
    "measure_name",
    "intrinsic_weight",
]
