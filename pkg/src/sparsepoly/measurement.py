"""Sampling-matrix assembly, truncation residuals, and noisy measurements.

The scaled system is A_{j,k} = phi_{i_k}(z_j) / sqrt(m) and
y = (f(z_j))_j / sqrt(m), so that y = A c + (truncation residual) + (noise).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .multiindex import IndexSet
from .polybasis import BasisSpec, basis_matrix


@dataclass(frozen=True)
class TargetFunction:
    """A deterministic point evaluator, optionally with synthetic ground truth.

    ``fn`` maps an (N, d) array of points to N values.  When the target was
    built from known coefficients, ``reference`` stores them for oracle tests.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = ""
    reference: tuple[np.ndarray, IndexSet] | None = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        Z = np.asarray(points, dtype=float)
        single = Z.ndim == 1
        vals = np.asarray(self.fn(Z.reshape(1, -1) if single else Z), dtype=float)
        return float(vals[0]) if single else vals


def polynomial_target(coefficients: np.ndarray, index_set: IndexSet, basis: BasisSpec) -> TargetFunction:
    """Target function sum_i c_i phi_i with known coefficients."""
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (len(index_set),):
        raise ValueError("coefficient vector does not align with the index set")

    def fn(Z: np.ndarray) -> np.ndarray:
        return basis_matrix(basis, index_set, Z) @ c

    return TargetFunction(fn, name="synthetic", reference=(c, index_set))


@dataclass(frozen=True)
class MeasurementSystem:
    points: np.ndarray       # (m, d)
    matrix: np.ndarray       # (m, n), 1/sqrt(m)-scaled basis values
    rhs: np.ndarray          # (m,), 1/sqrt(m)-scaled samples (+ noise if present)
    basis: BasisSpec
    index_set: IndexSet
    noise: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]


def assemble(
    f: TargetFunction, index_set: IndexSet, basis: BasisSpec, points: np.ndarray
) -> MeasurementSystem:
    """Build the scaled matrix and right-hand side at the given sample points."""
    Z = np.asarray(points, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != basis.dimension or Z.shape[1] != index_set.dim:
        raise ValueError("points, basis and index set disagree on the dimension")
    m = Z.shape[0]
    try:
        values = f(Z)
    except Exception as exc:  # surface the offending point for debuggability
        for j in range(m):
            try:
                f(Z[j])
            except Exception:
                raise RuntimeError(f"target evaluation failed at point {Z[j]!r}") from exc
        raise
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        j = int(np.flatnonzero(~np.isfinite(values))[0])
        raise RuntimeError(f"target evaluation returned non-finite value at point {Z[j]!r}")
    scale = 1.0 / np.sqrt(m)
    A = basis_matrix(basis, index_set, Z) * scale
    y = values * scale
    return MeasurementSystem(points=Z, matrix=A, rhs=y, basis=basis, index_set=index_set)


def truncation_residual(
    c_ref: np.ndarray,
    reference_set: IndexSet,
    index_set: IndexSet,
    basis: BasisSpec,
    points: np.ndarray,
) -> np.ndarray:
    """Scaled sample contribution of reference coefficients outside the index set."""
    c = np.asarray(c_ref, dtype=float)
    if c.shape != (len(reference_set),):
        raise ValueError("reference coefficients do not align with the reference set")
    inside = set(index_set.indices)
    reference_members = set(reference_set.indices)
    missing = [i for i in index_set if i not in reference_members]
    if missing:
        raise ValueError(f"reference set must contain the index set; missing {missing[:3]}")
    outside = [j for j, idx in enumerate(reference_set) if idx not in inside]
    Z = np.asarray(points, dtype=float)
    m = Z.shape[0]
    if not outside:
        return np.zeros(m)
    tail_set = IndexSet.build([reference_set.indices[j] for j in outside])
    Phi = basis_matrix(basis, tail_set, Z)
    return (Phi @ c[outside]) / np.sqrt(m)


def add_noise(
    system: MeasurementSystem, level: float, rng: np.random.Generator
) -> MeasurementSystem:
    """Return a copy of the system with rhs corrupted by noise of exact l2 norm ``level``.

    The noise is a standard gaussian vector rescaled to the requested norm.
    """
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0:
        return system
    g = rng.standard_normal(system.m)
    noise = (level / np.linalg.norm(g)) * g
    return MeasurementSystem(
        points=system.points,
        matrix=system.matrix,
        rhs=system.rhs + noise,
        basis=system.basis,
        index_set=system.index_set,
        noise=noise,
    )


def save_system(system: MeasurementSystem, directory: str | Path, meta: dict | None = None) -> Path:
    """Dump (A, y) as little-endian float64 binaries with a JSON sidecar."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    system.matrix.astype("<f8").tofile(out / "A.bin")
    system.rhs.astype("<f8").tofile(out / "y.bin")
    sidecar = {
        "m": system.m,
        "n": system.n,
        "d": system.basis.dimension,
        "family": system.basis.family.value,
        "index_set": json.loads(system.index_set.to_json()),
        "dtype": "<f8",
        "layout": "row-major",
    }
    if meta:
        sidecar.update(meta)
    sidecar["config_hash"] = hashlib.sha256(
        json.dumps(sidecar, sort_keys=True).encode()
    ).hexdigest()
    (out / "meta.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return out


def load_system(directory: str | Path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Read back (A, y, sidecar) written by :func:`save_system`."""
    src = Path(directory)
    meta = json.loads((src / "meta.json").read_text())
    m, n = meta["m"], meta["n"]
    A = np.fromfile(src / "A.bin", dtype="<f8").reshape(m, n)
    y = np.fromfile(src / "y.bin", dtype="<f8")
    return A, y, meta
