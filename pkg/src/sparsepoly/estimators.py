"""End-to-end recovery pipelines and eta-estimation strategies.

``fit_cs`` is the main entry point: hyperbolic-cross truncation, i.i.d.
sampling from the basis measure, weighted QCBP solve.  ``fit_oracle_ls`` is
the known-support least-squares baseline.  Three strategies resolve the
residual bound eta: a fixed value, an oracle least-squares estimate from
fresh samples, and a cross-validation search around that estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from . import seeding
from .measurement import MeasurementSystem, TargetFunction, add_noise, assemble
from .multiindex import (
    DEFAULT_MAX_CELLS,
    IndexSet,
    glex_key,
    hyperbolic_cross,
    intrinsic_weights,
    lower_frontier,
    enumerate_lower_sets,
)
from .polybasis import BasisSpec, Family, basis_matrix, sample_measure
from .solvers import SolverOptions, SolverResult, solve_least_squares, solve_wqcbp


@dataclass(frozen=True)
class FixedEta:
    value: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("fixed eta must be >= 0")


@dataclass(frozen=True)
class OracleEta:
    oversample: int = 10


@dataclass(frozen=True)
class CrossValidationEta:
    grid_size: int = 11
    log10_range: tuple[float, float] = (-3.0, 3.0)
    reconstruction_fraction: float = 0.75
    oversample: int = 10


EtaStrategy = Union[FixedEta, OracleEta, CrossValidationEta]


@dataclass
class Surrogate:
    """A fitted truncated expansion sum_i c_i phi_i with its provenance."""

    basis: BasisSpec
    index_set: IndexSet
    coefficients: np.ndarray
    provenance: dict

    def __call__(self, points: np.ndarray):
        return evaluate_surrogate(self, points)

    def to_json(self) -> str:
        return json.dumps(
            {
                "family": self.basis.family.value,
                "d": self.basis.dimension,
                "index_set": json.loads(self.index_set.to_json()),
                "coefficients": [float(c) for c in self.coefficients],
                "provenance": self.provenance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Surrogate":
        doc = json.loads(text)
        index_set = IndexSet.build(doc["index_set"]["indices"], dim=doc["index_set"]["d"])
        basis = BasisSpec(Family(doc["family"]), doc["d"])
        return cls(basis, index_set, np.asarray(doc["coefficients"], dtype=float), doc["provenance"])


def evaluate_surrogate(surrogate: Surrogate, points: np.ndarray):
    """Evaluate the surrogate at one point (d,) or a batch (N, d), chunked."""
    Z = np.asarray(points, dtype=float)
    single = Z.ndim == 1
    Z2 = Z.reshape(1, -1) if single else Z
    if Z2.shape[1] != surrogate.basis.dimension:
        raise ValueError("point dimension does not match the surrogate")
    n = len(surrogate.index_set)
    chunk = max(1, int(8_000_000 // max(n, 1)))
    out = np.empty(Z2.shape[0])
    for start in range(0, Z2.shape[0], chunk):
        block = Z2[start : start + chunk]
        out[start : start + len(block)] = (
            basis_matrix(surrogate.basis, surrogate.index_set, block) @ surrogate.coefficients
        )
    return float(out[0]) if single else out


def _coerce_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return seeding.stream(int(seed_or_rng), seeding.ORACLE)


def estimate_eta_oracle(
    f: TargetFunction,
    index_set: IndexSet,
    basis: BasisSpec,
    A: np.ndarray,
    y: np.ndarray,
    seed_or_rng,
    oversample: int = 10,
) -> float:
    """Residual norm of the oracle least-squares fit, used as an eta estimate.

    Fits coefficients on the full index set from ``oversample * n`` fresh
    measure-distributed samples and returns ||A c_oracle - y||_2 on the
    original system.  The fresh system is ~10x oversampled and therefore well
    conditioned, so the normal equations are solved by Cholesky, with a QR
    fallback if the factorization fails.
    """
    rng = _coerce_rng(seed_or_rng)
    n = len(index_set)
    m_fresh = oversample * n
    points = sample_measure(basis, m_fresh, rng)
    Phi = basis_matrix(basis, index_set, points)
    vals = f(points)
    try:
        gram = Phi.T @ Phi
        cho = scipy.linalg.cho_factor(gram)
        c_oracle = scipy.linalg.cho_solve(cho, Phi.T @ vals)
    except scipy.linalg.LinAlgError:
        c_oracle = solve_least_squares(Phi, vals)
    return float(np.linalg.norm(A @ c_oracle - y))


def estimate_eta_cv(
    A: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    eta_ref: float,
    seed_or_rng,
    *,
    grid_size: int = 11,
    log10_range: tuple[float, float] = (-3.0, 3.0),
    reconstruction_fraction: float = 0.75,
    options: SolverOptions | None = None,
) -> float:
    """Cross-validation selection of eta on a grid of multiples of ``eta_ref``.

    One random row split: ``reconstruction_fraction`` of the rows are the
    reconstruction samples, the rest score the candidates.  Each candidate
    10^kappa * eta_ref is rescaled by sqrt(m_r / m) on the reconstruction
    subproblem; the candidate minimizing the validation residual wins.
    """
    if eta_ref <= 0:
        raise ValueError("eta_ref must be > 0")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else seeding.stream(
        int(seed_or_rng), seeding.CROSS_VALIDATION
    )
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m = y.shape[0]
    perm = rng.permutation(m)
    m_r = int(round(reconstruction_fraction * m))
    if m_r < 1 or m_r >= m:
        raise ValueError("reconstruction split leaves an empty side")
    rows_r, rows_v = perm[:m_r], perm[m_r:]
    A_r, y_r = A[rows_r], y[rows_r]
    A_v, y_v = A[rows_v], y[rows_v]
    sub_scale = np.sqrt(m_r / m)

    kappas = np.linspace(log10_range[0], log10_range[1], grid_size)
    best_eta, best_score = None, np.inf
    for kappa in kappas:
        eta_cand = float(10.0**kappa * eta_ref)
        try:
            result = solve_wqcbp(A_r, y_r, w, eta_cand * sub_scale, options)
        except Exception:
            continue
        score = float(np.linalg.norm(A_v @ result.coefficients - y_v))
        if score < best_score:
            best_eta, best_score = eta_cand, score
    if best_eta is None:
        raise RuntimeError("every cross-validation candidate solve failed")
    return best_eta


def resolve_eta(
    strategy: EtaStrategy,
    f: TargetFunction,
    system: MeasurementSystem,
    w: np.ndarray,
    seed: int,
    cv_options: SolverOptions | None = None,
) -> float:
    """Turn an eta strategy into a concrete value for the given system."""
    if isinstance(strategy, FixedEta):
        return strategy.value
    oracle = estimate_eta_oracle(
        f,
        system.index_set,
        system.basis,
        system.matrix,
        system.rhs,
        seeding.stream(seed, seeding.ORACLE),
        oversample=strategy.oversample,
    )
    if isinstance(strategy, OracleEta):
        return oracle
    return estimate_eta_cv(
        system.matrix,
        system.rhs,
        w,
        oracle,
        seeding.stream(seed, seeding.CROSS_VALIDATION),
        grid_size=strategy.grid_size,
        log10_range=strategy.log10_range,
        reconstruction_fraction=strategy.reconstruction_fraction,
        options=cv_options,
    )


def fit_cs(
    f: TargetFunction,
    d: int,
    k: int,
    family: Family | str,
    m: int,
    alpha: float = 1.0,
    eta: EtaStrategy | float = FixedEta(0.0),
    seed: int = 0,
    *,
    noise_level: float = 0.0,
    options: SolverOptions | None = None,
    cv_options: SolverOptions | None = None,
    max_cells: int | None = DEFAULT_MAX_CELLS,
) -> Surrogate:
    """Compressed-sensing fit on the order-k hyperbolic cross from m samples.

    Optimization weights are the intrinsic weights raised to ``alpha``
    (alpha = 1 is the recommended choice, alpha = 0 is unweighted l1).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    strategy = FixedEta(float(eta)) if isinstance(eta, (int, float)) else eta
    basis = BasisSpec(Family(family), d)
    index_set = hyperbolic_cross(d, k, max_cells=max_cells)
    points = sample_measure(basis, m, seeding.stream(seed, seeding.POINTS))
    system = assemble(f, index_set, basis, points)
    if noise_level > 0:
        system = add_noise(system, noise_level, seeding.stream(seed, seeding.NOISE))
    u = intrinsic_weights(index_set, basis)
    w = u**alpha
    eta_value = resolve_eta(strategy, f, system, w, seed, cv_options=cv_options)
    result = solve_wqcbp(system.matrix, system.rhs, w, eta_value, options)
    provenance = {
        "estimator": "cs",
        "strategy": type(strategy).__name__,
        "eta": float(eta_value),
        "alpha": float(alpha),
        "m": int(m),
        "k": int(k),
        "seed": int(seed),
        "noise_level": float(noise_level),
        "iterations": result.iterations,
        "converged": result.converged,
        "residual_norm": result.residual_norm,
        "objective": result.objective,
    }
    return Surrogate(basis, index_set, result.coefficients, provenance)


def fit_oracle_ls(
    f: TargetFunction,
    support: IndexSet,
    family: Family | str,
    m: int,
    seed: int = 0,
) -> Surrogate:
    """Least-squares fit on a known support from m fresh measure samples."""
    if m < len(support):
        raise ValueError("need m >= |S| samples for the oracle least-squares fit")
    basis = BasisSpec(Family(family), support.dim)
    points = sample_measure(basis, m, seeding.stream(seed, seeding.POINTS))
    Phi = basis_matrix(basis, support, points)
    coeffs = solve_least_squares(Phi, f(points))
    provenance = {
        "estimator": "oracle_ls",
        "m": int(m),
        "seed": int(seed),
    }
    return Surrogate(basis, support, coeffs, provenance)


def best_lower_kterm(
    coefficients: np.ndarray,
    index_set: IndexSet,
    k: int,
    u: np.ndarray,
    mode: str = "greedy",
    *,
    max_sets: int = 1_000_000,
) -> tuple[IndexSet, float]:
    """Best weighted-l1 approximation of c by a vector supported on a lower set.

    ``exact`` exhausts every lower set of cardinality <= k (guarded); ``greedy``
    grows the set from the origin, always adding the admissible frontier index
    with the largest u_i |c_i| (ties broken toward smaller graded-lex order).
    Returns the chosen set and the attained weighted-l1 remainder.
    """
    c = np.asarray(coefficients, dtype=float)
    w = np.asarray(u, dtype=float)
    if c.shape != (len(index_set),) or w.shape != c.shape:
        raise ValueError("coefficients and weights must align with the index set")
    if k < 1:
        raise ValueError("k must be >= 1")
    d = index_set.dim
    pos = index_set.position()
    value = {idx: w[j] * abs(c[j]) for idx, j in pos.items()}
    total = float(sum(value.values()))

    if mode == "exact":
        best_set, best_captured = None, -1.0
        for s in enumerate_lower_sets(d, k, max_sets=max_sets):
            captured = sum(value.get(idx, 0.0) for idx in s)
            if captured > best_captured + 1e-15:
                best_set, best_captured = s, captured
        assert best_set is not None
        return best_set, total - best_captured

    if mode != "greedy":
        raise ValueError(f"unknown mode {mode!r}")
    zero = (0,) * d
    members = {zero}
    captured = value.get(zero, 0.0)
    while len(members) < k:
        candidates = [idx for idx in lower_frontier(members, d) if idx in pos]
        if not candidates:
            break
        # max on (value, negated glex key) prefers the smaller glex index among ties
        best = max(
            candidates,
            key=lambda idx: (value[idx], -glex_key(idx)[0], [-g for g in idx]),
        )
        members.add(best)
        captured += value[best]
    chosen = IndexSet.build(sorted(members, key=glex_key), dim=d)
    return chosen, total - captured
