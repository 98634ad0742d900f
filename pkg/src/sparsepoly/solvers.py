"""Self-contained convex solvers for weighted quadratically-constrained basis pursuit.

``solve_wqcbp`` minimizes the weighted l1 norm subject to an l2 residual ball
constraint with a first-order primal-dual splitting iteration whose only
per-step ingredients are the weighted soft-threshold and the l2-ball
projection.  Least-squares and spectral utilities live here too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, IO

import numpy as np
import scipy.linalg

ETA_FLOOR = 1e-12


class RankDeficiencyError(RuntimeError):
    """A least-squares system had numerical rank below its column count."""


@dataclass
class SolverOptions:
    max_iterations: int = 100_000
    tolerance: float = 1e-8            # relative primal/dual residual target
    safety: float = 0.99               # step sizes satisfy tau*sigma*||A||^2 = safety^2
    step_ratio: float = 1e4            # sigma/tau; large values push feasibility first
    check_every: int = 20
    feasibility_rel: float = 1e-6      # converged requires ||Ad - y|| <= eta*(1+rel)+abs
    feasibility_abs: float = 1e-10
    eta_floor: float = ETA_FLOOR
    telemetry: Callable[[dict], None] | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass
class SolverResult:
    coefficients: np.ndarray
    residual_norm: float
    objective: float
    iterations: int
    converged: bool


def jsonl_telemetry(fh: IO[str]) -> Callable[[dict], None]:
    """Telemetry sink streaming one JSON object per convergence check."""

    def emit(record: dict) -> None:
        fh.write(json.dumps(record) + "\n")

    return emit


def weighted_soft_threshold(v: np.ndarray, tau: float, w: np.ndarray) -> np.ndarray:
    """Proximal map of tau * ||.||_{1,w}: componentwise shrink by tau*w."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau * np.asarray(w, dtype=float), 0.0)


def project_l2_ball(r: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of r onto the ball of given radius around center."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = np.asarray(r, dtype=float)
    delta = r - center
    nrm = float(np.linalg.norm(delta))
    if nrm <= radius:
        return r.copy()
    return center + (radius / nrm) * delta


def operator_norm(A: np.ndarray, max_iterations: int = 300, tol: float = 1e-10) -> float:
    """Power-iteration estimate of the spectral norm of A."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    if not np.any(A):
        raise ValueError("operator norm of the zero matrix is undefined here")
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iterations):
        u = A @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v = A.T @ (u / nu)
        sigma_new = float(np.linalg.norm(v))
        v = v / sigma_new
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return sigma_new
        sigma = sigma_new
    return sigma


def _validate_inputs(A, y, w, eta):
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],) or w.shape != (A.shape[1],):
        raise ValueError("shape mismatch among A, y, w")
    for name, arr in (("A", A), ("y", y), ("w", w)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains NaN or Inf")
    if not np.isfinite(eta) or eta < 0:
        raise ValueError("eta must be a finite nonnegative number")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return A, y, w, float(eta)


def solve_wqcbp(
    A: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    eta: float,
    options: SolverOptions | None = None,
) -> SolverResult:
    """Approximately minimize ||d||_{1,w} subject to ||A d - y||_2 <= eta.

    The iteration is the standard proximal saddle-point splitting with
    extrapolation parameter 1 and step sizes tau*sigma*||A||_2^2 = safety^2.
    The problem is solved in y-normalized coordinates (the minimizer is
    positively homogeneous in (y, eta), so this is exact) and declared
    converged once the relative primal and dual residuals drop below the
    tolerance and the iterate is feasible up to ``feasibility_rel/abs``.
    A requested eta of zero is floored at ``eta_floor`` to avoid an empty
    interior.  Non-convergence within the iteration cap returns the final
    iterate flagged ``converged=False``.
    """
    opts = options or SolverOptions()
    A, y, w, eta = _validate_inputs(A, y, w, eta)
    eta = max(eta, opts.eta_floor)
    m, n = A.shape

    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0 or eta >= ynorm:
        # Zero is feasible and has minimal weighted norm.
        residual = ynorm
        return SolverResult(np.zeros(n), residual, 0.0, 0, True)

    scale = ynorm
    ys = y / scale
    etas = eta / scale
    feas_tol = (eta * (1.0 + opts.feasibility_rel) + opts.feasibility_abs) / scale

    norm_a = operator_norm(A) * (1.0 + 1e-6)
    root = np.sqrt(opts.step_ratio)
    tau = opts.safety / (norm_a * root)
    sigma = opts.safety * root / norm_a

    d = np.zeros(n)
    q = np.zeros(m)
    v = np.zeros(m)       # A d, maintained incrementally
    v_old = np.zeros(m)
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        p = q + sigma * (2.0 * v - v_old)
        q_new = p - sigma * project_l2_ball(p / sigma, ys, etas)
        d_new = weighted_soft_threshold(d - tau * (A.T @ q_new), tau, w)
        v_new = A @ d_new
        if it % opts.check_every == 0 or it == opts.max_iterations:
            primal = np.linalg.norm(d - d_new) / (tau * (1.0 + np.linalg.norm(d_new)))
            dual = (
                np.linalg.norm((q - q_new) / sigma - ((v_new - v) - (v - v_old)))
                * sigma
                / (1.0 + np.linalg.norm(q_new))
            )
            feas = float(np.linalg.norm(v_new - ys))
            if opts.telemetry is not None:
                opts.telemetry(
                    {
                        "iteration": it,
                        "primal_residual": float(primal),
                        "dual_residual": float(dual),
                        "constraint_residual": feas * scale,
                    }
                )
            if primal < opts.tolerance and dual < opts.tolerance and feas <= feas_tol:
                d, v = d_new, v_new
                converged = True
                break
        d, q, v_old, v = d_new, q_new, v, v_new

    coeffs = scale * d
    residual = float(np.linalg.norm(A @ coeffs - y))
    objective = float(np.sum(w * np.abs(coeffs)))
    return SolverResult(coeffs, residual, objective, it, converged)


def solve_least_squares(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares solution of an m >= n system via rank-revealing QR.

    Raises :class:`RankDeficiencyError` when the numerical rank falls below
    the column count.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValueError("need m >= n for the least-squares estimator")
    x, _, rank, _ = scipy.linalg.lstsq(A, y, lapack_driver="gelsy")
    if rank < A.shape[1]:
        raise RankDeficiencyError(f"numerical rank {rank} below column count {A.shape[1]}")
    return x


def min_singular_value(M: np.ndarray) -> float:
    """Smallest singular value of a dense matrix."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite entries")
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def conditioning_check(A_S: np.ndarray) -> float:
    """Spectral-norm deviation ||A_S^T A_S - I||_2 of a column submatrix."""
    A_S = np.asarray(A_S, dtype=float)
    if A_S.ndim != 2 or A_S.shape[0] < A_S.shape[1]:
        raise ValueError("need m >= |S| columns for a conditioning check")
    gram = A_S.T @ A_S
    eigs = np.linalg.eigvalsh(gram)
    return float(np.max(np.abs(eigs - 1.0)))
