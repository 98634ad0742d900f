"""Error metrics and robustness/conditioning diagnostics.

Monte-Carlo L2/Linf errors, the computable robustness constant Q_u(A), the
expected-Gram minimal eigenvalue check, and small-instance restricted-isometry
constants by exhaustive support enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .estimators import Surrogate, evaluate_surrogate
from .measurement import TargetFunction
from .multiindex import (
    GuardExceeded,
    IndexSet,
    enumerate_lower_sets,
    intrinsic_weights,
)
from .polybasis import BasisSpec, basis_matrix, sample_measure
from .solvers import conditioning_check


@dataclass(frozen=True)
class ErrorReport:
    l2_error: float
    linf_error: float
    mc_points: int
    seed: int | None = None


_CHUNK = 20_000


def error_l2_mc(
    f: TargetFunction, surrogate: Surrogate, n_samples: int, rng: np.random.Generator
) -> float:
    """Monte-Carlo estimate of the L2 error under the basis measure."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    acc = 0.0
    remaining = n_samples
    while remaining > 0:
        batch = min(_CHUNK, remaining)
        Z = sample_measure(surrogate.basis, batch, rng)
        diff = f(Z) - evaluate_surrogate(surrogate, Z)
        acc += float(np.sum(diff * diff))
        remaining -= batch
    return math.sqrt(acc / n_samples)


def error_linf_mc(
    f: TargetFunction, surrogate: Surrogate, n_samples: int, rng: np.random.Generator
) -> float:
    """Maximum absolute deviation over uniform samples of the cube.

    A lower bound on the true sup norm; sampling is sequential, so for a fixed
    generator state the estimate is nondecreasing in ``n_samples``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    d = surrogate.basis.dimension
    best = 0.0
    remaining = n_samples
    while remaining > 0:
        batch = min(_CHUNK, remaining)
        Z = rng.uniform(-1.0, 1.0, size=(batch, d))
        diff = f(Z) - evaluate_surrogate(surrogate, Z)
        best = max(best, float(np.max(np.abs(diff))))
        remaining -= batch
    return best


def error_report(
    f: TargetFunction,
    surrogate: Surrogate,
    n_samples: int,
    rng_l2: np.random.Generator,
    rng_linf: np.random.Generator,
    seed: int | None = None,
) -> ErrorReport:
    return ErrorReport(
        l2_error=error_l2_mc(f, surrogate, n_samples, rng_l2),
        linf_error=error_linf_mc(f, surrogate, n_samples, rng_linf),
        mc_points=n_samples,
        seed=seed,
    )


def qu_constant(
    A: np.ndarray, index_set: IndexSet, basis, *, return_sigma: bool = False
):
    """Computable robustness constant sqrt(L / n) / sigma_min(sqrt(m/n) A^T).

    The numerator is the weighted-l1 cardinality L = sum_i u_i of the index
    set; the singular value comes from the eigen-decomposition of the m x m Gram of the
    scaled transpose (the smaller side).  Raises on rank-deficient A.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if m > n:
        raise ValueError("expected an underdetermined system (m <= n)")
    if n != len(index_set):
        raise ValueError("matrix columns do not align with the index set")
    u = intrinsic_weights(index_set, basis)
    lam_u = float(np.sum(u))
    gram = (m / n) * (A @ A.T)
    eig_min = float(np.linalg.eigvalsh(gram)[0])
    if eig_min <= 1e-28:
        raise ValueError("rank-deficient measurement matrix")
    sigma_min = math.sqrt(eig_min)
    qu = math.sqrt(lam_u / n) / sigma_min
    if return_sigma:
        return qu, sigma_min
    return qu


def empirical_gram_min_eig(
    basis: BasisSpec,
    index_set: IndexSet,
    m: int,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Smallest eigenvalue of the Monte-Carlo average of (m/n) A A^T.

    The expectation has minimal eigenvalue exactly 1 - 1/n, independent of m.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = len(index_set)
    acc = np.zeros((m, m))
    for _ in range(trials):
        points = sample_measure(basis, m, rng)
        A = basis_matrix(basis, index_set, points) / math.sqrt(m)
        acc += (m / n) * (A @ A.T)
    acc /= trials
    return float(np.linalg.eigvalsh(acc)[0])


def _admissible_supports(u2: np.ndarray, budget: float, max_supports: int):
    """All nonempty column subsets with sum of squared weights <= budget."""
    n = u2.shape[0]
    order = np.argsort(u2, kind="stable")
    sorted_u2 = u2[order]
    count = 0
    support: list[int] = []

    def rec(start: int, slack: float):
        nonlocal count
        for j in range(start, n):
            need = sorted_u2[j]
            if need > slack + 1e-12:
                break
            support.append(int(order[j]))
            count += 1
            if count > max_supports:
                raise GuardExceeded(
                    f"support enumeration exceeded {max_supports} subsets"
                )
            yield tuple(support)
            yield from rec(j + 1, slack - need)
            support.pop()

    yield from rec(0, budget)


def lower_ric_bruteforce(
    A: np.ndarray,
    index_set: IndexSet,
    k: int,
    u: np.ndarray,
    *,
    max_columns: int = 60,
    max_supports: int = 2_000_000,
) -> float:
    """Exact lower restricted-isometry constant of order k by enumeration.

    The weighted budget s(k) is the largest weighted cardinality over lower
    subsets of the index set with at most k elements (exact whenever the index
    set contains the order-k hyperbolic cross); the constant is the worst Gram
    deviation over all supports whose weighted cardinality fits the budget.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    if n != len(index_set) or np.asarray(u).shape != (n,):
        raise ValueError("matrix, index set and weights must align")
    if n > max_columns:
        raise GuardExceeded(f"brute-force RIC guarded to {max_columns} columns")
    members = set(index_set.indices)
    s_k = 0.0
    u_arr = np.asarray(u, dtype=float)
    pos = index_set.position()
    for s in enumerate_lower_sets(index_set.dim, k, max_sets=max_supports):
        if all(idx in members for idx in s):
            s_k = max(s_k, float(sum(u_arr[pos[idx]] ** 2 for idx in s)))
    delta = 0.0
    for support in _admissible_supports(u_arr**2, s_k, max_supports):
        delta = max(delta, conditioning_check(A[:, list(support)]))
    return delta


def ric_bruteforce(A: np.ndarray, k: int, *, max_supports: int = 2_000_000) -> float:
    """Classical order-k restricted-isometry constant by support enumeration."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    count = 0
    delta = 0.0
    for size in range(1, min(k, n) + 1):
        for support in combinations(range(n), size):
            count += 1
            if count > max_supports:
                raise GuardExceeded(f"support enumeration exceeded {max_supports} subsets")
            delta = max(delta, conditioning_check(A[:, list(support)]))
    return delta


def tail_term_bound(
    A: np.ndarray,
    index_set: IndexSet,
    basis: BasisSpec,
    e_norm: float,
    eta: float,
    k: int,
) -> float:
    """Computable robustness bound Q_u(A) * max(e_norm - eta, 0) * k^(alpha/2).

    This drops the theoretical log factor; alpha is 1 for Chebyshev and 2 for
    Legendre.  Zero whenever eta already dominates the truncation residual.
    """
    if e_norm < 0 or eta < 0:
        raise ValueError("norms must be nonnegative")
    excess = max(e_norm - eta, 0.0)
    if excess == 0.0:
        return 0.0
    qu = qu_constant(A, index_set, basis)
    return qu * excess * float(k) ** (basis.tail_exponent / 2.0)
