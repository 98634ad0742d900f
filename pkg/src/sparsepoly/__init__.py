"""Sparse polynomial recovery on the hypercube via weighted l1 minimization.

Recovers smooth multivariate functions from pointwise samples by solving a
weighted quadratically-constrained basis pursuit over hyperbolic-cross
tensor-polynomial expansions, with oracle least-squares baselines, residual
bound (eta) estimation strategies, and reproduction-grade experiment runners.
"""

from .diagnostics import (
    ErrorReport,
    empirical_gram_min_eig,
    error_l2_mc,
    error_linf_mc,
    lower_ric_bruteforce,
    qu_constant,
    ric_bruteforce,
    tail_term_bound,
)
from .estimators import (
    CrossValidationEta,
    EtaStrategy,
    FixedEta,
    OracleEta,
    Surrogate,
    best_lower_kterm,
    estimate_eta_cv,
    estimate_eta_oracle,
    evaluate_surrogate,
    fit_cs,
    fit_oracle_ls,
)
from .measurement import (
    MeasurementSystem,
    TargetFunction,
    add_noise,
    assemble,
    load_system,
    polynomial_target,
    save_system,
    truncation_residual,
)
from .multiindex import (
    GuardExceeded,
    IndexSet,
    enumerate_lower_sets,
    hc_cardinality,
    hc_cardinality_bound,
    hyperbolic_cross,
    intrinsic_weight,
    intrinsic_weights,
    is_lower,
    max_lower_weighted_cardinality,
    weighted_cardinality,
)
from .polybasis import (
    BasisSpec,
    Family,
    basis_matrix,
    eval_1d,
    eval_tensor,
    sample_measure,
    sup_norm_consistency,
)
from .solvers import (
    RankDeficiencyError,
    SolverOptions,
    SolverResult,
    conditioning_check,
    min_singular_value,
    operator_norm,
    project_l2_ball,
    solve_least_squares,
    solve_wqcbp,
    weighted_soft_threshold,
)

__version__ = "0.1.0"
