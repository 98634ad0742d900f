"""Declarative experiment runner emitting plot-ready CSV.

Each experiment kind maps a config to a deterministic list of trial records:
``error_vs_m`` (recovery error against sample count), ``qu_table`` (robustness
constant per basis and m), ``noise_comparison`` (eta strategies under additive
noise), and ``eta_sweep`` (error as a function of the residual bound).
Records are keyed streams of a master seed, so identical configs reproduce
identical rows regardless of worker scheduling.
"""

from __future__ import annotations

import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import seeding
from .diagnostics import error_l2_mc, error_linf_mc, qu_constant
from .estimators import (
    Surrogate,
    estimate_eta_cv,
    estimate_eta_oracle,
)
from .measurement import TargetFunction, add_noise, assemble
from .multiindex import IndexSet, hyperbolic_cross, intrinsic_weights
from .polybasis import BasisSpec, Family, basis_matrix, sample_measure
from .solvers import ETA_FLOOR, SolverOptions, solve_wqcbp

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

CSV_COLUMNS = (
    "experiment,basis,d,k,n,alpha,m,trial,eta_strategy,eta,"
    "l2_error,linf_error,iterations,converged,seed,wall_ms"
).split(",")

QU_COLUMNS = "experiment,basis,d,k,n,m,trial,qu,sigma_min,seed,wall_ms".split(",")


# ---------------------------------------------------------------------------
# test functions


def _f1(Z: np.ndarray) -> np.ndarray:
    d = Z.shape[1]
    half = d // 2
    dims = np.arange(1, d + 1)
    numer = np.cos(16.0 * Z[:, half:] / 2.0 ** dims[half:]).prod(axis=1)
    denom = (1.0 - Z[:, :half] / 4.0 ** dims[:half]).prod(axis=1)
    return numer / denom


def _f2(Z: np.ndarray) -> np.ndarray:
    d = Z.shape[1]
    return np.exp(-Z.sum(axis=1) / (2.0 * d))


def _f3(Z: np.ndarray) -> np.ndarray:
    d = Z.shape[1]
    return np.exp(-np.cos(Z).sum(axis=1) / (8.0 * d))


def test_function(function_id: str, d: int) -> TargetFunction:
    """Named benchmark functions; ``f1`` mixes decaying rational and oscillatory
    factors (needs even d), ``f2``/``f3`` are smooth exponentials."""
    if function_id == "f1":
        if d % 2 != 0:
            raise ValueError("f1 requires an even dimension")
        return TargetFunction(_f1, name="f1")
    if function_id == "f2":
        return TargetFunction(_f2, name="f2")
    if function_id == "f3":
        return TargetFunction(_f3, name="f3")
    raise ValueError(f"unknown test function id {function_id!r}")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    families: tuple[str, ...] = ("chebyshev",)
    d: int = 2
    k: int = 5
    m_grid: tuple[int, ...] = (20, 40)
    trials: int = 3
    alphas: tuple[float, ...] = (0.0, 1.0)
    function_id: str = "f2"
    eta_strategy: str = "fixed"
    fixed_eta: float = 0.0
    noise_level: float = 0.0
    seed: int = 0
    # solver knobs
    max_iterations: int = 100_000
    tolerance: float = 1e-8
    step_ratio: float = 1e4
    cv_max_iterations: int = 4000
    # error estimation
    l2_samples: int = 20_000
    linf_samples: int = 100_000
    # eta sweep grid
    eta_grid_size: int = 31
    eta_log10_range: tuple[float, float] = (-5.0, 1.0)
    # execution
    workers: int = 1
    record_wall_time: bool = True

    def __post_init__(self):
        if self.kind not in PRESETS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(b <= a for a, b in zip(self.m_grid, self.m_grid[1:])) or not self.m_grid:
            raise ValueError("m_grid must be nonempty and strictly increasing")
        for fam in self.families:
            Family(fam)

    def solver_options(self, telemetry=None) -> SolverOptions:
        return SolverOptions(
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            step_ratio=self.step_ratio,
            telemetry=telemetry,
        )

    def cv_options(self) -> SolverOptions:
        return SolverOptions(
            max_iterations=self.cv_max_iterations,
            tolerance=self.tolerance,
            step_ratio=self.step_ratio,
        )

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self


_TUPLE_FIELDS = {"families": str, "m_grid": int, "alphas": float, "eta_log10_range": float}


def config_from_dict(doc: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    clean = dict(doc)
    for name, cast in _TUPLE_FIELDS.items():
        if name in clean:
            clean[name] = tuple(cast(v) for v in clean[name])
    return ExperimentConfig(**clean)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a config from a TOML or JSON file (by extension, JSON fallback)."""
    p = Path(path)
    data = p.read_bytes()
    if p.suffix.lower() == ".toml":
        doc = tomllib.loads(data.decode())
    else:
        doc = json.loads(data.decode())
    return config_from_dict(doc)


_FULL_M_GRID = (125, 250, 375, 500, 625, 750, 875, 1000)

PRESETS: dict[str, dict[str, dict]] = {
    "error_vs_m": {
        "paper": dict(
            families=("legendre",), d=8, k=23, m_grid=_FULL_M_GRID, trials=50,
            alphas=(0.0, 0.5, 1.0, 2.0), function_id="f2",
        ),
        "desk": dict(
            families=("legendre",), d=8, k=23, m_grid=_FULL_M_GRID[:4], trials=10,
            alphas=(0.0, 1.0), function_id="f2", linf_samples=20_000,
        ),
        "smoke": dict(
            families=("chebyshev",), d=2, k=10, m_grid=(10, 16, 24), trials=3,
            alphas=(0.0, 1.0), function_id="f2", l2_samples=2000, linf_samples=2000,
            max_iterations=20_000,
        ),
    },
    "qu_table": {
        "paper": dict(
            families=("chebyshev", "legendre"), d=8, k=23, m_grid=_FULL_M_GRID, trials=50,
        ),
        "desk": dict(
            families=("chebyshev", "legendre"), d=8, k=23, m_grid=_FULL_M_GRID[:4], trials=10,
        ),
        "smoke": dict(
            families=("chebyshev", "legendre"), d=2, k=6, m_grid=(8, 12), trials=2,
        ),
    },
    "noise_comparison": {
        "paper": dict(
            families=("chebyshev", "legendre"), d=8, k=21, m_grid=_FULL_M_GRID, trials=50,
            alphas=(0.0, 1.0), function_id="f3", noise_level=1e-3,
        ),
        "desk": dict(
            families=("chebyshev",), d=8, k=21, m_grid=(250,), trials=10,
            alphas=(1.0,), function_id="f3", noise_level=1e-3,
            linf_samples=0, max_iterations=30_000,
        ),
        "smoke": dict(
            families=("chebyshev",), d=2, k=9, m_grid=(16,), trials=2,
            alphas=(1.0,), function_id="f3", noise_level=1e-3,
            l2_samples=2000, linf_samples=0, max_iterations=10_000, cv_max_iterations=2000,
        ),
    },
    "eta_sweep": {
        "paper": dict(
            families=("chebyshev", "legendre"), d=8, k=21, m_grid=(500,), trials=50,
            alphas=(0.0, 1.0), function_id="f3", noise_level=1e-3,
        ),
        "desk": dict(
            families=("chebyshev",), d=8, k=21, m_grid=(250,), trials=10,
            alphas=(1.0,), function_id="f3", noise_level=1e-3,
            linf_samples=0, max_iterations=30_000,
        ),
        "smoke": dict(
            families=("chebyshev",), d=2, k=9, m_grid=(18,), trials=2,
            alphas=(1.0,), function_id="f3", noise_level=1e-3,
            l2_samples=2000, linf_samples=0, eta_grid_size=7,
            max_iterations=10_000, cv_max_iterations=2000,
        ),
    },
}


def preset_config(kind: str, scale: str = "desk") -> ExperimentConfig:
    if kind not in PRESETS:
        raise ValueError(f"unknown experiment kind {kind!r}")
    if scale not in PRESETS[kind]:
        raise ValueError(f"unknown scale {scale!r} for {kind}")
    return ExperimentConfig(kind=kind, **PRESETS[kind][scale])


# ---------------------------------------------------------------------------
# records


@dataclass
class TrialRecord:
    experiment: str
    basis: str
    d: int
    k: int
    n: int
    alpha: float
    m: int
    trial: int
    eta_strategy: str
    eta: float
    l2_error: float
    linf_error: float
    iterations: int
    converged: bool
    seed: int
    wall_ms: float

    def row(self) -> list[str]:
        return [
            self.experiment,
            self.basis,
            str(self.d),
            str(self.k),
            str(self.n),
            repr(float(self.alpha)),
            str(self.m),
            str(self.trial),
            self.eta_strategy,
            repr(float(self.eta)),
            repr(float(self.l2_error)),
            repr(float(self.linf_error)),
            str(self.iterations),
            "true" if self.converged else "false",
            str(self.seed),
            repr(float(self.wall_ms)),
        ]


def _task_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence(entropy=int(master), spawn_key=tuple(path)).generate_state(1, dtype=np.uint64)[0])


def _run_tasks(tasks: list[tuple[tuple, Callable[[], list]]], workers: int) -> list:
    """Execute tasks (possibly concurrently) and gather results in key order."""
    if workers <= 1:
        results = [(key, fn()) for key, fn in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(key, pool.submit(fn)) for key, fn in tasks]
        results = [(key, fut.result()) for key, fut in futures]
    results.sort(key=lambda kv: kv[0])
    out: list = []
    for _, items in results:
        out.extend(items)
    return out


def _elapsed_ms(t0: float, config: ExperimentConfig) -> float:
    return (time.perf_counter() - t0) * 1e3 if config.record_wall_time else 0.0


# ---------------------------------------------------------------------------
# experiment kinds


def _prepare(config: ExperimentConfig, family: str):
    basis = BasisSpec(Family(family), config.d)
    index_set = hyperbolic_cross(config.d, config.k, max_cells=None)
    u = intrinsic_weights(index_set, basis)
    return basis, index_set, u


def _errors(config, f, surrogate, task_seed) -> tuple[float, float]:
    l2 = error_l2_mc(f, surrogate, config.l2_samples, seeding.stream(task_seed, seeding.ERROR_L2))
    if config.linf_samples > 0:
        linf = error_linf_mc(
            f, surrogate, config.linf_samples, seeding.stream(task_seed, seeding.ERROR_LINF)
        )
    else:
        linf = math.nan
    return l2, linf


def run_error_vs_m(config: ExperimentConfig) -> list[TrialRecord]:
    """Fit with the configured (usually fixed-eta) strategy across the m grid."""
    f = test_function(config.function_id, config.d)
    opts = config.solver_options()
    tasks = []
    for fi, family in enumerate(config.families):
        basis, index_set, u = _prepare(config, family)
        for mi, m in enumerate(config.m_grid):
            for trial in range(config.trials):
                key = (fi, mi, trial)

                def task(family=family, basis=basis, index_set=index_set, u=u, m=m, trial=trial, fi=fi, mi=mi):
                    ts = _task_seed(config.seed, fi, mi, trial)
                    t0 = time.perf_counter()
                    points = sample_measure(basis, m, seeding.stream(ts, seeding.POINTS))
                    system = assemble(f, index_set, basis, points)
                    if config.noise_level > 0:
                        system = add_noise(system, config.noise_level, seeding.stream(ts, seeding.NOISE))
                    records = []
                    for alpha in config.alphas:
                        w = u**alpha
                        eta_val = max(config.fixed_eta, ETA_FLOOR)
                        result = solve_wqcbp(system.matrix, system.rhs, w, eta_val, opts)
                        surrogate = Surrogate(basis, index_set, result.coefficients, {})
                        l2, linf = _errors(config, f, surrogate, ts)
                        records.append(
                            TrialRecord(
                                config.kind, family, config.d, config.k, len(index_set),
                                alpha, m, trial, "fixed", eta_val, l2, linf,
                                result.iterations, result.converged, ts, _elapsed_ms(t0, config),
                            )
                        )
                    return records

                tasks.append((key, task))
    records = _run_tasks(tasks, config.workers)
    records.sort(key=lambda r: (config.families.index(r.basis), r.alpha, r.m, r.trial))
    return records


def run_qu_table(config: ExperimentConfig) -> list[TrialRecord]:
    """Robustness constant Q_u(A) per (basis, m) over independent draws."""
    tasks = []
    for fi, family in enumerate(config.families):
        basis, index_set, u = _prepare(config, family)
        lam_u = float(np.sum(u * u))
        n = len(index_set)
        for mi, m in enumerate(config.m_grid):
            for trial in range(config.trials):
                key = (fi, mi, trial)

                def task(family=family, basis=basis, index_set=index_set, lam_u=lam_u, n=n, m=m, trial=trial, fi=fi, mi=mi):
                    ts = _task_seed(config.seed, fi, mi, trial)
                    t0 = time.perf_counter()
                    points = sample_measure(basis, m, seeding.stream(ts, seeding.POINTS))
                    A = basis_matrix(basis, index_set, points) / np.sqrt(m)
                    qu, sigma_min = qu_constant(A, index_set, basis, return_sigma=True)
                    rec = TrialRecord(
                        config.kind, family, config.d, config.k, n, math.nan, m, trial,
                        "none", math.nan, qu, sigma_min, 0, True, ts, _elapsed_ms(t0, config),
                    )
                    return [rec]

                tasks.append((key, task))
    records = _run_tasks(tasks, config.workers)
    records.sort(key=lambda r: (config.families.index(r.basis), r.m, r.trial))
    return records


def run_noise_comparison(config: ExperimentConfig) -> list[TrialRecord]:
    """Compare eta strategies on noisy data, plus a noiseless baseline."""
    if config.noise_level <= 0:
        raise ValueError("noise_comparison requires noise_level > 0")
    f = test_function(config.function_id, config.d)
    opts = config.solver_options()
    cv_opts = config.cv_options()
    tasks = []
    for fi, family in enumerate(config.families):
        basis, index_set, u = _prepare(config, family)
        for mi, m in enumerate(config.m_grid):
            for trial in range(config.trials):
                key = (fi, mi, trial)

                def task(family=family, basis=basis, index_set=index_set, u=u, m=m, trial=trial, fi=fi, mi=mi):
                    ts = _task_seed(config.seed, fi, mi, trial)
                    t0 = time.perf_counter()
                    points = sample_measure(basis, m, seeding.stream(ts, seeding.POINTS))
                    clean = assemble(f, index_set, basis, points)
                    noisy = add_noise(clean, config.noise_level, seeding.stream(ts, seeding.NOISE))
                    eta_oracle = estimate_eta_oracle(
                        f, index_set, basis, noisy.matrix, noisy.rhs,
                        seeding.stream(ts, seeding.ORACLE),
                    )
                    records = []
                    for alpha in config.alphas:
                        w = u**alpha
                        eta_cv = estimate_eta_cv(
                            noisy.matrix, noisy.rhs, w, eta_oracle,
                            seeding.stream(ts, seeding.CROSS_VALIDATION), options=cv_opts,
                        )
                        runs = [
                            ("noiseless", clean.rhs, ETA_FLOOR),
                            ("fixed", noisy.rhs, max(config.fixed_eta, ETA_FLOOR)),
                            ("oracle", noisy.rhs, eta_oracle),
                            ("cv", noisy.rhs, eta_cv),
                        ]
                        for label, rhs, eta_val in runs:
                            result = solve_wqcbp(noisy.matrix, rhs, w, eta_val, opts)
                            surrogate = Surrogate(basis, index_set, result.coefficients, {})
                            l2, linf = _errors(config, f, surrogate, ts)
                            records.append(
                                TrialRecord(
                                    config.kind, family, config.d, config.k, len(index_set),
                                    alpha, m, trial, label, eta_val, l2, linf,
                                    result.iterations, result.converged, ts,
                                    _elapsed_ms(t0, config),
                                )
                            )
                    return records

                tasks.append((key, task))
    records = _run_tasks(tasks, config.workers)
    order = {"noiseless": 0, "fixed": 1, "oracle": 2, "cv": 3}
    records.sort(
        key=lambda r: (config.families.index(r.basis), r.alpha, r.m, r.trial, order[r.eta_strategy])
    )
    return records


def run_eta_sweep(config: ExperimentConfig) -> list[TrialRecord]:
    """Recovery error against eta on a log grid, with per-trial eta estimates."""
    if config.noise_level <= 0:
        raise ValueError("eta_sweep requires noise_level > 0")
    f = test_function(config.function_id, config.d)
    opts = config.solver_options()
    cv_opts = config.cv_options()
    lo, hi = config.eta_log10_range
    etas = [float(10.0**kappa) for kappa in np.linspace(lo, hi, config.eta_grid_size)]
    tasks = []
    for fi, family in enumerate(config.families):
        basis, index_set, u = _prepare(config, family)
        for mi, m in enumerate(config.m_grid):
            for trial in range(config.trials):
                key = (fi, mi, trial)

                def task(family=family, basis=basis, index_set=index_set, u=u, m=m, trial=trial, fi=fi, mi=mi):
                    ts = _task_seed(config.seed, fi, mi, trial)
                    t0 = time.perf_counter()
                    points = sample_measure(basis, m, seeding.stream(ts, seeding.POINTS))
                    noisy = add_noise(
                        assemble(f, index_set, basis, points),
                        config.noise_level,
                        seeding.stream(ts, seeding.NOISE),
                    )
                    eta_oracle = estimate_eta_oracle(
                        f, index_set, basis, noisy.matrix, noisy.rhs,
                        seeding.stream(ts, seeding.ORACLE),
                    )
                    records = []
                    for alpha in config.alphas:
                        w = u**alpha
                        eta_cv = estimate_eta_cv(
                            noisy.matrix, noisy.rhs, w, eta_oracle,
                            seeding.stream(ts, seeding.CROSS_VALIDATION), options=cv_opts,
                        )
                        for eta_val in etas:
                            result = solve_wqcbp(noisy.matrix, noisy.rhs, w, eta_val, opts)
                            surrogate = Surrogate(basis, index_set, result.coefficients, {})
                            l2, linf = _errors(config, f, surrogate, ts)
                            records.append(
                                TrialRecord(
                                    config.kind, family, config.d, config.k, len(index_set),
                                    alpha, m, trial, "grid", eta_val, l2, linf,
                                    result.iterations, result.converged, ts,
                                    _elapsed_ms(t0, config),
                                )
                            )
                        for label, value in (("oracle", eta_oracle), ("cv", eta_cv)):
                            records.append(
                                TrialRecord(
                                    config.kind, family, config.d, config.k, len(index_set),
                                    alpha, m, trial, label, value, math.nan, math.nan,
                                    0, True, ts, _elapsed_ms(t0, config),
                                )
                            )
                    return records

                tasks.append((key, task))
    records = _run_tasks(tasks, config.workers)
    records.sort(
        key=lambda r: (
            config.families.index(r.basis), r.alpha, r.m, r.trial,
            0 if r.eta_strategy == "grid" else 1, r.eta_strategy, r.eta,
        )
    )
    return records


RUNNERS = {
    "error_vs_m": run_error_vs_m,
    "qu_table": run_qu_table,
    "noise_comparison": run_noise_comparison,
    "eta_sweep": run_eta_sweep,
}


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    return RUNNERS[config.kind](config)


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float) -> str:
    return repr(float(x))


def write_records(records: list[TrialRecord], out_path: str | Path) -> Path:
    """Write raw rows plus a companion ``.summary.csv`` of per-cell means."""
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    kind = records[0].experiment if records else ""
    if kind == "qu_table":
        lines = [",".join(QU_COLUMNS)]
        for r in records:
            lines.append(
                ",".join(
                    [
                        r.experiment, r.basis, str(r.d), str(r.k), str(r.n), str(r.m),
                        str(r.trial), _fmt(r.l2_error), _fmt(r.linf_error), str(r.seed),
                        _fmt(r.wall_ms),
                    ]
                )
            )
    else:
        lines = [",".join(CSV_COLUMNS)]
        lines.extend(",".join(r.row()) for r in records)
    out.write_text("\n".join(lines) + "\n")
    write_summary(records, out.with_suffix(".summary.csv"))
    return out


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or np.all(np.isnan(arr)):
        return math.nan, math.nan
    return float(np.mean(arr)), float(np.std(arr))


def write_summary(records: list[TrialRecord], out_path: str | Path) -> Path:
    out = Path(out_path)
    kind = records[0].experiment if records else ""
    groups: dict[tuple, list[TrialRecord]] = {}
    if kind == "qu_table":
        for r in records:
            groups.setdefault((r.basis, r.m), []).append(r)
        lines = ["experiment,basis,d,k,n,m,trials,mean_qu,std_qu"]
        for (basis, m), rs in sorted(groups.items()):
            mean, std = _mean_std([r.l2_error for r in rs])
            r0 = rs[0]
            lines.append(
                f"{r0.experiment},{basis},{r0.d},{r0.k},{r0.n},{m},{len(rs)},{_fmt(mean)},{_fmt(std)}"
            )
    else:
        for r in records:
            groups.setdefault((r.basis, r.alpha, r.m, r.eta_strategy, r.eta if kind == "eta_sweep" else None), []).append(r)
        lines = [
            "experiment,basis,d,k,n,alpha,m,eta_strategy,eta,trials,"
            "mean_l2_error,std_l2_error,mean_linf_error,std_linf_error,"
            "mean_eta,std_eta,mean_iterations,n_converged"
        ]
        for key, rs in sorted(groups.items(), key=lambda kv: tuple(str(x) for x in kv[0])):
            basis, alpha, m, strategy, eta_key = key
            r0 = rs[0]
            l2_mean, l2_std = _mean_std([r.l2_error for r in rs])
            linf_mean, linf_std = _mean_std([r.linf_error for r in rs])
            eta_mean, eta_std = _mean_std([r.eta for r in rs])
            lines.append(
                ",".join(
                    [
                        r0.experiment, basis, str(r0.d), str(r0.k), str(r0.n),
                        _fmt(alpha), str(m), strategy,
                        _fmt(eta_key) if eta_key is not None else "",
                        str(len(rs)),
                        _fmt(l2_mean), _fmt(l2_std), _fmt(linf_mean), _fmt(linf_std),
                        _fmt(eta_mean), _fmt(eta_std),
                        _fmt(float(np.mean([r.iterations for r in rs]))),
                        str(sum(1 for r in rs if r.converged)),
                    ]
                )
            )
    out.write_text("\n".join(lines) + "\n")
    return out
