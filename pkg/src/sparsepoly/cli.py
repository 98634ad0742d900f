"""Command-line interface for index sets, one-shot fits, and batch experiments."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import seeding
from .diagnostics import empirical_gram_min_eig, error_l2_mc, error_linf_mc, qu_constant
from .estimators import CrossValidationEta, FixedEta, OracleEta, fit_cs
from .experiment import (
    PRESETS,
    ExperimentConfig,
    load_config,
    preset_config,
    run_experiment,
    test_function,
    write_records,
)
from .multiindex import DEFAULT_MAX_CELLS, hyperbolic_cross, intrinsic_weights
from .polybasis import BasisSpec, Family, basis_matrix, sample_measure

EXPERIMENT_KINDS = {
    "error-vs-m": "error_vs_m",
    "qu-table": "qu_table",
    "noise-comparison": "noise_comparison",
    "eta-sweep": "eta_sweep",
}


def _add_experiment_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, help="TOML or JSON config file")
    sub.add_argument("--scale", choices=("paper", "desk", "smoke"), default=None,
                     help="preset scale (default: desk unless --config is given)")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("--out", type=Path, required=True, help="output CSV path")
    sub.add_argument("--trials", type=int, default=None, help="trial count override")
    sub.add_argument("--workers", type=int, default=None, help="worker pool size")
    sub.add_argument("--allow-nonconverged", action="store_true",
                     help="exit 0 even when some solves hit the iteration cap")
    sub.add_argument("--no-wall-time", action="store_true",
                     help="write wall_ms as 0 for byte-reproducible output")


def _experiment_config(kind: str, args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
        if config.kind != kind:
            raise SystemExit(f"config kind {config.kind!r} does not match subcommand {kind!r}")
        if args.scale is not None:
            raise SystemExit("--scale and --config are mutually exclusive")
    else:
        config = preset_config(kind, args.scale or "desk")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.no_wall_time:
        overrides["record_wall_time"] = False
    return config.with_overrides(**overrides)


def _cmd_experiment(kind: str, args: argparse.Namespace) -> int:
    config = _experiment_config(kind, args)
    records = run_experiment(config)
    out = write_records(records, args.out)
    nonconverged = sum(1 for r in records if not r.converged)
    print(f"wrote {len(records)} rows to {out} ({nonconverged} non-converged)")
    if nonconverged and not args.allow_nonconverged:
        print("some solves did not converge; pass --allow-nonconverged to accept", file=sys.stderr)
        return 1
    return 0


def _cmd_index_set(args: argparse.Namespace) -> int:
    max_cells = None if args.no_guard else args.max_cells
    index_set = hyperbolic_cross(args.d, args.k, max_cells=max_cells)
    text = index_set.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {len(index_set)} indices to {args.out}")
    else:
        print(text)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    strategy = {
        "fixed": FixedEta(args.eta),
        "oracle": OracleEta(),
        "cv": CrossValidationEta(),
    }[args.eta_strategy]
    f = test_function(args.function, args.d)
    surrogate = fit_cs(
        f, args.d, args.k, args.family, args.m,
        alpha=args.alpha, eta=strategy, seed=args.seed,
        noise_level=args.noise, max_cells=None,
    )
    report = dict(surrogate.provenance)
    if args.l2_samples > 0:
        report["l2_error"] = error_l2_mc(
            f, surrogate, args.l2_samples, seeding.stream(args.seed, seeding.ERROR_L2)
        )
        report["linf_error"] = error_linf_mc(
            f, surrogate, args.l2_samples, seeding.stream(args.seed, seeding.ERROR_LINF)
        )
    if args.out:
        Path(args.out).write_text(surrogate.to_json() + "\n")
        report["surrogate_path"] = str(args.out)
    print(json.dumps(report, indent=2))
    return 0 if surrogate.provenance["converged"] or args.allow_nonconverged else 1


def _cmd_diagnostics(args: argparse.Namespace) -> int:
    basis = BasisSpec(Family(args.family), args.d)
    index_set = hyperbolic_cross(args.d, args.k, max_cells=None)
    u = intrinsic_weights(index_set, basis)
    qus = []
    for trial in range(args.trials):
        rng = seeding.stream(args.seed, seeding.POINTS, trial)
        points = sample_measure(basis, args.m, rng)
        A = basis_matrix(basis, index_set, points) / np.sqrt(args.m)
        qus.append(qu_constant(A, index_set, basis))
    gram = empirical_gram_min_eig(
        basis, index_set, args.gram_m, args.gram_trials,
        seeding.stream(args.seed, seeding.POINTS, 10_000),
    )
    doc = {
        "family": args.family,
        "d": args.d,
        "k": args.k,
        "n": len(index_set),
        "m": args.m,
        "trials": args.trials,
        "qu_mean": float(np.mean(qus)),
        "qu_std": float(np.std(qus)),
        "lambda_weighted_cardinality": float(np.sum(u * u)),
        "gram_min_eig": gram,
        "gram_min_eig_expected": 1.0 - 1.0 / len(index_set),
        "gram_m": args.gram_m,
        "gram_trials": args.gram_trials,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsepoly",
        description="Sparse polynomial recovery experiments on the hypercube",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("index-set", help="emit a hyperbolic-cross index set as JSON")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-cells", type=int, default=DEFAULT_MAX_CELLS)
    p.add_argument("--no-guard", action="store_true", help="disable the memory guard")
    p.add_argument("--out", type=Path)

    p = subs.add_parser("fit", help="one-shot compressed-sensing fit of a test function")
    p.add_argument("--function", choices=("f1", "f2", "f3"), required=True)
    p.add_argument("--family", choices=("chebyshev", "legendre"), required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--eta-strategy", choices=("fixed", "oracle", "cv"), default="fixed")
    p.add_argument("--eta", type=float, default=0.0, help="value for the fixed strategy")
    p.add_argument("--noise", type=float, default=0.0, help="additive noise norm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2-samples", type=int, default=10_000)
    p.add_argument("--out", type=Path, help="write the surrogate as JSON")
    p.add_argument("--allow-nonconverged", action="store_true")

    for name in EXPERIMENT_KINDS:
        p = subs.add_parser(name, help=f"run the {name.replace('-', ' ')} experiment")
        _add_experiment_args(p)

    p = subs.add_parser("diagnostics", help="robustness and conditioning diagnostics")
    p.add_argument("--family", choices=("chebyshev", "legendre"), default="chebyshev")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--gram-m", type=int, default=4)
    p.add_argument("--gram-trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "index-set":
        return _cmd_index_set(args)
    if args.command == "fit":
        return _cmd_fit(args)
    if args.command == "diagnostics":
        return _cmd_diagnostics(args)
    return _cmd_experiment(EXPERIMENT_KINDS[args.command], args)


if __name__ == "__main__":
    raise SystemExit(main())
