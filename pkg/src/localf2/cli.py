"""Command-line front end.

    localf2 analyze   --data d.csv --response y --focal x2 --controls x1
    localf2 bootstrap --data d.csv --response y --focal x2 --seed 7
    localf2 lmm       --data d.csv --response y --focal x2 --group school
    localf2 blackbox  --data d.csv --response y --focal x2 --oracle-cmd "python -m my_model" --seed 7
    localf2 mc-study  --rho2-a 0.1 --rho2-ab 0.2 --n-grid 100,1000 --reps 2000 --seed 7

Exit codes: 0 success, 2 input or validation error, 3 numerical failure,
4 prediction-oracle failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import shlex
import sys

from .blackbox import PermutationConfig, SubprocessOracle, ols_oracle, permutation_local_f2
from .dataio import ModelSpec, build_design, group_by, load_csv, select
from .effectsize import BenchmarkConfig, analyze, classify
from .errors import EffectSizeError, InputError
from .multilevel import DEFINITIONS, lmm_local_f2
from .regression import fit_ols
from .report import (
    NOT_APPLICABLE,
    bootstrap_document,
    data_digest,
    document,
    effect_size_document,
    metadata,
    render_csv,
    render_json,
    render_markdown,
    stability_document,
)
from .resampling import BootstrapConfig, MonteCarloConfig, Population, bootstrap_f2_ci, monte_carlo_stability


def _names(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t] if text else []


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in _names(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in _names(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load(args):
    try:
        with open(args.data, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"--data: cannot read {args.data!r}: {exc.strerror}") from None
    return load_csv(raw, drop_missing=args.drop_missing), data_digest(raw)


def _spec(args, dataset) -> ModelSpec:
    for flag, names in (("--response", [args.response]), ("--focal", _names(args.focal)), ("--controls", _names(args.controls))):
        for name in names:
            if name not in dataset:
                raise InputError(f"{flag}: unknown column {name!r}")
    if not _names(args.focal):
        raise InputError("--focal: at least one column is required")
    return ModelSpec(args.response, tuple(_names(args.focal)), tuple(_names(args.controls)))


def _timestamp(args):
    if args.timestamp == "now":
        return datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0).isoformat()
    return args.timestamp


def _emit(doc, fmt, out):
    out.write(render_markdown(doc) if fmt == "md" else render_json(doc))


def _drop_warning(dataset):
    return [f"{dataset.dropped_rows} row(s) with missing values removed"] if dataset.dropped_rows else []


def cmd_analyze(args, out):
    if args.bootstrap is not None and args.seed is None:
        raise InputError("--seed is required with --bootstrap")
    dataset, digest = _load(args)
    spec = _spec(args, dataset)
    report = analyze(dataset, spec, BenchmarkConfig.parse(args.benchmarks), args.level)
    extra = _drop_warning(dataset)
    if args.bootstrap is not None:
        ci = bootstrap_f2_ci(dataset, spec, BootstrapConfig(args.bootstrap, args.level, args.seed), args.workers)
        report = dataclasses.replace(report, ci_f2_local=(ci.low, ci.high))
        if ci.skipped:
            extra.append(f"{ci.skipped} degenerate bootstrap replicate(s) skipped")
    meta = metadata("analyze", args.seed, digest, _timestamp(args))
    _emit(effect_size_document(report, meta, extra), args.format, out)


def cmd_bootstrap(args, out):
    dataset, digest = _load(args)
    spec = _spec(args, dataset)
    ci = bootstrap_f2_ci(dataset, spec, BootstrapConfig(args.replicates, args.level, args.seed), args.workers)
    info = {
        "label": classify(ci.estimate, BenchmarkConfig.parse(args.benchmarks)),
        "focal": list(spec.focal),
        "covariates": list(spec.covariates),
        "n": dataset.n_rows,
    }
    doc = bootstrap_document(ci, metadata("bootstrap", args.seed, digest, _timestamp(args)), info)
    doc["warnings"] = list(dict.fromkeys([*doc["warnings"], *_drop_warning(dataset)]))
    _emit(doc, args.format, out)


def cmd_lmm(args, out):
    dataset, digest = _load(args)
    if args.group not in dataset:
        raise InputError(f"--group: unknown column {args.group!r}")
    spec = _spec(args, dataset)
    report = lmm_local_f2(group_by(dataset, args.group), spec, args.definition, BenchmarkConfig.parse(args.benchmarks), args.level)
    meta = metadata("lmm", None, digest, _timestamp(args))
    _emit(effect_size_document(report, meta, _drop_warning(dataset)), args.format, out)


def cmd_blackbox(args, out):
    dataset, digest = _load(args)
    if args.response not in dataset:
        raise InputError(f"--response: unknown column {args.response!r}")
    predictors = _names(args.predictors) or [n for n in dataset.names if n != args.response]
    for name in predictors:
        if name not in dataset:
            raise InputError(f"--predictors: unknown column {name!r}")
    if args.focal not in predictors:
        raise InputError(f"--focal: column {args.focal!r} is not among the oracle's predictors")
    X = select(dataset, predictors)
    y = dataset.column(args.response)
    focal = predictors.index(args.focal)
    config = PermutationConfig(args.repeats, args.seed, args.holdout)

    if args.oracle_ols:
        _, X_full, _ = build_design(dataset, ModelSpec(args.response, tuple(predictors)))
        oracle = ols_oracle(fit_ols(X_full, y, ("(Intercept)", *predictors)))
        result = permutation_local_f2(oracle, X, y, focal, config, args.workers)
        source = "in-process OLS"
    else:
        with SubprocessOracle(shlex.split(args.oracle_cmd), predictors, timeout=args.timeout) as oracle:
            result = permutation_local_f2(oracle, X, y, focal, config)
        source = args.oracle_cmd

    benchmarks = BenchmarkConfig.parse(args.benchmarks)
    body = {
        "f2_local": result.f2,
        "spread": result.spread,
        "label": classify(result.f2, benchmarks),
        "r2_base": result.r2_base,
        "r2_permuted_mean": sum(result.r2_permuted) / len(result.r2_permuted),
        "repeats": args.repeats,
        "focal": args.focal,
        "predictors": predictors,
        "evaluation": "same-data" if args.holdout is None else f"holdout {args.holdout!r}",
        "oracle": source,
        "p": NOT_APPLICABLE,
        "intervals": NOT_APPLICABLE,
    }
    checklist = {
        "exact_p": NOT_APPLICABLE,
        "coefficient_intervals": NOT_APPLICABLE,
        "local_effect_size": result.f2,
    }
    meta = metadata("blackbox", args.seed, digest, _timestamp(args))
    doc = document("blackbox", "effect_size", meta, body, checklist, [*result.warnings, *_drop_warning(dataset)])
    _emit(doc, args.format, out)


def cmd_mc_study(args, out):
    if args.beta:
        population = Population(tuple(args.beta), args.noise_var, args.focal_count)
    else:
        if args.rho2_ab is None:
            raise InputError("--rho2-ab (or --beta) is required")
        population = Population.from_targets(args.rho2_a, args.rho2_ab, args.covariates, args.focal_count)
    config = MonteCarloConfig(population, tuple(args.n_grid), args.reps, args.seed)
    summary = monte_carlo_stability(config, workers=args.workers)
    if args.format == "csv":
        out.write(render_csv(summary))
        return
    doc = stability_document(summary, metadata("mc-study", args.seed, None, _timestamp(args)))
    _emit(doc, args.format, out)


def _common(p, data=True, formats=("json", "md")):
    if data:
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--drop-missing", action="store_true", help="delete rows holding NA / NaN / empty cells")
        p.add_argument("--response", required=True)
    p.add_argument("--benchmarks", default="0.02,0.15,0.35", help="small,medium,large f² reference points")
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--timestamp", default=None, help="'now' or a literal string recorded in the metadata")
    p.add_argument("--workers", type=int, default=1)


def _model(p):
    p.add_argument("--focal", required=True, help="focal block B, comma-separated")
    p.add_argument("--controls", default="", help="covariates A, comma-separated")
    p.add_argument("--level", type=float, default=0.95)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="localf2", description="Global and local Cohen's f² effect sizes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="OLS local f², incremental F test and intervals")
    _common(p)
    _model(p)
    p.add_argument("--bootstrap", type=int, default=None, metavar="N", help="add a bootstrap interval for f²")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bootstrap", help="case-bootstrap percentile interval for local f²")
    _common(p)
    _model(p)
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("lmm", help="random-intercept mixed model local f²")
    _common(p)
    _model(p)
    p.add_argument("--group", required=True, help="grouping column")
    p.add_argument("--definition", choices=DEFINITIONS, default="total-variance")
    p.set_defaults(func=cmd_lmm)

    p = sub.add_parser("blackbox", help="permutation local f² for a prediction oracle")
    _common(p)
    p.add_argument("--focal", required=True, help="single focal predictor")
    p.add_argument("--predictors", default="", help="columns fed to the oracle, in order (default: all but the response)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--oracle-cmd", help="command line of a child process speaking the oracle protocol")
    src.add_argument("--oracle-ols", action="store_true", help="use an in-process OLS fit as the oracle")
    p.add_argument("--timeout", type=float, default=60.0, help="seconds per batch")
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--holdout", type=float, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_blackbox)

    p = sub.add_parser("mc-study", help="Monte Carlo sampling behaviour of R², shrunken R² and f²")
    _common(p, data=False, formats=("csv", "json", "md"))
    p.add_argument("--n-grid", type=_ints, required=True)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rho2-a", type=float, default=0.0)
    p.add_argument("--rho2-ab", type=float, default=None)
    p.add_argument("--covariates", type=int, default=2, help="number of covariates in A")
    p.add_argument("--focal-count", type=int, default=1, help="number of focal predictors in B")
    p.add_argument("--beta", type=_floats, default=None, help="explicit coefficients (focal block last)")
    p.add_argument("--noise-var", type=float, default=1.0)
    p.set_defaults(func=cmd_mc_study)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except EffectSizeError as exc:
        err.write(f"localf2: error: {exc}\n")
        return exc.exit_code
    except (ValueError, ArithmeticError, AssertionError) as exc:
        err.write(f"localf2: numerical failure: {exc}\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
