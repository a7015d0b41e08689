"""Command-line entry point.

Subcommands: fit, mse, bootstrap, simulate, scaling, verify.  Reports go
to --out (or stdout) in --format csv|json; warnings and run diagnostics
go to standard error and never affect the exit code.  Exit codes: 0
success, 1 usage error, 2 data/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_mse
from .errors import NumericalError, UsageError, ValidationError
from .fit import ModelFit, fit_model
from .io import (
    load_simulation_config,
    read_dataset_csv,
    report_rows,
    write_report,
    write_scaling_table,
    write_simulation_summary,
)
from .model import Dataset, regularity_diagnostics
from .mse import mse_estimate
from .simulate import (
    SimulationConfig,
    scaling_study,
    run_simulation,
    synthetic_design,
    verify_quadform_identities,
    verify_sigma_tilde_moments,
)

_SEED_LIMIT = 2**64


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad command lines as UsageError (exit 1)."""

    def error(self, message):
        raise UsageError(message)


def _seed_value(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < _SEED_LIMIT:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _int_grid(text: str) -> list[int]:
    try:
        grid = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None
    if not grid:
        raise argparse.ArgumentTypeError("grid must name at least one size")
    return grid


def _add_output_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--out", default=None, help="output path (default: stdout)")


def _eprint(*parts) -> None:
    print(*parts, file=sys.stderr)


def _emit_diagnostics(ds: Dataset, fit: ModelFit, summary: dict, fmt: str) -> None:
    """Warnings always; numeric summary lines only when the report channel
    (csv) cannot carry them in-band."""
    for warning in fit.warnings:
        _eprint(f"warning: {warning}")
    for flag in regularity_diagnostics(ds).flags:
        _eprint(f"warning: {flag}")
    if fmt == "csv":
        for key, value in summary.items():
            if key == "warnings":
                continue
            _eprint(f"{key} = {value}")


def _fit_summary(ds: Dataset, fit: ModelFit) -> dict:
    diag = regularity_diagnostics(ds)
    return {
        "sigma_hat": fit.variance.sigma_hat,
        "sigma_tilde": fit.variance.sigma_tilde,
        "truncated": fit.variance.truncated,
        "beta_gls": [float(b) for b in fit.beta_gls],
        "benchmark_target": fit.benchmark_target,
        "benchmark_offset": fit.benchmark_offset,
        "warnings": list(fit.warnings) + list(diag.flags),
    }


def _cmd_fit(args) -> int:
    ds = read_dataset_csv(args.data, equal_weights=args.equal_weights)
    fit = fit_model(ds)
    summary = _fit_summary(ds, fit)
    write_report(report_rows(ds, fit), args.format, args.out, summary)
    _emit_diagnostics(ds, fit, summary, args.format)
    return 0


def _cmd_mse(args) -> int:
    ds = read_dataset_csv(args.data, equal_weights=args.equal_weights)
    fit = fit_model(ds)
    report = mse_estimate(ds, fit)
    summary = _fit_summary(ds, fit)
    summary["g4"] = report.components.g4
    summary["var_sigma_tilde"] = report.components.var_sigma_tilde
    write_report(report_rows(ds, fit, mse=report), args.format, args.out, summary)
    _emit_diagnostics(ds, fit, summary, args.format)
    return 0


def _cmd_bootstrap(args) -> int:
    ds = read_dataset_csv(args.data, equal_weights=args.equal_weights)
    fit = fit_model(ds)
    report = mse_estimate(ds, fit)
    cfg = BootstrapConfig(
        replicates=args.reps,
        base_seed=args.seed,
        truncate_negative=args.truncate_negative,
        beta_mode=args.beta_mode,
    )
    boot = bootstrap_mse(ds, fit, cfg)
    summary = _fit_summary(ds, fit)
    summary["g4"] = report.components.g4
    summary["bootstrap_replicates"] = cfg.replicates
    summary["truncation_count"] = boot.truncation_count
    summary["aborted"] = boot.aborted
    summary["negative_count"] = int(np.count_nonzero(boot.negative_flags))
    if boot.near_zero_warning:
        _eprint(
            "warning: bootstrap ran at a near-zero variance component; "
            "negative MSE estimates are expected"
        )
    write_report(
        report_rows(ds, fit, mse=report, boot=boot), args.format, args.out, summary
    )
    _emit_diagnostics(ds, fit, summary, args.format)
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_simulation_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    bootstrap = None
    if args.bootstrap_reps is not None:
        bootstrap = BootstrapConfig(
            replicates=args.bootstrap_reps, base_seed=cfg.base_seed
        )
    summary = run_simulation(cfg, bootstrap)
    write_simulation_summary(summary, args.format, args.out)
    _eprint(f"replicates_run = {summary.replicates_run}")
    _eprint(f"zero_variance_replicates = {summary.zero_variance_replicates}")
    _eprint(f"aborted = {summary.aborted}")
    return 0


def _cmd_scaling(args) -> int:
    cfg = load_simulation_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    rows = scaling_study(cfg, args.m_grid)
    write_scaling_table(rows, args.format, args.out)
    return 0


def _default_moment_config(seed: int) -> SimulationConfig:
    # the standing verification setup: m=100, p=2, sigma_u2=5, D ~ U(1, 9)
    m, p = 100, 2
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    return SimulationConfig(
        beta_true=np.zeros(p),
        sigma_u2_true=5.0,
        sampling_variances=rng.uniform(1.0, 9.0, m),
        design=synthetic_design(m, p, seed),
        weights=np.full(m, 1.0 / m),
        replicates=20_000,
        base_seed=seed,
    )


def _cmd_verify(args) -> int:
    if not (args.lemma3 or args.sigma_moments):
        raise UsageError("choose at least one of --lemma3 / --sigma-moments")
    results: dict[str, dict] = {}
    if args.lemma3:
        results["quadform"] = asdict(
            verify_quadform_identities(args.p_dim, args.trials, args.seed)
        )
    if args.sigma_moments:
        cfg = (
            load_simulation_config(args.config)
            if args.config
            else _default_moment_config(args.seed)
        )
        results["sigma_moments"] = asdict(verify_sigma_tilde_moments(cfg))

    if args.format == "json":
        text = json.dumps(results, indent=2) + "\n"
    else:
        lines = [
            f"{section}.{key} = {value}"
            for section, report in results.items()
            for key, value in report.items()
        ]
        text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="saebench", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = subs.add_parser("fit", help="point estimates and benchmarking")
    fit.add_argument("data", help="dataset CSV")
    fit.add_argument("--equal-weights", action="store_true")
    _add_output_options(fit)
    fit.set_defaults(handler=_cmd_fit)

    mse = subs.add_parser("mse", help="adds second-order analytic MSE columns")
    mse.add_argument("data")
    mse.add_argument("--equal-weights", action="store_true")
    _add_output_options(mse)
    mse.set_defaults(handler=_cmd_mse)

    boot = subs.add_parser("bootstrap", help="adds parametric-bootstrap MSE columns")
    boot.add_argument("data")
    boot.add_argument("--equal-weights", action="store_true")
    boot.add_argument("--reps", type=int, default=10_000)
    boot.add_argument("--seed", type=_seed_value, default=0)
    boot.add_argument("--truncate-negative", action="store_true")
    boot.add_argument(
        "--beta-mode",
        choices=("refit_gls", "original_gls", "original_ols"),
        default="refit_gls",
    )
    _add_output_options(boot)
    boot.set_defaults(handler=_cmd_bootstrap)

    sim = subs.add_parser("simulate", help="synthetic-data estimator comparison")
    sim.add_argument("--config", required=True, help="JSON study configuration")
    sim.add_argument("--bootstrap-reps", type=int, default=None)
    sim.add_argument("--seed", type=_seed_value, default=None)
    _add_output_options(sim)
    sim.set_defaults(handler=_cmd_simulate)

    scale = subs.add_parser("scaling", help="MSE components across area counts")
    scale.add_argument("--config", required=True)
    scale.add_argument("--m-grid", type=_int_grid, required=True)
    scale.add_argument("--seed", type=_seed_value, default=None)
    _add_output_options(scale)
    scale.set_defaults(handler=_cmd_scaling)

    verify = subs.add_parser("verify", help="Monte Carlo checks of moment identities")
    verify.add_argument("--lemma3", action="store_true",
                        help="quadratic-form covariance trace identities")
    verify.add_argument("--sigma-moments", action="store_true",
                        help="mean/variance of the moment estimator")
    verify.add_argument("--trials", type=int, default=1_000_000)
    verify.add_argument("--p-dim", type=int, default=3)
    verify.add_argument("--seed", type=_seed_value, default=0)
    verify.add_argument("--config", default=None,
                        help="simulation config for --sigma-moments")
    _add_output_options(verify)
    verify.set_defaults(handler=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except SystemExit as exc:  # argparse help/version paths
        return int(exc.code or 0)
    except UsageError as exc:
        _eprint(f"usage error: {exc}")
        return 1
    except (ValidationError, OSError) as exc:
        _eprint(f"error: {exc}")
        return 2
    except NumericalError as exc:
        _eprint(f"numerical error: {exc}")
        return 3


def run() -> None:
    raise SystemExit(main())
