"""CSV dataset ingestion, report emission, and simulation config loading.

Dataset files are UTF-8 CSV with header columns

    area_id, direct_estimate, sampling_variance, weight, x1..xp

in any column order; p is inferred from the contiguous x1..xp block.
`weight` may be omitted only when equal weights are requested.  Floats
are serialized with 17 significant digits so a written dataset reads
back bit-identically.

Reports mirror the published state-table layout: identification and
point-estimate columns first, then the variance/MSE columns, with a
two-decimal `.rounded` sibling written next to CSV files (the rounded
view is how such tables are usually published; the full-precision view
is the one whose invariants are machine-checkable).
"""

from __future__ import annotations

import csv
import json
import re
import sys
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapResult
from .datasets import load_saipe_1997
from .errors import (
    ConfigError,
    DuplicateArea,
    EmptyDataset,
    EmptyReport,
    MissingColumn,
    NonNumericCell,
    UnknownColumn,
    ValidationError,
)
from .fit import ModelFit
from .model import Dataset, dataset_from_arrays
from .mse import MseReport
from .simulate import ScalingRow, SimulationConfig, SimulationSummary, synthetic_design

_FIXED_COLUMNS = ("area_id", "direct_estimate", "sampling_variance")
_X_NAME = re.compile(r"^x([1-9][0-9]*)$")


def _fmt(value: float) -> str:
    """Shortest decimal form that round-trips a float64 exactly."""
    return "%.17g" % float(value)


def _open_out(path):
    if path is None:
        return nullcontext(sys.stdout)
    return open(path, "w", encoding="utf-8", newline="")


def read_dataset_csv(path, equal_weights: bool = False) -> Dataset:
    """Load a dataset file; with equal_weights the weight column is
    optional and ignored in favor of uniform 1/m."""
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset() from None
        data = [row for row in reader if row]

    seen: set[str] = set()
    x_indices: dict[int, int] = {}
    col_of: dict[str, int] = {}
    for pos, name in enumerate(header):
        if name in seen:
            raise UnknownColumn(f"{name} (duplicated)")
        seen.add(name)
        match = _X_NAME.match(name)
        if match:
            x_indices[int(match.group(1))] = pos
        elif name in _FIXED_COLUMNS or name == "weight":
            col_of[name] = pos
        else:
            raise UnknownColumn(name)

    for name in _FIXED_COLUMNS:
        if name not in col_of:
            raise MissingColumn(name)
    has_weight = "weight" in col_of
    if not has_weight and not equal_weights:
        raise MissingColumn("weight")
    if not x_indices:
        raise MissingColumn("x1")
    p = max(x_indices)
    for k in range(1, p + 1):
        if k not in x_indices:
            raise MissingColumn(f"x{k}")

    if not data:
        raise EmptyDataset()
    m = len(data)

    def cell(row_no: int, pos: int, name: str) -> float:
        raw = data[row_no][pos]
        try:
            return float(raw)
        except ValueError:
            raise NonNumericCell(row_no + 1, name) from None

    area_ids: list[str] = []
    ids_seen: set[str] = set()
    y = np.empty(m)
    d = np.empty(m)
    design = np.empty((m, p))
    w = np.full(m, 1.0 / m) if not has_weight or equal_weights else np.empty(m)
    for i, row in enumerate(data):
        if len(row) != len(header):
            raise ValidationError(
                f"data row {i + 1} has {len(row)} fields, expected {len(header)}"
            )
        area = row[col_of["area_id"]]
        if area in ids_seen:
            raise DuplicateArea(area)
        ids_seen.add(area)
        area_ids.append(area)
        y[i] = cell(i, col_of["direct_estimate"], "direct_estimate")
        d[i] = cell(i, col_of["sampling_variance"], "sampling_variance")
        if has_weight and not equal_weights:
            w[i] = cell(i, col_of["weight"], "weight")
        for k in range(1, p + 1):
            design[i, k - 1] = cell(i, x_indices[k], f"x{k}")

    return dataset_from_arrays(design, y, d, w, area_ids=area_ids)


def write_dataset_csv(ds: Dataset, path) -> None:
    """Write a dataset with full-precision floats (exact round-trip)."""
    header = list(_FIXED_COLUMNS) + ["weight"] + [f"x{k}" for k in range(1, ds.p + 1)]
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.m):
            writer.writerow(
                [ds.area_ids[i], _fmt(ds.direct_estimates[i]),
                 _fmt(ds.sampling_variances[i]), _fmt(ds.raw_weights[i])]
                + [_fmt(v) for v in ds.design[i]]
            )


@dataclass(frozen=True)
class ReportRow:
    """One output row in the published-table layout."""

    area_id: str
    direct_estimate: float
    eb_estimate: float
    benchmarked_estimate: float
    direct_variance: float
    mse_eb: float | None = None
    mse_benchmarked: float | None = None
    mse_boot: float | None = None
    mse_b_boot: float | None = None
    negative_flag: bool | None = None


_REPORT_COLUMNS = (
    "area_id",
    "direct_estimate",
    "eb_estimate",
    "benchmarked_estimate",
    "direct_variance",
    "mse_eb",
    "mse_benchmarked",
    "mse_boot",
    "mse_b_boot",
    "negative_flag",
)


def report_rows(
    ds: Dataset,
    fit: ModelFit,
    mse: MseReport | None = None,
    boot: BootstrapResult | None = None,
) -> list[ReportRow]:
    """Assemble output rows; MSE/bootstrap columns appear when supplied."""
    rows = []
    for i in range(ds.m):
        rows.append(
            ReportRow(
                area_id=ds.area_ids[i],
                direct_estimate=float(ds.direct_estimates[i]),
                eb_estimate=float(fit.eb_estimates[i]),
                benchmarked_estimate=float(fit.benchmarked_estimates[i]),
                direct_variance=float(ds.sampling_variances[i]),
                mse_eb=None if mse is None else float(mse.mse_pr[i]),
                mse_benchmarked=(
                    None if mse is None else float(mse.mse_benchmarked[i])
                ),
                mse_boot=None if boot is None else float(boot.v_boot[i]),
                mse_b_boot=None if boot is None else float(boot.v_b_boot[i]),
                negative_flag=(
                    None if boot is None else bool(boot.negative_flags[i])
                ),
            )
        )
    return rows


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _cell_text(value, decimals: int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    return _fmt(value) if decimals is None else f"{value:.{decimals}f}"


def _write_report_csv(rows, columns, fh, decimals: int | None) -> None:
    writer = csv.writer(fh)
    writer.writerow(columns)
    for row in rows:
        writer.writerow(
            [_cell_text(getattr(row, c), decimals) for c in columns]
        )


def write_report(
    rows: list[ReportRow],
    format: str = "csv",
    path=None,
    summary: dict | None = None,
) -> None:
    """Emit a report to `path` (or stdout).

    CSV output carries full-precision values; when writing to a file a
    two-decimal `<name>.rounded<ext>` sibling is written as well.  JSON
    output bundles the rows with the summary object.
    """
    if not rows:
        raise EmptyReport()
    columns = [
        c
        for c in _REPORT_COLUMNS
        if c in ("area_id",) or any(getattr(r, c) is not None for r in rows)
    ]
    if format == "json":
        doc = {
            "areas": [
                {c: _jsonable(getattr(r, c)) for c in columns} for r in rows
            ],
            "summary": {k: _jsonable(v) for k, v in (summary or {}).items()},
        }
        with _open_out(path) as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        with _open_out(path) as fh:
            _write_report_csv(rows, columns, fh, decimals=None)
        if path is not None:
            target = Path(path)
            rounded = target.with_name(target.stem + ".rounded" + target.suffix)
            with open(rounded, "w", encoding="utf-8", newline="") as fh:
                _write_report_csv(rows, columns, fh, decimals=2)
    else:
        raise ConfigError(f"unknown report format {format!r}")


def load_simulation_config(path) -> SimulationConfig:
    """Build a SimulationConfig from a JSON document.

    Fields: beta_true (list), sigma_u2_true, sampling_variances (list or
    "saipe1997"), design (row-major list of lists or {"m","p","seed"} for
    the synthetic intercept+normal design), weights (list or "equal"),
    replicates, base_seed.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    required = (
        "beta_true",
        "sigma_u2_true",
        "sampling_variances",
        "design",
        "weights",
        "replicates",
        "base_seed",
    )
    for name in required:
        if name not in doc:
            raise ConfigError(f"missing config field {name!r}")

    design = doc["design"]
    if isinstance(design, dict):
        for key in ("m", "p", "seed"):
            if key not in design:
                raise ConfigError(f"synthetic design needs field {key!r}")
        design = synthetic_design(
            int(design["m"]), int(design["p"]), int(design["seed"])
        )
    else:
        design = np.asarray(design, dtype=np.float64)
        if design.ndim != 2:
            raise ConfigError("design must be a list of equal-length rows")
    m = design.shape[0]

    variances = doc["sampling_variances"]
    if variances == "saipe1997":
        variances = load_saipe_1997().var_direct
        if m != len(variances):
            raise ConfigError(
                f"design has {m} rows but the saipe1997 variances have {len(variances)}"
            )
    elif isinstance(variances, str):
        raise ConfigError(f"unknown sampling_variances source {variances!r}")

    weights = doc["weights"]
    if weights == "equal":
        weights = np.full(m, 1.0 / m)
    elif isinstance(weights, str):
        raise ConfigError(f"unknown weights source {weights!r}")

    try:
        return SimulationConfig(
            beta_true=np.asarray(doc["beta_true"], dtype=np.float64),
            sigma_u2_true=float(doc["sigma_u2_true"]),
            sampling_variances=np.asarray(variances, dtype=np.float64),
            design=design,
            weights=np.asarray(weights, dtype=np.float64),
            replicates=int(doc["replicates"]),
            base_seed=int(doc["base_seed"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc


def write_simulation_summary(
    summary: SimulationSummary, format: str = "csv", path=None
) -> None:
    """Per-area comparison table (plot data) plus run-level counters."""
    m = len(summary.empirical_mse_eb)
    columns = [
        "area",
        "empirical_mse_direct",
        "empirical_mse_eb",
        "empirical_mse_bm",
        "mean_analytic_mse_bm",
        "mean_analytic_mse_pr",
    ]
    if summary.mean_bootstrap_mse_bm is not None:
        columns.append("mean_bootstrap_mse_bm")
    counters = {
        "replicates_run": summary.replicates_run,
        "zero_variance_replicates": summary.zero_variance_replicates,
        "aborted": summary.aborted,
    }
    if format == "json":
        areas = []
        for i in range(m):
            row = {c: _jsonable(getattr(summary, c)[i]) for c in columns[1:]}
            row["area"] = i + 1
            areas.append(row)
        with _open_out(path) as fh:
            json.dump({"areas": areas, "summary": counters}, fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        with _open_out(path) as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for i in range(m):
                writer.writerow(
                    [str(i + 1)]
                    + [_fmt(getattr(summary, c)[i]) for c in columns[1:]]
                )
    else:
        raise ConfigError(f"unknown report format {format!r}")


def write_scaling_table(
    rows: list[ScalingRow], format: str = "csv", path=None
) -> None:
    if not rows:
        raise EmptyReport()
    columns = ("m", "mean_g1", "mean_g2", "mean_g3", "g4", "mse_inflation")
    if format == "json":
        doc = {
            "rows": [
                {c: _jsonable(getattr(r, c)) for c in columns} for r in rows
            ]
        }
        with _open_out(path) as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    elif format == "csv":
        with _open_out(path) as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for r in rows:
                writer.writerow(
                    [str(r.m)] + [_fmt(getattr(r, c)) for c in columns[1:]]
                )
    else:
        raise ConfigError(f"unknown report format {format!r}")
