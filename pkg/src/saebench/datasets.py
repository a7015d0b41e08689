"""Bundled reference data.

The 1997 SAIPE state table ships with the package: published direct,
EB, and benchmarked EB estimates of the number of poor school-age
children (in 100,000s) for the 50 states plus DC, together with the
published MSE columns.  The underlying covariates and benchmark weights
were never published, so the table supports relation checks (constant
benchmark offset, constant MSE gap) and supplies realistic sampling
variances for simulations; it cannot reproduce the fit itself.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib.resources import files

import numpy as np

from .model import _readonly

_DATA_FILE = "saipe_1997.csv"


@dataclass(frozen=True)
class SaipeTable:
    """Columns of the published 1997 state table, in file order."""

    area: tuple[str, ...]
    direct: np.ndarray
    eb: np.ndarray
    eb_benchmarked: np.ndarray
    var_direct: np.ndarray
    mse_eb: np.ndarray
    mse_eb_benchmarked: np.ndarray
    mse_boot: np.ndarray
    mse_boot_benchmarked: np.ndarray

    @property
    def m(self) -> int:
        return len(self.area)


def load_saipe_1997() -> SaipeTable:
    """The bundled 1997 SAIPE state table (51 rows, two-decimal values)."""
    path = files("saebench").joinpath("data", _DATA_FILE)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    cols = {
        name: _readonly(np.array([float(r[name]) for r in rows]))
        for name in (
            "direct",
            "eb",
            "eb_benchmarked",
            "var_direct",
            "mse_eb",
            "mse_eb_benchmarked",
            "mse_boot",
            "mse_boot_benchmarked",
        )
    }
    return SaipeTable(area=tuple(r["area"] for r in rows), **cols)
