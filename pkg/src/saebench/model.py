"""Domain types, dataset validation, and regularity diagnostics.

The basic area-level model treats each small area i as contributing one
direct survey estimate with a known sampling variance D_i, a covariate
vector x_i of length p, and a (raw) benchmark weight w_i. A validated
``Dataset`` bundles the m areas, the m x p design matrix, and weights
normalized to sum to one. All types are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs

from .errors import (
    AllWeightsZero,
    EmptyDataset,
    InconsistentCovariateLength,
    NegativeWeight,
    NonFiniteValue,
    NonPositiveSamplingVariance,
    RankDeficientDesign,
    TooFewAreas,
)

# Relative pivot threshold for rank detection, on the scale of the largest
# diagonal element of X'X.
RANK_PIVOT_RTOL = 1e-10

# Heuristic multiples of the O(1/m) homogeneity conditions; exceeding them
# raises a warning flag, never an error.
LEVERAGE_FLAG_FACTOR = 4.0
WEIGHT_FLAG_FACTOR = 4.0


@dataclass(frozen=True)
class AreaRecord:
    """One small area: direct estimate, sampling variance, covariates, weight."""

    area_id: str
    direct_estimate: float
    sampling_variance: float
    covariates: tuple[float, ...]
    weight: float


@dataclass(frozen=True)
class Dataset:
    """Validated collection of m areas with design matrix and normalized weights.

    Arrays are read-only views; ``normalized_weights`` sums to one. Use
    :func:`validate_dataset` or :func:`dataset_from_arrays` to construct.
    """

    area_ids: tuple[str, ...]
    direct_estimates: np.ndarray
    sampling_variances: np.ndarray
    design: np.ndarray
    raw_weights: np.ndarray
    normalized_weights: np.ndarray
    m: int = field(init=False)
    p: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", self.design.shape[0])
        object.__setattr__(self, "p", self.design.shape[1])

    @property
    def records(self) -> list[AreaRecord]:
        """Reconstruct the per-area records (raw weights, original order)."""
        return [
            AreaRecord(
                area_id=self.area_ids[i],
                direct_estimate=float(self.direct_estimates[i]),
                sampling_variance=float(self.sampling_variances[i]),
                covariates=tuple(float(v) for v in self.design[i]),
                weight=float(self.raw_weights[i]),
            )
            for i in range(self.m)
        ]


@dataclass(frozen=True)
class RegularityDiagnostics:
    """Finite-sample stand-ins for the asymptotic homogeneity conditions."""

    d_min: float
    d_max: float
    max_leverage: float
    max_weight: float
    flags: tuple[str, ...]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _design_rank(design: np.ndarray) -> int:
    """Numerical rank of X via pivoted Cholesky of X'X.

    Pivots below RANK_PIVOT_RTOL times the largest diagonal of X'X are
    treated as zero.
    """
    gram = design.T @ design
    tol = RANK_PIVOT_RTOL * float(np.max(np.diag(gram)))
    (pstrf,) = get_lapack_funcs(("pstrf",), (gram,))
    _, _, rank, _ = pstrf(gram, lower=1, tol=tol)
    return int(rank)


def dataset_from_arrays(
    design,
    direct_estimates,
    sampling_variances,
    weights,
    area_ids=None,
) -> Dataset:
    """Validate array inputs and build a :class:`Dataset`.

    Same checks as :func:`validate_dataset`; weights are raw and get
    normalized here. ``area_ids`` defaults to "1".."m".
    """
    design = np.atleast_2d(np.asarray(design, dtype=np.float64))
    y = np.asarray(direct_estimates, dtype=np.float64).ravel()
    d = np.asarray(sampling_variances, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    m, p = design.shape
    if m == 0:
        raise EmptyDataset()
    if area_ids is None:
        area_ids = tuple(str(i + 1) for i in range(m))
    else:
        area_ids = tuple(str(a) for a in area_ids)
    if not (len(y) == len(d) == len(w) == len(area_ids) == m):
        raise InconsistentCovariateLength(area_ids[0], design.shape[1], design.shape[1])

    # vectorized happy path; fall back to a scan only to name the offender
    clean = (
        np.all(np.isfinite(y))
        and np.all(np.isfinite(d))
        and np.all(np.isfinite(design))
        and np.all(np.isfinite(w))
        and np.all(d > 0.0)
        and np.all(w >= 0.0)
    )
    if not clean:
        for i in range(m):
            if not np.isfinite(y[i]):
                raise NonFiniteValue(area_ids[i], "direct_estimate")
            if not np.isfinite(d[i]):
                raise NonFiniteValue(area_ids[i], "sampling_variance")
            if not np.all(np.isfinite(design[i])):
                raise NonFiniteValue(area_ids[i], "covariates")
            if not np.isfinite(w[i]):
                raise NonFiniteValue(area_ids[i], "weight")
            if d[i] <= 0.0:
                raise NonPositiveSamplingVariance(area_ids[i])
            if w[i] < 0.0:
                raise NegativeWeight(area_ids[i])

    if m <= p:
        raise TooFewAreas(m, p)
    rank = _design_rank(design)
    if rank < p:
        raise RankDeficientDesign(rank, p)
    w_sum = float(w.sum())
    if w_sum == 0.0:
        raise AllWeightsZero()

    return Dataset(
        area_ids=area_ids,
        direct_estimates=_readonly(y),
        sampling_variances=_readonly(d),
        design=_readonly(design),
        raw_weights=_readonly(w),
        normalized_weights=_readonly(w / w_sum),
    )


def validate_dataset(records: list[AreaRecord]) -> Dataset:
    """Check model preconditions and normalize weights.

    Raises EmptyDataset, InconsistentCovariateLength,
    NonPositiveSamplingVariance, NegativeWeight, NonFiniteValue,
    TooFewAreas, RankDeficientDesign, or AllWeightsZero.
    """
    if not records:
        raise EmptyDataset()
    p = len(records[0].covariates)
    for r in records:
        if len(r.covariates) != p:
            raise InconsistentCovariateLength(r.area_id, len(r.covariates), p)
    return dataset_from_arrays(
        design=np.array([r.covariates for r in records], dtype=np.float64).reshape(
            len(records), p
        ),
        direct_estimates=[r.direct_estimate for r in records],
        sampling_variances=[r.sampling_variance for r in records],
        weights=[r.weight for r in records],
        area_ids=[r.area_id for r in records],
    )


def regularity_diagnostics(ds: Dataset) -> RegularityDiagnostics:
    """Leverage, variance-range, and weight diagnostics with warning flags.

    Flags are advisory: the underlying conditions are asymptotic assumptions,
    not computability requirements, so nothing here raises.
    """
    q, _ = np.linalg.qr(ds.design)
    leverage = np.einsum("ij,ij->i", q, q)
    max_lev = float(leverage.max())
    max_w = float(ds.normalized_weights.max())
    flags: list[str] = []
    lev_bound = LEVERAGE_FLAG_FACTOR * ds.p / ds.m
    w_bound = WEIGHT_FLAG_FACTOR / ds.m
    if max_lev > lev_bound:
        flags.append(
            f"max leverage {max_lev:.4g} exceeds {LEVERAGE_FLAG_FACTOR:g}p/m = {lev_bound:.4g}"
        )
    if max_w > w_bound:
        flags.append(
            f"max normalized weight {max_w:.4g} exceeds {WEIGHT_FLAG_FACTOR:g}/m = {w_bound:.4g}"
        )
    if ds.m == ds.p + 1:
        flags.append("m = p + 1: moment-estimator divisor m - p equals 1")
    return RegularityDiagnostics(
        d_min=float(ds.sampling_variances.min()),
        d_max=float(ds.sampling_variances.max()),
        max_leverage=max_lev,
        max_weight=max_w,
        flags=tuple(flags),
    )
