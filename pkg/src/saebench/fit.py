"""Variance-component estimation, GLS regression, and benchmarked EB estimates.

The fitting pipeline for the two-level area model
``theta_hat_i = x_i' beta + u_i + e_i`` with Var(e_i) = D_i known and
Var(u_i) = sigma_u2 unknown:

1. moment estimator  sigma_tilde = [sum(uhat_i^2) - sum(D_i (1 - h_ii))] / (m - p)
   with OLS residuals uhat_i, truncated at zero to give sigma_hat;
2. GLS coefficients  beta_gls = (X' V^-1 X)^-1 X' V^-1 theta_hat,
   V = Diag(sigma_hat + D_i);
3. shrinkage  B_i = D_i / (sigma_hat + D_i) and the EB estimate
   eb_i = (1 - B_i) theta_hat_i + B_i x_i' beta_gls;
4. additive benchmarking: every eb_i is shifted by the common offset
   t - sum(w_i eb_i), where t = sum(w_i theta_hat_i), so the weighted
   aggregate of the adjusted estimates matches the direct aggregate.

All operations are pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import SingularNormalEquations
from .model import Dataset

# sigma_hat below this multiple of the median sampling variance triggers the
# near-zero-variance warning (bootstrap MSE estimates are unreliable there).
NEAR_ZERO_FACTOR = 0.05

NEAR_ZERO_WARNING = (
    "variance component is near zero relative to the sampling variances; "
    "bootstrap MSE estimates are unreliable in this regime"
)


@dataclass(frozen=True)
class VarianceComponent:
    """Moment estimate of the between-area variance, before and after truncation."""

    sigma_tilde: float
    sigma_hat: float
    truncated: bool

    @classmethod
    def from_sigma_tilde(cls, sigma_tilde: float) -> "VarianceComponent":
        return cls(
            sigma_tilde=float(sigma_tilde),
            sigma_hat=max(0.0, float(sigma_tilde)),
            truncated=sigma_tilde < 0.0,
        )


@dataclass(frozen=True)
class ModelFit:
    """Fitted quantities; benchmark fields are None until :func:`benchmark` runs."""

    variance: VarianceComponent
    beta_ols: np.ndarray
    beta_gls: np.ndarray
    shrinkage: np.ndarray
    marginal_variances: np.ndarray
    eb_estimates: np.ndarray
    near_zero_variance: bool
    warnings: tuple[str, ...]
    benchmark_target: float | None = None
    benchmark_offset: float | None = None
    benchmarked_estimates: np.ndarray | None = None


def _gram_cholesky(design: np.ndarray, variances: np.ndarray):
    """Cholesky factor of X' V^-1 X; raises SingularNormalEquations on failure."""
    inv_v = 1.0 / variances
    gram = (design.T * inv_v) @ design
    try:
        return cho_factor(gram, lower=True)
    except LinAlgError as exc:
        raise SingularNormalEquations(str(exc)) from exc


def _ols_beta(ds: Dataset) -> np.ndarray:
    factor = _gram_cholesky(ds.design, np.ones(ds.m))
    return cho_solve(factor, ds.design.T @ ds.direct_estimates)


def estimate_sigma_moment(ds: Dataset) -> VarianceComponent:
    """Method-of-moments variance component from OLS residuals.

    ``sigma_tilde`` may be negative; ``sigma_hat = max(0, sigma_tilde)``.
    """
    q, _ = np.linalg.qr(ds.design)
    resid = ds.direct_estimates - q @ (q.T @ ds.direct_estimates)
    leverage = np.einsum("ij,ij->i", q, q)
    d_term = float(ds.sampling_variances @ (1.0 - leverage))
    sigma_tilde = (float(resid @ resid) - d_term) / (ds.m - ds.p)
    return VarianceComponent.from_sigma_tilde(sigma_tilde)


def gls_beta(ds: Dataset, sigma_u2: float) -> np.ndarray:
    """GLS coefficients at a given variance component (sigma_u2 >= 0)."""
    if sigma_u2 < 0.0:
        raise ValueError("sigma_u2 must be non-negative")
    v = sigma_u2 + ds.sampling_variances
    factor = _gram_cholesky(ds.design, v)
    return cho_solve(factor, ds.design.T @ (ds.direct_estimates / v))


def bayes_estimates(ds: Dataset, sigma_u2: float) -> np.ndarray:
    """Shrinkage estimates treating sigma_u2 as known.

    Used by the simulation lab as an oracle; plugging in sigma_hat
    reproduces the EB estimates exactly.
    """
    beta = gls_beta(ds, sigma_u2)
    b = ds.sampling_variances / (sigma_u2 + ds.sampling_variances)
    return (1.0 - b) * ds.direct_estimates + b * (ds.design @ beta)


def eb_estimates(ds: Dataset, vc: VarianceComponent) -> ModelFit:
    """EB point estimates at the plug-in variance component.

    Returns a partial ModelFit; benchmark fields stay None until
    :func:`benchmark`.
    """
    s2 = vc.sigma_hat
    v = s2 + ds.sampling_variances
    b = ds.sampling_variances / v
    beta_g = gls_beta(ds, s2)
    eb = (1.0 - b) * ds.direct_estimates + b * (ds.design @ beta_g)
    near_zero = s2 < NEAR_ZERO_FACTOR * float(np.median(ds.sampling_variances))
    warnings = (NEAR_ZERO_WARNING,) if near_zero else ()
    return ModelFit(
        variance=vc,
        beta_ols=_ols_beta(ds),
        beta_gls=beta_g,
        shrinkage=b,
        marginal_variances=v,
        eb_estimates=eb,
        near_zero_variance=near_zero,
        warnings=warnings,
    )


def benchmark(fit: ModelFit, ds: Dataset) -> ModelFit:
    """Shift all EB estimates by a common offset so the weighted aggregate
    equals the weighted aggregate of the direct estimates."""
    w = ds.normalized_weights
    target = float(w @ ds.direct_estimates)
    offset = target - float(w @ fit.eb_estimates)
    return replace(
        fit,
        benchmark_target=target,
        benchmark_offset=offset,
        benchmarked_estimates=fit.eb_estimates + offset,
    )


def fit_model(ds: Dataset) -> ModelFit:
    """Full pipeline: moment estimator, GLS, EB estimates, benchmarking."""
    vc = estimate_sigma_moment(ds)
    return benchmark(eb_estimates(ds, vc), ds)
