"""Second-order analytic MSE approximations for EB and benchmarked EB estimates.

Component functions, all evaluated at a supplied variance component:

    g1_i = sigma_u2 * D_i / (sigma_u2 + D_i)           leading term
    g2_i = B_i^2 * h_ii(V)                              beta estimation
    g3_i = B_i^3 / D_i * Var(sigma_tilde)               variance estimation
    g4   = sum w_i^2 B_i^2 V_i - sum_ij w_i w_j B_i B_j h_ij(V)

where B_i = D_i / (sigma_u2 + D_i), V_i = sigma_u2 + D_i and
h_ij(V) = x_i' (X' V^-1 X)^-1 x_j.  The plug-in estimators are

    mse_pr_i          = g1_i + g2_i + 2 g3_i            unbenchmarked EB
    mse_benchmarked_i = g1_i + g2_i + 2 g3_i + g4       benchmarked EB

both at sigma_hat.  g4 is the same for every area: benchmarking adds a
common offset, so the extra MSE it carries is area-independent.

g4 equals the squared norm of a projection residual (see
:func:`g4_nonnegativity_certificate`), hence is non-negative whenever the
weights are; the certificate form computes it that way so the result is
non-negative by construction rather than by cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .fit import ModelFit, _gram_cholesky
from .model import Dataset

G4_METHODS = ("fast", "double_sum", "certificate")


@dataclass(frozen=True)
class MseComponents:
    """Per-area g1, g2, g3 with the shared benchmarking term g4."""

    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    g4: float
    var_sigma_tilde: float
    evaluated_at: float


@dataclass(frozen=True)
class MseReport:
    components: MseComponents
    mse_pr: np.ndarray
    mse_benchmarked: np.ndarray


def var_sigma_tilde(ds: Dataset, sigma_u2: float) -> float:
    """Asymptotic variance of the moment estimator: 2 (m-p)^-2 sum (sigma_u2 + D_k)^2."""
    v = sigma_u2 + ds.sampling_variances
    return 2.0 * float(v @ v) / (ds.m - ds.p) ** 2


class GlsHat:
    """Entries of the GLS hat kernel h_ij(V) = x_i' (X' V^-1 X)^-1 x_j.

    Factors X' V^-1 X once; `diagonal`, `value`, and `full` reuse the factor.
    """

    def __init__(self, ds: Dataset, sigma_u2: float):
        self._design = ds.design
        self._factor = _gram_cholesky(ds.design, sigma_u2 + ds.sampling_variances)
        # columns of G^-1 X': solution rows give h_ij = x_i' (G^-1 x_j)
        self._solved = cho_solve(self._factor, ds.design.T)

    def diagonal(self) -> np.ndarray:
        return np.einsum("ij,ji->i", self._design, self._solved)

    def value(self, i: int, j: int) -> float:
        return float(self._design[i] @ self._solved[:, j])

    def full(self) -> np.ndarray:
        return self._design @ self._solved


def h_value(ds: Dataset, sigma_u2: float, i: int, j: int) -> float:
    """Single entry h_ij(V); for repeated queries build a GlsHat."""
    return GlsHat(ds, sigma_u2).value(i, j)


def _shrinkage(ds: Dataset, sigma_u2: float) -> tuple[np.ndarray, np.ndarray]:
    v = sigma_u2 + ds.sampling_variances
    return ds.sampling_variances / v, v


def g4_fast(ds: Dataset, sigma_u2: float) -> float:
    """g4 via the p x p normal equations: sum w_i^2 B_i^2 V_i - q' G^-1 q
    with q = X'(w * B).  O(m p^2)."""
    b, v = _shrinkage(ds, sigma_u2)
    w = ds.normalized_weights
    wb = w * b
    t1 = float((wb * wb) @ v)
    q = ds.design.T @ wb
    factor = _gram_cholesky(ds.design, v)
    return t1 - float(q @ cho_solve(factor, q))


def g4_double_sum(ds: Dataset, sigma_u2: float) -> float:
    """g4 as the literal O(m^2) double sum over the full hat kernel."""
    b, v = _shrinkage(ds, sigma_u2)
    w = ds.normalized_weights
    wb = w * b
    t1 = float((wb * wb) @ v)
    h = GlsHat(ds, sigma_u2).full()
    return t1 - float(wb @ h @ wb)


def g4_nonnegativity_certificate(ds: Dataset, sigma_u2: float) -> float:
    """g4 as || (I - P) q_tilde ||^2 with q_tilde_i = w_i B_i V_i^(1/2) and
    P the orthogonal projector onto the columns of V^(-1/2) X.

    A squared norm, so the returned value is non-negative by construction.
    """
    b, v = _shrinkage(ds, sigma_u2)
    w = ds.normalized_weights
    wb = w * b
    root_v = np.sqrt(v)
    q_tilde = wb * root_v
    # X' V^(-1/2) q_tilde collapses to X'(w * B)
    q = ds.design.T @ wb
    factor = _gram_cholesky(ds.design, v)
    resid = q_tilde - (ds.design @ cho_solve(factor, q)) / root_v
    return float(resid @ resid)


def mse_components(
    ds: Dataset, sigma_u2: float, g4_method: str = "fast"
) -> MseComponents:
    """All analytic components at the supplied variance component."""
    if sigma_u2 < 0.0:
        raise ValueError("sigma_u2 must be non-negative")
    if g4_method not in G4_METHODS:
        raise ValueError(f"unknown g4_method {g4_method!r}; expected one of {G4_METHODS}")
    b, v = _shrinkage(ds, sigma_u2)
    g1 = sigma_u2 * b
    g2 = b * b * GlsHat(ds, sigma_u2).diagonal()
    vs = var_sigma_tilde(ds, sigma_u2)
    g3 = b**3 / ds.sampling_variances * vs
    g4_fn = {
        "fast": g4_fast,
        "double_sum": g4_double_sum,
        "certificate": g4_nonnegativity_certificate,
    }[g4_method]
    return MseComponents(
        g1=g1,
        g2=g2,
        g3=g3,
        g4=g4_fn(ds, sigma_u2),
        var_sigma_tilde=vs,
        evaluated_at=float(sigma_u2),
    )


def mse_report(ds: Dataset, sigma_u2: float, g4_method: str = "fast") -> MseReport:
    """Second-order MSE estimates for the EB and benchmarked EB estimators."""
    c = mse_components(ds, sigma_u2, g4_method=g4_method)
    mse_pr = c.g1 + c.g2 + 2.0 * c.g3
    return MseReport(components=c, mse_pr=mse_pr, mse_benchmarked=mse_pr + c.g4)


def mse_estimate(ds: Dataset, fit: ModelFit, g4_method: str = "fast") -> MseReport:
    """Plug-in MSE estimate at the fitted variance component."""
    return mse_report(ds, fit.variance.sigma_hat, g4_method=g4_method)
