"""Parametric bootstrap MSE estimation for EB and benchmarked EB estimators.

For each replicate b the fitted model is resampled:

    u_i* ~ N(0, sigma_hat),  theta_hat_i* = x_i' beta_gls + u_i* + e_i*,
    e_i* ~ N(0, D_i)

and the whole estimation chain is rerun on the bootstrap sample: moment
estimator sigma_star(b) (truncated at zero, truncations counted), GLS
coefficients beta_star(b) at sigma_star(b), shrinkage B_i(sigma_star(b)).
The re-estimated shrinkage is then applied to the ORIGINAL direct
estimates,

    eb_star_i(b) = (1 - B_i*) theta_hat_i + B_i* x_i' beta_star(b),

so E*[(eb_star - eb)^2] measures the extra variability from estimating
(beta, sigma_u2).  The bias-corrected estimators are

    v_boot_i   = 2[g1+g2]_i(sigma_hat) - E*[g1+g2]_i(sigma_star)
                 + E*[(eb_star_i - eb_i)^2]
    v_b_boot_i = v_boot_i + 2 g4(sigma_hat) - E*[g4(sigma_star)]

The benchmark correction is computed once and added to every area, so
v_b_boot - v_boot is exactly constant across areas.  Both estimators can
go negative when sigma_hat is at or near zero; negatives are reported
as-is (flagged) unless truncation is requested.

Determinism contract: replicate b draws from
``default_rng(SeedSequence([base_seed, b]))`` and consumes exactly two
standard-normal vectors of length m (first scaled by sqrt(sigma_hat) for
u*, second by sqrt(D_i) for e*).  Replicates are processed in fixed
blocks of ``BLOCK`` regardless of worker count, block outputs land in
index-ordered arrays, and reductions run over those arrays, so results
are byte-identical for any number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BootstrapUnstable, ConfigError
from .fit import ModelFit
from .model import Dataset
from .mse import mse_components

# replicates per vectorized batch; fixed so block boundaries never depend
# on the worker count
BLOCK = 512

BETA_MODES = ("refit_gls", "original_gls", "original_ols")

_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count, stream seed, and estimator variants."""

    replicates: int
    base_seed: int
    truncate_negative: bool = False
    # which coefficients enter eb_star: refit_gls re-estimates beta from
    # each bootstrap sample; original_gls keeps the observed-data GLS
    # coefficients so eb_star varies only through the re-estimated
    # variance component (the construction whose large-B limit is the
    # g5 formula); original_ols keeps the observed-data OLS coefficients
    beta_mode: str = "refit_gls"

    def __post_init__(self):
        if self.replicates < 2:
            raise ConfigError("bootstrap replicates must be at least 2")
        if not 0 <= self.base_seed < _SEED_LIMIT:
            raise ConfigError("base_seed must fit in an unsigned 64-bit integer")
        if self.beta_mode not in BETA_MODES:
            raise ConfigError(
                f"beta_mode must be one of {BETA_MODES}, got {self.beta_mode!r}"
            )


@dataclass(frozen=True)
class BootstrapResult:
    """Per-area bootstrap MSE estimates and replicate bookkeeping.

    negative_flags records the sign of v_b_boot before any truncation.
    truncation_count is the number of replicates whose re-estimated
    variance component hit the zero floor; aborted counts replicates
    dropped for singular normal equations.
    """

    v_boot: np.ndarray
    v_b_boot: np.ndarray
    mean_g5_empirical: np.ndarray
    negative_flags: np.ndarray
    truncation_count: int
    near_zero_warning: bool
    aborted: int


def resolve_workers(requested: int | None = None) -> int:
    """Worker count after applying the SAE_BENCH_THREADS cap.

    Results never depend on the outcome; the cap only limits concurrency.
    """
    cap = os.environ.get("SAE_BENCH_THREADS")
    limit = int(cap) if cap else None
    if requested is None:
        requested = os.cpu_count() or 1
    if limit is not None:
        requested = min(requested, limit)
    return max(1, requested)


def replicate_stream(base_seed: int, index: int) -> np.random.Generator:
    """The stream for replicate `index`; a function of (base_seed, index) only."""
    return np.random.default_rng(np.random.SeedSequence([base_seed, index]))


def draw_bootstrap_sample(
    ds: Dataset, fit: ModelFit, stream: np.random.Generator
) -> np.ndarray:
    """One bootstrap draw of the direct estimates from the fitted model."""
    u = np.sqrt(fit.variance.sigma_hat) * stream.standard_normal(ds.m)
    e = np.sqrt(ds.sampling_variances) * stream.standard_normal(ds.m)
    return ds.design @ fit.beta_gls + u + e


def g5_analytic(ds: Dataset, fit: ModelFit) -> np.ndarray:
    """Large-B limit of E*[(eb_star - eb)^2]:
    B_i^4 D_i^-2 (theta_hat_i - x_i' beta_gls)^2 at sigma_hat."""
    resid = ds.direct_estimates - ds.design @ fit.beta_gls
    b = fit.shrinkage
    return b**4 / ds.sampling_variances**2 * resid**2


class _ReplicateBuffers:
    """Index-ordered per-replicate outputs; filled block by block."""

    def __init__(self, n: int, m: int):
        self.g12_star = np.zeros((n, m))
        self.g4_star = np.zeros(n)
        self.sq_dev = np.zeros((n, m))
        self.truncated = np.zeros(n, dtype=bool)
        self.aborted = np.zeros(n, dtype=bool)


def _gram_inverses(
    g: np.ndarray, aborted: np.ndarray
) -> np.ndarray:
    """Batched inverse of the p x p normal-equation matrices.

    A singular matrix anywhere makes the batched call fail, so fall back
    to per-replicate inversion and mark only the offenders aborted.
    """
    try:
        return np.linalg.inv(g)
    except np.linalg.LinAlgError:
        out = np.zeros_like(g)
        for k in range(g.shape[0]):
            try:
                out[k] = np.linalg.inv(g[k])
            except np.linalg.LinAlgError:
                aborted[k] = True
        return out


def _run_block(
    ds: Dataset,
    fit: ModelFit,
    cfg: BootstrapConfig,
    q_ols: np.ndarray,
    d_term: float,
    start: int,
    stop: int,
    buf: _ReplicateBuffers,
) -> None:
    """Compute replicates [start, stop) into the shared buffers."""
    x = ds.design
    d = ds.sampling_variances
    m, p = ds.m, ds.p
    nb = stop - start

    theta_star = np.empty((nb, m))
    for k in range(nb):
        theta_star[k] = draw_bootstrap_sample(
            ds, fit, replicate_stream(cfg.base_seed, start + k)
        )

    # moment estimator on each bootstrap sample, truncated at zero
    resid = theta_star - (theta_star @ q_ols) @ q_ols.T
    rss = np.einsum("bm,bm->b", resid, resid)
    sigma_tilde = (rss - d_term) / (m - p)
    sigma_star = np.maximum(0.0, sigma_tilde)
    buf.truncated[start:stop] = sigma_tilde <= 0.0

    v_star = sigma_star[:, None] + d
    inv_v = 1.0 / v_star
    gram = np.einsum("bm,mj,mk->bjk", inv_v, x, x)
    aborted = np.zeros(nb, dtype=bool)
    gram_inv = _gram_inverses(gram, aborted)

    if cfg.beta_mode == "refit_gls":
        rhs = np.einsum("bm,mj->bj", theta_star * inv_v, x)
        beta_star = np.einsum("bjk,bk->bj", gram_inv, rhs)
        synth = beta_star @ x.T
    elif cfg.beta_mode == "original_gls":
        synth = np.broadcast_to(x @ fit.beta_gls, (nb, m))
    else:
        synth = np.broadcast_to(x @ fit.beta_ols, (nb, m))

    b_star = d / v_star
    eb_star = (1.0 - b_star) * ds.direct_estimates + b_star * synth
    sq_dev = np.square(eb_star - fit.eb_estimates)

    h_diag = np.einsum("mj,bjk,mk->bm", x, gram_inv, x)
    g12 = sigma_star[:, None] * b_star + b_star * b_star * h_diag

    wb = ds.normalized_weights * b_star
    t1 = np.einsum("bm,bm->b", wb * wb, v_star)
    q_vec = wb @ x
    g4_star = t1 - np.einsum("bj,bjk,bk->b", q_vec, gram_inv, q_vec)

    if aborted.any():
        g12[aborted] = 0.0
        sq_dev[aborted] = 0.0
        g4_star[aborted] = 0.0
        buf.truncated[start:stop] &= ~aborted

    buf.g12_star[start:stop] = g12
    buf.g4_star[start:stop] = g4_star
    buf.sq_dev[start:stop] = sq_dev
    buf.aborted[start:stop] = aborted


def bootstrap_mse(
    ds: Dataset,
    fit: ModelFit,
    cfg: BootstrapConfig,
    workers: int | None = None,
) -> BootstrapResult:
    """Bootstrap MSE estimates for the EB and benchmarked EB estimators.

    Raises BootstrapUnstable when more than 1% of replicates abort with
    singular normal equations.
    """
    n = cfg.replicates
    q_ols, _ = np.linalg.qr(ds.design)
    leverage = np.einsum("ij,ij->i", q_ols, q_ols)
    d_term = float(ds.sampling_variances @ (1.0 - leverage))

    buf = _ReplicateBuffers(n, ds.m)
    blocks = [(s, min(s + BLOCK, n)) for s in range(0, n, BLOCK)]
    nworkers = resolve_workers(workers)
    if nworkers == 1 or len(blocks) == 1:
        for start, stop in blocks:
            _run_block(ds, fit, cfg, q_ols, d_term, start, stop, buf)
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            jobs = [
                pool.submit(_run_block, ds, fit, cfg, q_ols, d_term, start, stop, buf)
                for start, stop in blocks
            ]
            for job in jobs:
                job.result()

    n_aborted = int(buf.aborted.sum())
    if n_aborted > 0.01 * n:
        raise BootstrapUnstable(n_aborted, n)
    n_eff = n - n_aborted

    # aborted rows were zeroed, so index-ordered sums over the full
    # buffers are worker-count invariant
    e_g12 = buf.g12_star.sum(axis=0) / n_eff
    e_g4 = float(buf.g4_star.sum()) / n_eff
    mean_sq = buf.sq_dev.sum(axis=0) / n_eff

    comp = mse_components(ds, fit.variance.sigma_hat)
    v_boot = 2.0 * (comp.g1 + comp.g2) - e_g12 + mean_sq
    v_b_boot = v_boot + (2.0 * comp.g4 - e_g4)

    negative_flags = v_b_boot < 0.0
    if cfg.truncate_negative:
        v_boot = np.maximum(0.0, v_boot)
        v_b_boot = np.maximum(0.0, v_b_boot)

    return BootstrapResult(
        v_boot=v_boot,
        v_b_boot=v_b_boot,
        mean_g5_empirical=mean_sq,
        negative_flags=negative_flags,
        truncation_count=int(buf.truncated.sum()),
        near_zero_warning=fit.near_zero_variance,
        aborted=n_aborted,
    )
