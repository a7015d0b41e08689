"""Simulation harness: empirical MSE studies, scaling checks, and Monte Carlo
verification of the moment identities the analytic approximations rest on.

Data are generated from the two-level model

    theta_i = x_i' beta_true + u_i,   u_i ~ N(0, sigma_u2_true)
    theta_hat_i = theta_i + e_i,      e_i ~ N(0, D_i)

and every replicate reruns the full estimation chain (moment estimator,
GLS, EB, benchmarking, analytic MSE, optional nested bootstrap).  Stream
contract: replicate r of a study seeded with s draws from
``default_rng(SeedSequence([s, r, 0]))``, and a nested bootstrap inside
replicate r is seeded from ``SeedSequence([s, r, 1])``, so results are
byte-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bootstrap import BLOCK, BootstrapConfig, bootstrap_mse, resolve_workers
from .errors import ConfigError, NumericalError, SimulationUnstable
from .fit import fit_model
from .model import Dataset, _readonly, dataset_from_arrays
from .mse import mse_components, mse_report

_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class SimulationConfig:
    """True model parameters and study size for a synthetic-data run."""

    beta_true: np.ndarray
    sigma_u2_true: float
    sampling_variances: np.ndarray
    design: np.ndarray
    weights: np.ndarray
    replicates: int
    base_seed: int

    def __post_init__(self):
        object.__setattr__(self, "beta_true", _readonly(self.beta_true))
        object.__setattr__(self, "sampling_variances", _readonly(self.sampling_variances))
        object.__setattr__(self, "design", _readonly(self.design))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.design.ndim != 2:
            raise ConfigError("design must be a matrix")
        m, p = self.design.shape
        if self.beta_true.shape != (p,):
            raise ConfigError(f"beta_true must have length {p} to match the design")
        if self.sampling_variances.shape != (m,) or self.weights.shape != (m,):
            raise ConfigError("sampling_variances and weights must match the design rows")
        if m <= p:
            raise ConfigError("need more areas than regression coefficients")
        if not self.sigma_u2_true > 0.0:
            raise ConfigError("sigma_u2_true must be positive")
        if np.any(self.sampling_variances <= 0.0):
            raise ConfigError("sampling variances must be positive")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0 <= self.base_seed < _SEED_LIMIT:
            raise ConfigError("base_seed must fit in an unsigned 64-bit integer")

    @property
    def m(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class SimulationSummary:
    """Per-area averages over replicates, plus replicate bookkeeping."""

    empirical_mse_direct: np.ndarray
    empirical_mse_eb: np.ndarray
    empirical_mse_bm: np.ndarray
    mean_analytic_mse_bm: np.ndarray
    mean_analytic_mse_pr: np.ndarray
    mean_bootstrap_mse_bm: np.ndarray | None
    replicates_run: int
    zero_variance_replicates: int
    aborted: int


@dataclass(frozen=True)
class ScalingRow:
    """Analytic components at the true variance plus empirical benchmark cost."""

    m: int
    mean_g1: float
    mean_g2: float
    mean_g3: float
    g4: float
    mse_inflation: float


@dataclass(frozen=True)
class QuadformReport:
    """Trace identities for Gaussian quadratic forms vs Monte Carlo."""

    p_dim: int
    trials: int
    theory_cov_qq: float
    empirical_cov_qq: float
    abs_error_qq: float
    rel_error_qq: float
    theory_cov_q_qsq: float
    empirical_cov_q_qsq: float
    abs_error_q_qsq: float
    rel_error_q_qsq: float


@dataclass(frozen=True)
class SigmaMomentReport:
    """Monte Carlo mean and variance of the moment estimator vs theory."""

    mean_error: float
    variance_ratio: float
    mc_se_mean: float
    replicates: int


def synthetic_design(m: int, p: int, seed: int) -> np.ndarray:
    """Intercept plus p-1 standard-normal covariate columns."""
    if p < 1 or m <= p:
        raise ConfigError("need p >= 1 and m > p")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    design = np.empty((m, p))
    design[:, 0] = 1.0
    if p > 1:
        design[:, 1:] = rng.standard_normal((m, p - 1))
    return design


def generate_replicate(
    cfg: SimulationConfig, stream: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (theta, theta_hat) from the true model; u first, then e."""
    u = np.sqrt(cfg.sigma_u2_true) * stream.standard_normal(cfg.m)
    theta = cfg.design @ cfg.beta_true + u
    e = np.sqrt(cfg.sampling_variances) * stream.standard_normal(cfg.m)
    return theta, theta + e


def _replicate_seed(base_seed: int, r: int) -> int:
    """Seed for the nested bootstrap inside replicate r."""
    return int(np.random.SeedSequence([base_seed, r, 1]).generate_state(1, np.uint64)[0])


class _StudyBuffers:
    def __init__(self, n: int, m: int, with_boot: bool):
        self.sq_direct = np.zeros((n, m))
        self.sq_eb = np.zeros((n, m))
        self.sq_bm = np.zeros((n, m))
        self.analytic_bm = np.zeros((n, m))
        self.analytic_pr = np.zeros((n, m))
        self.boot_bm = np.zeros((n, m)) if with_boot else None
        self.zero_variance = np.zeros(n, dtype=bool)
        self.aborted = np.zeros(n, dtype=bool)


def _run_replicate(
    cfg: SimulationConfig,
    bootstrap: BootstrapConfig | None,
    r: int,
    buf: _StudyBuffers,
) -> None:
    stream = np.random.default_rng(np.random.SeedSequence([cfg.base_seed, r, 0]))
    theta, theta_hat = generate_replicate(cfg, stream)
    ds = dataset_from_arrays(
        cfg.design, theta_hat, cfg.sampling_variances, cfg.weights
    )
    try:
        fit = fit_model(ds)
        report = mse_report(ds, fit.variance.sigma_hat)
        if bootstrap is not None:
            bcfg = replace(bootstrap, base_seed=_replicate_seed(cfg.base_seed, r))
            buf.boot_bm[r] = bootstrap_mse(ds, fit, bcfg, workers=1).v_b_boot
    except NumericalError:
        buf.aborted[r] = True
        return

    if __debug__:
        agg = float(ds.normalized_weights @ fit.benchmarked_estimates)
        assert abs(agg - fit.benchmark_target) <= 1e-10 * max(
            1.0, abs(fit.benchmark_target)
        ), "benchmark constraint violated in replicate"

    buf.sq_direct[r] = np.square(theta_hat - theta)
    buf.sq_eb[r] = np.square(fit.eb_estimates - theta)
    buf.sq_bm[r] = np.square(fit.benchmarked_estimates - theta)
    buf.analytic_bm[r] = report.mse_benchmarked
    buf.analytic_pr[r] = report.mse_pr
    buf.zero_variance[r] = fit.variance.sigma_hat == 0.0


def run_simulation(
    cfg: SimulationConfig,
    bootstrap: BootstrapConfig | None = None,
    workers: int | None = None,
) -> SimulationSummary:
    """Replicate the data-generation/estimation cycle and average the results.

    Replicates whose fit fails numerically are dropped and counted; more
    than 1% of them raises SimulationUnstable.  A nested bootstrap runs
    single-threaded inside each replicate; parallelism is across
    replicates only.
    """
    n = cfg.replicates
    buf = _StudyBuffers(n, cfg.m, bootstrap is not None)
    nworkers = resolve_workers(workers)
    if nworkers == 1:
        for r in range(n):
            _run_replicate(cfg, bootstrap, r, buf)
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            jobs = [
                pool.submit(_run_replicate, cfg, bootstrap, r, buf)
                for r in range(n)
            ]
            for job in jobs:
                job.result()

    n_aborted = int(buf.aborted.sum())
    if n_aborted > 0.01 * n:
        raise SimulationUnstable(n_aborted, n)
    n_eff = n - n_aborted
    if n_eff == 0:
        raise SimulationUnstable(n_aborted, n)

    return SimulationSummary(
        empirical_mse_direct=buf.sq_direct.sum(axis=0) / n_eff,
        empirical_mse_eb=buf.sq_eb.sum(axis=0) / n_eff,
        empirical_mse_bm=buf.sq_bm.sum(axis=0) / n_eff,
        mean_analytic_mse_bm=buf.analytic_bm.sum(axis=0) / n_eff,
        mean_analytic_mse_pr=buf.analytic_pr.sum(axis=0) / n_eff,
        mean_bootstrap_mse_bm=(
            None if buf.boot_bm is None else buf.boot_bm.sum(axis=0) / n_eff
        ),
        replicates_run=n_eff,
        zero_variance_replicates=int(buf.zero_variance.sum()),
        aborted=n_aborted,
    )


def scaling_study(
    base: SimulationConfig,
    m_grid: list[int],
    workers: int | None = None,
) -> list[ScalingRow]:
    """Analytic MSE components across a grid of area counts.

    Each grid size resamples (D_i, x_i) rows jointly with replacement
    from the base configuration, keeping the covariate/variance pairing
    and hence the regularity structure.  Components are evaluated at the
    true variance; the empirical benchmarking cost (mean MSE_BM minus
    MSE_EB over areas) comes from a simulation at the base replicate
    count with equal weights.
    """
    rows = []
    for m in m_grid:
        if m <= base.p:
            raise ConfigError(f"grid size {m} not larger than p={base.p}")
        rng = np.random.default_rng(np.random.SeedSequence([base.base_seed, 2, m]))
        idx = rng.integers(0, base.m, size=m)
        design = base.design[idx]
        variances = base.sampling_variances[idx]
        weights = np.full(m, 1.0 / m)
        cfg = SimulationConfig(
            beta_true=base.beta_true,
            sigma_u2_true=base.sigma_u2_true,
            sampling_variances=variances,
            design=design,
            weights=weights,
            replicates=base.replicates,
            base_seed=base.base_seed,
        )
        ds = dataset_from_arrays(design, np.zeros(m), variances, weights)
        comp = mse_components(ds, base.sigma_u2_true)
        summary = run_simulation(cfg, None, workers=workers)
        inflation = float(
            np.mean(summary.empirical_mse_bm - summary.empirical_mse_eb)
        )
        rows.append(
            ScalingRow(
                m=m,
                mean_g1=float(np.mean(comp.g1)),
                mean_g2=float(np.mean(comp.g2)),
                mean_g3=float(np.mean(comp.g3)),
                g4=comp.g4,
                mse_inflation=inflation,
            )
        )
    return rows


def verify_quadform_identities(
    p_dim: int,
    trials: int,
    seed: int,
    matrices: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> QuadformReport:
    """Monte Carlo check of the quadratic-form covariance identities

        Cov(z'Az, z'Bz)     = 2 tr(A S B S)
        Cov(z'Az, (z'Bz)^2) = 4 tr(A S B S) tr(B S) + 8 tr(A S B S B S)

    for z ~ N(0, S).  By default A is a random square matrix, B a random
    symmetric matrix, and S a random SPD matrix; pass `matrices` to pin
    (A, B, S), e.g. identities at p_dim=1 give 2 and 12.
    """
    if p_dim < 1:
        raise ConfigError("p_dim must be at least 1")
    if trials < 2:
        raise ConfigError("trials must be at least 2")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    if matrices is None:
        a = rng.standard_normal((p_dim, p_dim))
        b = rng.standard_normal((p_dim, p_dim))
        b = 0.5 * (b + b.T)
        c = rng.standard_normal((p_dim, p_dim))
        sigma = c @ c.T + 0.5 * np.eye(p_dim)
    else:
        a, b, sigma = (np.asarray(mat, dtype=np.float64) for mat in matrices)

    asbs = a @ sigma @ b @ sigma
    theory_qq = 2.0 * float(np.trace(asbs))
    theory_q_qsq = 4.0 * float(np.trace(asbs)) * float(
        np.trace(b @ sigma)
    ) + 8.0 * float(np.trace(asbs @ b @ sigma))

    chol = np.linalg.cholesky(sigma)
    chunk = 100_000
    sums = np.zeros(5)  # qa, qb, qb^2, qa*qb, qa*qb^2
    done = 0
    while done < trials:
        take = min(chunk, trials - done)
        z = rng.standard_normal((take, p_dim)) @ chol.T
        qa = np.einsum("ti,ij,tj->t", z, a, z)
        qb = np.einsum("ti,ij,tj->t", z, b, z)
        qb2 = qb * qb
        sums += (qa.sum(), qb.sum(), qb2.sum(), (qa * qb).sum(), (qa * qb2).sum())
        done += take

    mean_qa, mean_qb, mean_qb2 = sums[0] / trials, sums[1] / trials, sums[2] / trials
    emp_qq = sums[3] / trials - mean_qa * mean_qb
    emp_q_qsq = sums[4] / trials - mean_qa * mean_qb2

    return QuadformReport(
        p_dim=p_dim,
        trials=trials,
        theory_cov_qq=theory_qq,
        empirical_cov_qq=float(emp_qq),
        abs_error_qq=abs(float(emp_qq) - theory_qq),
        rel_error_qq=abs(float(emp_qq) - theory_qq) / abs(theory_qq),
        theory_cov_q_qsq=theory_q_qsq,
        empirical_cov_q_qsq=float(emp_q_qsq),
        abs_error_q_qsq=abs(float(emp_q_qsq) - theory_q_qsq),
        rel_error_q_qsq=abs(float(emp_q_qsq) - theory_q_qsq) / abs(theory_q_qsq),
    )


def verify_sigma_tilde_moments(cfg: SimulationConfig) -> SigmaMomentReport:
    """Monte Carlo mean and variance of the untruncated moment estimator.

    The mean should sit at sigma_u2_true (the estimator is unbiased) and
    the variance close to its leading term 2 (m-p)^-2 sum (sigma_u2+D_k)^2.
    Replicate r draws from default_rng(SeedSequence([base_seed, r])).
    """
    q, _ = np.linalg.qr(cfg.design)
    leverage = np.einsum("ij,ij->i", q, q)
    d_term = float(cfg.sampling_variances @ (1.0 - leverage))
    denom = cfg.m - cfg.p

    n = cfg.replicates
    sigma_tilde = np.empty(n)
    theta_block = np.empty((min(BLOCK, n), cfg.m))
    for start in range(0, n, BLOCK):
        stop = min(start + BLOCK, n)
        block = theta_block[: stop - start]
        for k in range(stop - start):
            stream = np.random.default_rng(
                np.random.SeedSequence([cfg.base_seed, start + k])
            )
            _, block[k] = generate_replicate(cfg, stream)
        resid = block - (block @ q) @ q.T
        rss = np.einsum("bm,bm->b", resid, resid)
        sigma_tilde[start:stop] = (rss - d_term) / denom

    mean_error = float(np.mean(sigma_tilde)) - cfg.sigma_u2_true
    variance = float(np.var(sigma_tilde, ddof=1))
    v = cfg.sigma_u2_true + cfg.sampling_variances
    leading = 2.0 * float(v @ v) / denom**2
    return SigmaMomentReport(
        mean_error=mean_error,
        variance_ratio=variance / leading,
        mc_se_mean=float(np.sqrt(variance / n)),
        replicates=n,
    )
