"""Benchmarked empirical Bayes estimation for area-level models.

Fits the two-level normal model with known sampling variances, applies
additive benchmarking so weighted aggregates match the direct survey
totals, and quantifies uncertainty three ways: second-order analytic MSE
approximations, their plug-in estimators, and parametric-bootstrap MSE
estimators.  A simulation lab checks the asymptotic claims (component
scaling, moment identities, over/undershoot behavior) by Monte Carlo.
"""

from . import errors
from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_mse,
    draw_bootstrap_sample,
    g5_analytic,
    replicate_stream,
    resolve_workers,
)
from .datasets import SaipeTable, load_saipe_1997
from .fit import (
    ModelFit,
    VarianceComponent,
    bayes_estimates,
    benchmark,
    eb_estimates,
    estimate_sigma_moment,
    fit_model,
    gls_beta,
)
from .io import (
    ReportRow,
    read_dataset_csv,
    report_rows,
    write_dataset_csv,
    write_report,
    write_scaling_table,
    write_simulation_summary,
)
from .model import (
    AreaRecord,
    Dataset,
    RegularityDiagnostics,
    dataset_from_arrays,
    regularity_diagnostics,
    validate_dataset,
)
from .mse import (
    GlsHat,
    MseComponents,
    MseReport,
    g4_double_sum,
    g4_fast,
    g4_nonnegativity_certificate,
    h_value,
    mse_components,
    mse_estimate,
    mse_report,
    var_sigma_tilde,
)
from .simulate import (
    QuadformReport,
    ScalingRow,
    SigmaMomentReport,
    SimulationConfig,
    SimulationSummary,
    generate_replicate,
    run_simulation,
    scaling_study,
    synthetic_design,
    verify_quadform_identities,
    verify_sigma_tilde_moments,
)

__version__ = "1.0.0"

__all__ = [
    "AreaRecord",
    "BootstrapConfig",
    "BootstrapResult",
    "Dataset",
    "GlsHat",
    "ModelFit",
    "MseComponents",
    "MseReport",
    "QuadformReport",
    "RegularityDiagnostics",
    "ReportRow",
    "SaipeTable",
    "ScalingRow",
    "SigmaMomentReport",
    "SimulationConfig",
    "SimulationSummary",
    "VarianceComponent",
    "bayes_estimates",
    "benchmark",
    "bootstrap_mse",
    "dataset_from_arrays",
    "draw_bootstrap_sample",
    "eb_estimates",
    "errors",
    "estimate_sigma_moment",
    "fit_model",
    "g4_double_sum",
    "g4_fast",
    "g4_nonnegativity_certificate",
    "g5_analytic",
    "generate_replicate",
    "gls_beta",
    "h_value",
    "load_saipe_1997",
    "mse_components",
    "mse_estimate",
    "mse_report",
    "read_dataset_csv",
    "regularity_diagnostics",
    "replicate_stream",
    "report_rows",
    "resolve_workers",
    "run_simulation",
    "scaling_study",
    "synthetic_design",
    "validate_dataset",
    "var_sigma_tilde",
    "verify_quadform_identities",
    "verify_sigma_tilde_moments",
    "write_dataset_csv",
    "write_report",
    "write_scaling_table",
    "write_simulation_summary",
]
