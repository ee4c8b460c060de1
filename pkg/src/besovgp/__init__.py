"""Exact simulation and path-regularity analysis of a family of Gaussian processes.

The package covers covariance kernels for fractional, bifractional and
subfractional Brownian motion plus their smooth companion processes, exact
samplers (dense factorization, circulant embedding, spectral discretization),
covariance-level verification of the decompositions connecting the families,
and discretized Besov-Orlicz norms with statistical regularity experiments.
"""

__version__ = "0.1.0"

from .besov import (
    NormParams,
    NormReport,
    besov_orlicz_norm,
    besov_seminorm,
    evaluate_paths,
    lp_norm,
    orlicz_norm,
    shifted_lp_norm,
    ynp_statistic,
)
from .decomposition import (
    DecompositionSpec,
    IdentityReport,
    compose_paths,
    make_decomposition,
    verify_covariance_identity,
    verify_G_against_heat,
)
from .experiments import (
    ExperimentConfig,
    IncrementBoundConstants,
    IncrementBoundReport,
    MomentReport,
    RegularityReport,
    YnpReport,
    critical_exponent,
    increment_bound_constants,
    increment_variance,
    run_experiment,
    run_regularity_experiment,
    run_ynp_experiment,
    verify_increment_variance_bounds,
    verify_moment_formula,
    ynp_sup_statistic,
)
from .kernels import FAMILIES, ProcessSpec, build_covariance_matrix, covariance
from .sampling import (
    FactorizationError,
    Grid,
    PathEnsemble,
    SpectralScheme,
    cholesky_sample,
    circulant_sample_fbm,
    default_scheme,
    load_ensemble,
    sample_process,
    save_ensemble,
    scheme_covariance,
    spectral_sample_x,
)
from .specialfn import (
    DECOMPOSITION_NAMES,
    DomainError,
    QuadratureError,
    QuadratureResult,
    QuadratureSettings,
    UnsupportedRegionError,
    decomposition_constants,
    eval_CK,
    eval_CK_quadrature,
    eval_cp,
    eval_CprimeK,
    quad_improper,
)

__all__ = [
    "__version__",
    "DECOMPOSITION_NAMES",
    "DecompositionSpec",
    "DomainError",
    "ExperimentConfig",
    "FAMILIES",
    "FactorizationError",
    "Grid",
    "IdentityReport",
    "IncrementBoundConstants",
    "IncrementBoundReport",
    "MomentReport",
    "NormParams",
    "NormReport",
    "PathEnsemble",
    "ProcessSpec",
    "QuadratureError",
    "QuadratureResult",
    "QuadratureSettings",
    "RegularityReport",
    "SpectralScheme",
    "UnsupportedRegionError",
    "YnpReport",
    "besov_orlicz_norm",
    "besov_seminorm",
    "build_covariance_matrix",
    "cholesky_sample",
    "circulant_sample_fbm",
    "compose_paths",
    "covariance",
    "critical_exponent",
    "decomposition_constants",
    "default_scheme",
    "eval_CK",
    "eval_CK_quadrature",
    "eval_cp",
    "eval_CprimeK",
    "evaluate_paths",
    "increment_bound_constants",
    "increment_variance",
    "load_ensemble",
    "lp_norm",
    "make_decomposition",
    "orlicz_norm",
    "quad_improper",
    "run_experiment",
    "run_regularity_experiment",
    "run_ynp_experiment",
    "sample_process",
    "save_ensemble",
    "scheme_covariance",
    "shifted_lp_norm",
    "spectral_sample_x",
    "verify_covariance_identity",
    "verify_G_against_heat",
    "verify_increment_variance_bounds",
    "verify_moment_formula",
    "ynp_statistic",
    "ynp_sup_statistic",
]
