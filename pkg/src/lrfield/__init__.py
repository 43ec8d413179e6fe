"""Simulation toolkit for least squares estimation on long-range dependent
Gaussian random fields observed on spheres and cube surfaces."""

__version__ = "0.1.0"

from .covariance import CovarianceModel, c2_const, cov, cov_from_spectrum, slowly_varying_L, spectral_density
from .errors import ConfigError, DomainError, LRFieldError, NumericError, ResourceError, ShapeError
from .functionals import (
    FunctionalConfig,
    WeightFunction,
    c_h_norm,
    c_r_norm,
    exact_variance,
    fourier_K,
    functional_values,
    functional_X,
    lse_estimate,
)
from .hermite import HermiteSpec, hermite_coeffs, hermite_poly, parseval_gap
from .simulation import SeedPolicy, covariance_matrix, factorize, simulate, simulate_values
from .study import StudyConfig, StudyResult, boxplot_summary, fit_log_rate, ks_statistic, run_study
from .surfaces import SurfaceCloud, SurfaceSpec, cube_points, pair_distance_density, sphere_points, surface_area
