"""Tail probabilities of the largest eigenvalue of Wishart matrices via the
expected Euler characteristic, with Monte Carlo and ODE-series companions."""

from .central import (
    CentralSpec,
    approximation_error_asymptotic,
    expected_euler_central,
    expected_euler_central_density,
    expected_euler_central_m3n3,
    tail_asymptotic_leading,
)
from .linalg import (
    LinalgError,
    NonConvergenceError,
    WishartParams,
    batched_singular_values,
    canonicalize,
    lq_decomposition,
    singular_values,
    sym_eigendecomposition,
)
from .montecarlo import (
    McConfig,
    estimate_eigen_tails,
    estimate_expected_euler,
    tail_ratio_curve,
)
from .noncentral2x2 import (
    Params2x2,
    QuadratureResult,
    QuadratureSpec,
    expected_euler_2x2,
    expected_euler_2x2_rational,
)
from .odeseries import (
    ExtrapolationModel,
    OdeSpec,
    SeriesSolution,
    evaluate_series,
    fit_extrapolation,
    parse_ode,
    radius_estimate,
    series_solution,
)
from .special import (
    DomainError,
    euler_constants,
    gaussian_tail_u,
    hyp1f1_terminating,
    noncentral_chisq_sf,
    upper_gamma_regularized,
)

__version__ = "0.1.0"
