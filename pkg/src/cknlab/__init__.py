"""Radial Green functions, masses and Sobolev quotients for weighted
Caffarelli-Kohn-Nirenberg operators on the hyperbolic ball."""
from .errors import (
    BvpFailure,
    CknError,
    DegeneratePair,
    DivergentMass,
    DomainError,
    EigenFailure,
    NormalizationError,
    ResonanceError,
    StepFailure,
    TruncationWarning,
)
from .green_radial import chi, green_hl, mode_green, two_point_green, verify_estimates
from .mass import lambda_star_rad, mass, mass_sweep
from .params import (
    ab_coordinates,
    beta_lambda,
    derived_constants,
    make_params,
    params_from_ab,
)
from .radial_ode import frobenius_seed, indicial_exponents, integrate_mode, mode_equation, solution_pair
from .variational import (
    bubble_cutoff,
    corrected_test_function,
    deficit_scaling,
    mass_sign_experiment,
    rayleigh_quotient,
    spectral_gap,
)

__version__ = "0.1.0"
