"""Numerical laboratory for singular pair-creation operators.

Submodules
----------
model     closed-form constants (divergence coefficients, counterterm, ...)
quad      adaptive and Monte Carlo integration with error estimates
testfn    Gaussian test functions with exact transforms
ops       operator probes: singular kernel, multiplier, off-diagonal parts
asym      radial probe series and singular-coefficient fits
sector1   the one-boson fixed-momentum model and its cutoff flows
boundslab bound-constant integrals and their sector scalings
cli       batch front-end (config -> report.json + CSV sweeps)
"""

from .errors import (CancellationTrendError, ConfigurationError, ConsistencyError,
                     DomainError, FitError, IbcLabError, NonConvergenceError,
                     SamplingError)
from .model import (ModelParams, arctan_convolution, b_coefficient, free_symbol,
                    gamma_m, linear_counterterm, singular_profile)
from .quad import Estimate, QuadSpec

__all__ = [
    "CancellationTrendError", "ConfigurationError", "ConsistencyError",
    "DomainError", "Estimate", "FitError", "IbcLabError", "ModelParams",
    "NonConvergenceError", "QuadSpec", "SamplingError", "arctan_convolution",
    "b_coefficient", "free_symbol", "gamma_m", "linear_counterterm",
    "singular_profile",
]

__version__ = "0.1.0"
