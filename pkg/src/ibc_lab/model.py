"""Closed-form model constants.

Conventions are fixed once and for all: the heavy particles carry a
dimensionless mass m, the created bosons have mass 1/2 and rest energy 1, and
Fourier transforms are unitary with a (2*pi)^(-3/2) prefactor per 3-vector.
Every explicit number of the underlying model lives here: the free-energy
symbol, the 1/r divergence coefficient, the logarithmic divergence constant
gamma_m, the linear cutoff counterterm, and the closed form of the arctangent
convolution integral used by the off-diagonal kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class ModelParams:
    """Masses, particle counts, sector index, cutoff and resolvent shift.

    m          mass of the heavy particles (> 0)
    M          number of heavy particles   (>= 1)
    n          boson sector index          (>= 0)
    lambda_cut ultraviolet cutoff in momentum units (>= 0)
    c0         resolvent shift in energy units (> 0)
    """

    m: float
    M: int = 1
    n: int = 0
    lambda_cut: float = 0.0
    c0: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ConfigurationError("mass m must be positive")
        if self.M < 1:
            raise ConfigurationError("particle count M must be >= 1")
        if self.n < 0:
            raise ConfigurationError("sector index n must be >= 0")
        if self.lambda_cut < 0:
            raise ConfigurationError("cutoff must be >= 0")
        if not self.c0 > 0:
            raise ConfigurationError("resolvent shift c0 must be positive")

    @property
    def reduced_mass_factor(self) -> float:
        """2m/(2m+1), twice the reduced mass of a heavy-boson pair."""
        return 2.0 * self.m / (2.0 * self.m + 1.0)

    @property
    def c2(self) -> float:
        """(2m+1)/(2m), the relative-momentum kinetic coefficient."""
        return (2.0 * self.m + 1.0) / (2.0 * self.m)

    def mass_ratio_identity_exact(self) -> bool:
        """reduced_mass_factor * c2 == 1, checked in exact rational arithmetic."""
        fm = Fraction(self.m)
        return (2 * fm / (2 * fm + 1)) * ((2 * fm + 1) / (2 * fm)) == 1


def _as_vectors(x, count: int, what: str) -> np.ndarray:
    """Coerce x to shape (count, 3); scalar 0 stands for all-zero momenta."""
    if x is None or (np.isscalar(x) and x == 0):
        return np.zeros((count, 3))
    arr = np.asarray(x, dtype=float)
    if arr.size != 3 * count:
        raise ConfigurationError(
            f"{what} must hold {count} 3-vectors, got size {arr.size}")
    return arr.reshape(count, 3)


def free_symbol(params: ModelParams, P, K) -> float:
    """Fourier symbol of the free energy: |P|^2/(2m) + |K|^2 + n.

    P are the heavy-particle momenta (M 3-vectors), K the boson momenta
    (n 3-vectors); each boson contributes its kinetic energy |k|^2 plus one
    unit of rest energy.
    """
    Pv = _as_vectors(P, params.M, "P")
    Kv = _as_vectors(K, params.n, "K")
    return float(np.sum(Pv * Pv) / (2.0 * params.m) + np.sum(Kv * Kv) + params.n)


@lru_cache(maxsize=512)
def gamma_m(m: float) -> float:
    """Coefficient of the log(r) divergence produced by the dressed kernel.

    gamma_m = (2pi)^-3 (2m/(2m+1))^3
              [ 2 sqrt(m(m+1))/(2m+1) - (2m+1) atan(1/(2 sqrt(m(m+1)))) ].

    The bracket is a difference of two terms that agree to O(1/m^2) for large
    m, so the evaluation is done in 50-digit arithmetic and rounded to double
    on return; this keeps ~12 significant digits up to m = 1e6, where the
    value itself has shrunk below 1e-15.

    The sign is a numerical finding of this package: the constant comes out
    negative for every finite m (and -> 0 as m -> infinity); the source theory
    fixes only the formula, not the sign.
    """
    if not m > 0:
        raise DomainError("gamma_m needs m > 0")
    with mpmath.workdps(50):
        mm = mpmath.mpf(m)
        two_m1 = 2 * mm + 1
        rmf = 2 * mm / two_m1
        root = 2 * mpmath.sqrt(mm * (mm + 1))
        bracket = root / two_m1 - two_m1 * mpmath.atan(1 / root)
        return float(rmf ** 3 * bracket / (2 * mpmath.pi) ** 3)


def b_coefficient(m: float) -> float:
    """Coefficient of the 1/|x-y| divergence of the singular kernel: m/(2pi(2m+1)).

    Reciprocal to the boundary-value normalisation: b * (2pi(2m+1)/m) = 1.
    """
    if not m > 0:
        raise DomainError("b_coefficient needs m > 0")
    return m / (2.0 * math.pi * (2.0 * m + 1.0))


def linear_counterterm(m: float, lambda_cut: float) -> float:
    """Linearly divergent energy counterterm m*Lambda/(pi^2 (2m+1))."""
    if not m > 0:
        raise DomainError("linear_counterterm needs m > 0")
    if lambda_cut < 0:
        raise DomainError("cutoff must be >= 0")
    return m * lambda_cut / (math.pi ** 2 * (2.0 * m + 1.0))


def singular_profile(m: float, M: int, r: float) -> float:
    """Divergent radial profile f_m(r) = (1/M)(b(m)/r + gamma_m log r)."""
    if not r > 0:
        raise DomainError("singular_profile needs r > 0")
    if M < 1:
        raise DomainError("singular_profile needs M >= 1")
    return (b_coefficient(m) / r + gamma_m(m) * math.log(r)) / M


def arctan_convolution(m: float, beta: float, gamma: float, rho: float) -> float:
    """Closed form of the 3-d convolution of two shifted resolvent kernels.

    Evaluates
        int d^3 xi [ (beta + c2 xi^2) (gamma + c2 (xi + rho/(2m+1))^2) ]^-1
      = 2 pi^2 (2m/(2m+1))^2 (2m+1)/rho
        * atan( rho / ( sqrt(2m(2m+1)) (sqrt(beta) + sqrt(gamma)) ) )
    with c2 = (2m+1)/(2m).  At rho = 0 the removable singularity is filled by
    the atan(x)/x series, entered below x = 1e-4 to avoid cancellation.
    """
    if not m > 0:
        raise DomainError("arctan_convolution needs m > 0")
    if not (beta > 0 and gamma > 0):
        raise DomainError("arctan_convolution needs beta, gamma > 0")
    if rho < 0:
        raise DomainError("arctan_convolution needs rho >= 0")
    rmf = 2.0 * m / (2.0 * m + 1.0)
    pref = 2.0 * math.pi ** 2 * rmf ** 2 * (2.0 * m + 1.0)
    denom = math.sqrt(2.0 * m * (2.0 * m + 1.0)) * (math.sqrt(beta) + math.sqrt(gamma))
    x = rho / denom
    if x < 1e-4:
        x2 = x * x
        atan_over_x = 1.0 - x2 / 3.0 + x2 * x2 / 5.0 - x2 * x2 * x2 / 7.0
        return pref * atan_over_x / denom
    return pref * math.atan(x) / rho


def arctan_convolution_vec(m: float, beta, gamma, rho) -> np.ndarray:
    """Vectorized arctan_convolution over numpy arrays (same branch logic)."""
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    rho = np.asarray(rho, dtype=float)
    rmf = 2.0 * m / (2.0 * m + 1.0)
    pref = 2.0 * math.pi ** 2 * rmf ** 2 * (2.0 * m + 1.0)
    denom = math.sqrt(2.0 * m * (2.0 * m + 1.0)) * (np.sqrt(beta) + np.sqrt(gamma))
    x = rho / denom
    x2 = x * x
    series = (1.0 - x2 / 3.0 + x2 * x2 / 5.0 - x2 * x2 * x2 / 7.0) / denom
    safe_rho = np.where(rho == 0.0, 1.0, rho)
    return pref * np.where(x < 1e-4, series, np.arctan(x) / safe_rho)
