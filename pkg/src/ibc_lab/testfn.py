"""Analytic Gaussian test functions with exact transforms and norms.

Only isotropic Gaussians and finite real linear combinations of them are
supported: every kernel integral in this package then reduces to at most a
few effective quadrature dimensions after angular reduction.  The Fourier
convention is the unitary one with a (2*pi)^(-3/2) prefactor per 3-vector,
matching the rest of the package bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quad
from .errors import ConfigurationError, DomainError
from .model import ModelParams
from .quad import Estimate, QuadSpec, DEFAULT_SPEC


@dataclass(frozen=True)
class RadialTestFunction:
    """Isotropic Gaussian wave packet.

    Position form   g(x) = amplitude (pi a)^(-3/4) exp(-|x-center|^2 / (2a))
    Momentum form   g^(s) = amplitude (a/pi)^(3/4) exp(-a|s|^2/2) e^{-i s.center}

    With amplitude 1 both forms have unit L2 norm.
    """

    width: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError("Gaussian width must be positive")

    @property
    def is_centered(self) -> bool:
        return all(c == 0.0 for c in self.center)

    def eval(self, x) -> np.ndarray:
        """Position-space values; x has shape (..., 3)."""
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        r2 = np.sum(d * d, axis=-1)
        return self.amplitude * (math.pi * self.width) ** (-0.75) * np.exp(-r2 / (2 * self.width))

    def eval_radial(self, r) -> np.ndarray:
        """Position values at radius r from the center (isotropic profile)."""
        r = np.asarray(r, dtype=float)
        return self.amplitude * (math.pi * self.width) ** (-0.75) * np.exp(-r * r / (2 * self.width))

    def fourier_eval(self, sigma) -> np.ndarray:
        """Momentum-space values; complex when the packet is off-center."""
        sigma = np.asarray(sigma, dtype=float)
        s2 = np.sum(sigma * sigma, axis=-1)
        base = self.amplitude * (self.width / math.pi) ** 0.75 * np.exp(-0.5 * self.width * s2)
        if self.is_centered:
            return base
        phase = np.exp(-1j * np.sum(sigma * np.asarray(self.center), axis=-1))
        return base * phase

    def fourier_radial(self, s) -> np.ndarray:
        """Momentum profile at |sigma| = s; requires a centered packet."""
        if not self.is_centered:
            raise DomainError("radial momentum profile needs center = 0")
        s = np.asarray(s, dtype=float)
        return self.amplitude * (self.width / math.pi) ** 0.75 * np.exp(-0.5 * self.width * s * s)

    def l2_norm(self) -> float:
        return abs(self.amplitude)

    def scaled(self, factor: float) -> "RadialTestFunction":
        return RadialTestFunction(self.width, self.center, self.amplitude * factor)


@dataclass(frozen=True)
class GaussianSum:
    """Finite real linear combination of centered isotropic Gaussians."""

    terms: tuple[RadialTestFunction, ...]

    def __post_init__(self):
        if not self.terms:
            raise ConfigurationError("GaussianSum needs at least one term")
        if not all(t.is_centered for t in self.terms):
            raise ConfigurationError("GaussianSum terms must be centered")

    def eval_radial(self, r) -> np.ndarray:
        return sum(t.eval_radial(r) for t in self.terms)

    def fourier_radial(self, s) -> np.ndarray:
        return sum(t.fourier_radial(s) for t in self.terms)

    def value_at_origin(self) -> float:
        return float(sum(t.eval_radial(0.0) for t in self.terms))


RadialProfile = RadialTestFunction | GaussianSum


def profile_value_at_origin(psi: RadialProfile) -> float:
    if isinstance(psi, GaussianSum):
        return psi.value_at_origin()
    return float(psi.eval_radial(0.0))


@dataclass(frozen=True)
class ProductState:
    """Tensor product of one Gaussian per particle coordinate.

    The first ``len(factors) - n`` factors belong to the heavy particles, the
    last ``n`` to the bosons.  Exchange symmetry of the boson part is enforced
    by construction: all boson factors must be identical.
    """

    factors: tuple[RadialTestFunction, ...]
    n: int = 0

    def __post_init__(self):
        if self.n < 0 or self.n > len(self.factors):
            raise ConfigurationError("sector index n out of range")
        bosons = self.factors[len(self.factors) - self.n:]
        if any(b != bosons[0] for b in bosons[1:]):
            raise ConfigurationError("boson factors must be identical")

    @property
    def num_heavy(self) -> int:
        return len(self.factors) - self.n

    def fourier_eval(self, P, K) -> np.ndarray:
        """Momentum-space value at heavy momenta P (M,3) and boson momenta K (n,3)."""
        P = np.asarray(P, dtype=float).reshape(self.num_heavy, 3)
        K = np.asarray(K, dtype=float).reshape(self.n, 3) if self.n else np.zeros((0, 3))
        out = 1.0
        for f, p in zip(self.factors[:self.num_heavy], P):
            out = out * f.fourier_eval(p)
        for f, k in zip(self.factors[self.num_heavy:], K):
            out = out * f.fourier_eval(k)
        return out

    def l2_norm(self) -> float:
        return float(np.prod([abs(f.amplitude) for f in self.factors]))


def _symbol_from_moduli(params: ModelParams, mods: np.ndarray, M: int, n: int):
    """Free symbol from coordinate moduli stacked as (..., M+n)."""
    p2 = np.sum(mods[..., :M] ** 2, axis=-1)
    k2 = np.sum(mods[..., M:] ** 2, axis=-1)
    return p2 / (2.0 * params.m) + k2 + n


def sobolev_norm(state: ProductState, s: float, params: ModelParams,
                 method: str = "auto", spec: QuadSpec = DEFAULT_SPEC,
                 n_samples: int = 200_000, seed: int = 0) -> Estimate:
    """Weighted momentum norm ||(1+L)^s psi||, L the free-energy symbol.

    Computed as the square root of int (1+L)^(2s) |psi^|^2.  A single
    3-vector coordinate reduces to a radial quadrature; for more coordinates
    the integral is an expectation against |psi^|^2 itself (an exact product
    Gaussian), evaluated by seeded Monte Carlo.
    """
    if not -1.0 <= s <= 2.0:
        raise DomainError("sobolev exponent restricted to [-1, 2]")
    M, n = state.num_heavy, state.n
    if M != params.M or n != params.n:
        raise ConfigurationError("state shape does not match params (M, n)")
    if not all(f.is_centered for f in state.factors):
        raise ConfigurationError("sobolev_norm expects centered factors")
    amp2 = state.l2_norm() ** 2
    ncoord = M + n
    if method == "auto":
        method = "quadrature" if ncoord == 1 else "monte_carlo"
    if method == "quadrature":
        if ncoord != 1:
            raise ConfigurationError("quadrature route only for a single coordinate")
        f0 = state.factors[0]
        a = f0.width

        def integrand(k):
            # single coordinate forces (M, n) = (1, 0): the symbol is k^2/(2m)
            sym = k * k / (2.0 * params.m)
            w = (1.0 + sym) ** (2.0 * s)
            prof = (a / math.pi) ** 1.5 * np.exp(-a * k * k)
            return 4.0 * math.pi * k * k * w * prof

        est = quad.integrate_semi_infinite(integrand, spec)
        val = math.sqrt(max(amp2 * est.value, 0.0))
        err = 0.5 * amp2 * est.error / max(val, 1e-300)
        return Estimate(val, err, est.evaluations, "adaptive")
    if method == "monte_carlo":
        rng = np.random.Generator(np.random.Philox(key=seed))
        widths = np.array([f.width for f in state.factors])
        # |psi^|^2 is the product Gaussian with per-component variance 1/(2a)
        x = rng.standard_normal(size=(n_samples, ncoord, 3)) / np.sqrt(2.0 * widths)[None, :, None]
        mods = np.linalg.norm(x, axis=2)
        sym = _symbol_from_moduli(params, mods, M, n)
        w = amp2 * (1.0 + sym) ** (2.0 * s)
        mean = float(np.mean(w))
        stderr = float(np.std(w, ddof=1) / math.sqrt(n_samples))
        val = math.sqrt(max(mean, 0.0))
        err = 3.0 * 0.5 * stderr / max(val, 1e-300)
        return Estimate(val, err, n_samples, "monte_carlo", k_sigma=3)
    raise ConfigurationError(f"unknown sobolev method {method!r}")


def state_to_config(f: RadialTestFunction) -> dict:
    """Serialize a test function for the CLI config echo."""
    return {"a": f.width, "center": list(f.center), "amplitude": f.amplitude}


def state_from_config(d: dict) -> RadialTestFunction:
    try:
        return RadialTestFunction(float(d["a"]),
                                  tuple(float(c) for c in d.get("center", (0, 0, 0))),
                                  float(d.get("amplitude", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad test-function config: {d!r}") from exc
