"""Deterministic adaptive quadrature and seeded Monte Carlo integration.

All deterministic rules are built on an embedded Gauss pair (7 and 15 nodes)
per panel; the panel error is the difference of the two rules.  Semi-infinite
domains are compactified by the rational map t = x/(1-x) or the exponential
map t = -log(1-x) before panels are laid down.  The error model is heuristic
(embedded difference), not a validated enclosure; callers are expected to set
acceptance tolerances well above the requested quadrature tolerance.

Integrand functions must accept a 1-d numpy array of abscissae and return an
array of the same shape (scalar returns are broadcast).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, NonConvergenceError, SamplingError

_NODES7, _WEIGHTS7 = np.polynomial.legendre.leggauss(7)
_NODES15, _WEIGHTS15 = np.polynomial.legendre.leggauss(15)

_METHODS = ("adaptive", "monte_carlo", "closed_form")


@dataclass(frozen=True)
class Estimate:
    """A numeric value with an estimated absolute error and provenance tag.

    ``error`` is k*stderr for Monte Carlo results (k recorded in ``k_sigma``,
    default 3) and the accumulated embedded-rule difference for adaptive ones.
    """

    value: float
    error: float
    evaluations: int
    method: str
    k_sigma: int | None = None

    def __post_init__(self):
        if self.error < 0:
            raise ConfigurationError("Estimate.error must be non-negative")
        if self.method not in _METHODS:
            raise ConfigurationError(f"unknown method tag {self.method!r}")

    def agrees_with(self, other: "Estimate", slack: float = 1.0) -> bool:
        """Whether the two values coincide within their combined error bars."""
        tol = slack * math.hypot(self.error, other.error)
        return abs(self.value - other.value) <= tol


@dataclass(frozen=True)
class QuadSpec:
    """Tolerance and mapping settings shared by the integrators."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_depth: int = 48
    mapping: str = "rational"
    seed: int = 0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ConfigurationError("rel_tol and abs_tol must be positive")
        if self.mapping not in ("rational", "exponential", "none"):
            raise ConfigurationError(f"unknown mapping tag {self.mapping!r}")


DEFAULT_SPEC = QuadSpec()


def _eval_panel(f, a: float, b: float):
    """Embedded (7,15) Gauss pair on [a, b]; returns (value15, |value15-value7|)."""
    h = 0.5 * (b - a)
    c = 0.5 * (a + b)
    x = np.concatenate([c + h * _NODES15, c + h * _NODES7])
    y = np.asarray(f(x), dtype=float)
    if y.ndim == 0:
        y = np.full(x.shape, float(y))
    v15 = h * float(_WEIGHTS15 @ y[:15])
    v7 = h * float(_WEIGHTS7 @ y[15:])
    return v15, abs(v15 - v7)


def _adaptive(f, a: float, b: float, *, rel_tol: float, abs_tol: float,
              max_depth: int, breakpoints=None, max_panels: int = 60000) -> Estimate:
    """Globally adaptive bisection driven by the per-panel embedded error."""
    pts = [a, b] if not breakpoints else sorted({a, b, *breakpoints})
    heap = []
    counter = 0
    total = 0.0
    toterr = 0.0
    evals = 0
    for lo, hi in zip(pts[:-1], pts[1:]):
        v, e = _eval_panel(f, lo, hi)
        evals += 22
        total += v
        toterr += e
        heapq.heappush(heap, (-e, counter, lo, hi, 0, v))
        counter += 1
    panels = len(heap)
    while toterr > max(abs_tol, rel_tol * abs(total)):
        nege, _, lo, hi, depth, v = heapq.heappop(heap)
        err = -nege
        if err <= 0.0:
            break  # every panel converged to rounding, tolerance unreachable
        if depth >= max_depth or panels >= max_panels:
            best = Estimate(total, toterr, evals, "adaptive")
            raise NonConvergenceError(
                f"adaptive quadrature stalled at depth {depth} with error {toterr:.3e}",
                best=best)
        mid = 0.5 * (lo + hi)
        total -= v
        toterr -= err
        for lo2, hi2 in ((lo, mid), (mid, hi)):
            v2, e2 = _eval_panel(f, lo2, hi2)
            evals += 22
            total += v2
            toterr += e2
            heapq.heappush(heap, (-e2, counter, lo2, hi2, depth + 1, v2))
            counter += 1
        panels += 1
    return Estimate(total, toterr, evals, "adaptive")


def integrate_interval(f, a: float, b: float, spec: QuadSpec = DEFAULT_SPEC,
                       breakpoints=None) -> Estimate:
    """Integrate f on the finite interval [a, b]."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ConfigurationError("integrate_interval requires finite endpoints")
    return _adaptive(f, a, b, rel_tol=spec.rel_tol, abs_tol=spec.abs_tol,
                     max_depth=spec.max_depth, breakpoints=breakpoints)


def integrate_semi_infinite(f, spec: QuadSpec = DEFAULT_SPEC) -> Estimate:
    """Integrate f over [0, inf) using the mapping selected in ``spec``.

    The rational map suits integrands with power-law decay, the exponential
    map those with exponential damping.  Panels never touch the mapped
    endpoint, so endpoint singularities of the transformed integrand are
    handled by refinement rather than evaluation.
    """
    if spec.mapping == "rational":
        def g(x):
            u = 1.0 - x
            return np.asarray(f(x / u)) / (u * u)
    elif spec.mapping == "exponential":
        def g(x):
            u = 1.0 - x
            return np.asarray(f(-np.log(u))) / u
    else:
        raise ConfigurationError(
            "semi-infinite integration needs a compactifying map; "
            "mapping 'none' is only valid for finite intervals")
    # fixed interior breakpoints resolve the decades 0..inf deterministically
    return _adaptive(g, 0.0, 1.0, rel_tol=spec.rel_tol, abs_tol=spec.abs_tol,
                     max_depth=spec.max_depth,
                     breakpoints=[0.25, 0.5, 0.75, 0.9, 0.99])


def _accelerate_alternating(terms):
    """Iterated averaging of partial sums; returns (limit, error_estimate)."""
    s = np.cumsum(np.asarray(terms, dtype=float))
    if s.size == 1:
        return float(s[-1]), abs(float(s[-1]))
    prev = s[-1]
    err = math.inf
    while s.size > 1:
        s = 0.5 * (s[1:] + s[:-1])
        err = abs(float(s[-1]) - prev)
        prev = float(s[-1])
    return prev, err


def integrate_oscillatory(f, omega: float, spec: QuadSpec = DEFAULT_SPEC,
                          max_half_periods: int = 160) -> Estimate:
    """Integrate f(t)*sin(omega*t) over [0, inf).

    For omega != 0 the axis is cut at the zeros k*pi/omega of the oscillator;
    the head panel is refined adaptively (with geometric breakpoints so that
    structure far below the first zero is found) and the alternating tail is
    summed with iterated averaging of its partial sums.
    """
    if omega == 0.0:
        return Estimate(0.0, 0.0, 0, "closed_form")
    sign = 1.0
    if omega < 0:
        sign, omega = -1.0, -omega

    def g(t):
        return np.asarray(f(t)) * np.sin(omega * t)

    period = math.pi / omega
    breaks = []
    scale = 1.0
    while scale < 0.5 * period:
        breaks.append(scale)
        scale *= 2.0
    head = _adaptive(g, 0.0, period, rel_tol=spec.rel_tol, abs_tol=spec.abs_tol,
                     max_depth=spec.max_depth, breakpoints=breaks)
    running = abs(head.value)
    target = max(spec.abs_tol, spec.rel_tol * max(running, spec.abs_tol))
    panel_abs = max(target / 100.0, 1e-300)

    terms = []
    errsum = head.error
    evals = head.evaluations
    tail_val, acc_err = 0.0, 0.0
    prev_tail = None
    k = 1
    while True:
        seg = _adaptive(g, k * period, (k + 1) * period, rel_tol=spec.rel_tol,
                        abs_tol=panel_abs, max_depth=spec.max_depth)
        terms.append(seg.value)
        errsum += seg.error
        evals += seg.evaluations
        if len(terms) >= 6:
            tail_val, acc_err = _accelerate_alternating(terms)
            stable = prev_tail is not None and abs(tail_val - prev_tail) <= target
            prev_tail = tail_val
            if acc_err <= target and stable:
                acc_err += abs(tail_val - prev_tail)
                break
        if k >= max_half_periods:
            tail_val, acc_err = _accelerate_alternating(terms)
            best = Estimate(sign * (head.value + tail_val),
                            errsum + acc_err, evals, "adaptive")
            raise NonConvergenceError(
                f"oscillatory tail not converged after {k} half-periods", best=best)
        k += 1
    return Estimate(sign * (head.value + tail_val), errsum + acc_err, evals, "adaptive")


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def sampler_density(sampler: str, x: np.ndarray) -> np.ndarray:
    """Probability density of the named importance sampler at points x (n, d)."""
    x = np.atleast_2d(x)
    if sampler == "cauchy":
        return np.exp(np.sum(-np.log(np.pi * (1.0 + x * x)), axis=1))
    if sampler == "gauss":
        d = x.shape[1]
        return (2.0 * np.pi) ** (-0.5 * d) * np.exp(-0.5 * np.sum(x * x, axis=1))
    raise ConfigurationError(f"unknown sampler tag {sampler!r}")


def _draw(sampler: str, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    if sampler == "cauchy":
        return rng.standard_cauchy(size=(n, d))
    if sampler == "gauss":
        return rng.standard_normal(size=(n, d))
    raise ConfigurationError(f"unknown sampler tag {sampler!r}")


def integrate_mc(f, d: int, sampler: str = "cauchy", n_samples: int = 1_000_000,
                 seed: int = 0, k_sigma: int = 3) -> Estimate:
    """Importance-sampled Monte Carlo estimate of the integral of f over R^d.

    The default sampler is a product of standard Cauchy densities, one per
    coordinate; its heavy tails match the inverse-quadratic kernels this
    package integrates.  Randomness comes from a counter-based Philox stream
    keyed by ``seed``, so results are reproducible and independent of how the
    samples would be chunked across workers.
    """
    if d < 1 or n_samples < 2:
        raise ConfigurationError("need d >= 1 and n_samples >= 2")
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = _draw(sampler, rng, n_samples, d)
    w = np.asarray(f(x), dtype=float) / sampler_density(sampler, x)
    bad = ~np.isfinite(w)
    if bad.any():
        idx = int(np.argmax(bad))
        raise SamplingError(
            f"non-finite integrand value at sample {idx}", point=x[idx].copy())
    value = float(np.mean(w))
    stderr = float(np.std(w, ddof=1) / math.sqrt(n_samples))
    return Estimate(value, k_sigma * stderr, n_samples, "monte_carlo", k_sigma=k_sigma)


def gauss_legendre(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise DomainError("need n >= 1")
    return np.polynomial.legendre.leggauss(n)


def sinc(x):
    """sin(x)/x with the removable singularity filled in."""
    return np.sinc(np.asarray(x) / np.pi)
