"""Poisson request arrivals carrying i.i.d. transformed characteristics.

A request's raw characteristic is ``x = xhat ** eta`` where ``xhat`` follows
one of the built-in laws (exponential, uniform) or a user-supplied law.  All
distribution-level quantities (pdf, cdf, hazard ratios, reserve) live on the
transformed scale; only sampling and survival-of-raw helpers touch raw units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize


class SupportError(ValueError):
    """Argument lies outside the distribution support."""


class NoRootError(ValueError):
    """Virtual valuation has no sign change on the search bracket."""


@dataclass(frozen=True)
class _ExponentialPdf:
    alpha: float

    def __call__(self, x):
        return self.alpha * np.exp(-self.alpha * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class _ExponentialCdf:
    alpha: float

    def __call__(self, x):
        return -np.expm1(-self.alpha * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class _ExponentialInverseCdf:
    alpha: float

    def __call__(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.alpha


@dataclass(frozen=True)
class _UniformPdf:
    beta: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), 1.0 / self.beta)


@dataclass(frozen=True)
class _UniformCdf:
    beta: float

    def __call__(self, x):
        return np.asarray(x, dtype=float) / self.beta


@dataclass(frozen=True)
class _UniformInverseCdf:
    beta: float

    def __call__(self, p):
        return self.beta * np.asarray(p, dtype=float)


@dataclass(frozen=True)
class Law:
    """Distribution of the transformed characteristic.

    ``pdf``, ``cdf`` and ``inverse_cdf`` must accept scalars or numpy arrays.
    ``support`` is the closed interval on which the pdf is defined; the upper
    end may be ``inf``.  The callables are plain math on that interval; domain
    clamping and checking happen in :class:`ArrivalModel`.
    """

    name: str
    pdf: Callable
    cdf: Callable
    inverse_cdf: Callable
    support: tuple[float, float]


def exponential_law(alpha: float) -> Law:
    """Exponential law with rate ``alpha`` on [0, inf)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return Law(
        name="exponential",
        pdf=_ExponentialPdf(alpha),
        cdf=_ExponentialCdf(alpha),
        inverse_cdf=_ExponentialInverseCdf(alpha),
        support=(0.0, math.inf),
    )


def uniform_law(beta: float) -> Law:
    """Uniform law on [0, beta]."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return Law(
        name="uniform",
        pdf=_UniformPdf(beta),
        cdf=_UniformCdf(beta),
        inverse_cdf=_UniformInverseCdf(beta),
        support=(0.0, beta),
    )


@dataclass(frozen=True)
class ArrivalModel:
    """Homogeneous Poisson arrivals with i.i.d. transformed characteristics.

    ``lam`` is the arrival rate per hour, ``law`` the distribution of the
    transformed characteristic, and ``eta >= 1`` the concavity exponent that
    maps transformed to raw units via ``x = xhat ** eta``.
    """

    lam: float
    law: Law
    eta: float = 1.0

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError(f"arrival rate must be positive, got {self.lam}")
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta}")

    # -- distribution of the transformed characteristic ---------------------

    def pdf(self, x):
        """Density of the transformed characteristic; x must lie in support."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.law.support
        if np.any((x < lo) | (x > hi)):
            raise SupportError(f"argument outside support [{lo}, {hi}]")
        return self.law.pdf(x)

    def cdf(self, x):
        """Distribution function, extended to all reals by clamping."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.law.support
        return self.law.cdf(np.clip(x, lo, hi))

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < 0.0) | (p > 1.0)):
            raise ValueError("probability outside [0, 1]")
        return self.law.inverse_cdf(p)

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def raw_survival(self, y):
        """P(raw characteristic > y) for y >= 0."""
        y = np.asarray(y, dtype=float)
        if np.any(y < 0.0):
            raise ValueError("raw characteristic bound must be nonnegative")
        return self.survival(y ** (1.0 / self.eta))

    # -- hazard-type functionals --------------------------------------------
    # Kept as literal compositions of cdf and pdf so that custom laws get the
    # same derivation as the built-ins.

    def hazard_inverse(self, x):
        """(1 - F(x)) / f(x)."""
        f = self.pdf(x)
        if np.any(f == 0.0):
            raise ZeroDivisionError("pdf vanishes; hazard inverse undefined")
        return (1.0 - self.cdf(x)) / f

    def squared_survival_over_pdf(self, x):
        """(1 - F(x))^2 / f(x)."""
        f = self.pdf(x)
        if np.any(f == 0.0):
            raise ZeroDivisionError("pdf vanishes; ratio undefined")
        return (1.0 - self.cdf(x)) ** 2 / f

    def virtual_valuation(self, x):
        """x - (1 - F(x)) / f(x)."""
        return np.asarray(x, dtype=float) - self.hazard_inverse(x)

    def reserve(self) -> float:
        """Root of the virtual valuation, found by bisection.

        Bracket is [support minimum, quantile 1 - 1e-9]; tolerance 1e-10.
        """
        lo, hi = self.law.support
        b = min(hi, float(self.inverse_cdf(1.0 - 1e-9)))
        a = lo
        try:
            psi_a = float(self.virtual_valuation(a))
        except ZeroDivisionError:
            a = float(self.inverse_cdf(1e-9))
            psi_a = float(self.virtual_valuation(a))
        psi_b = float(self.virtual_valuation(b))
        if psi_a == 0.0:
            return a
        if psi_b == 0.0:
            return b
        if psi_a * psi_b > 0.0:
            raise NoRootError(
                f"virtual valuation has no sign change on [{a}, {b}]"
            )
        root = optimize.bisect(
            lambda v: float(self.virtual_valuation(v)), a, b, xtol=1e-10
        )
        return float(root)

    # -- sampling -----------------------------------------------------------

    def sample_arrivals(
        self, horizon: float, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Draw one arrival stream over [0, horizon).

        Returns (times, raw characteristics); times are strictly increasing.
        Characteristics use inverse-transform sampling so streams driven by
        the same generator state pair exactly across laws and sweep values.
        """
        if horizon < 0:
            raise ValueError("horizon must be nonnegative")
        times = _poisson_times(self.lam, horizon, rng)
        u = rng.random(times.size)
        xhat = np.asarray(self.law.inverse_cdf(u), dtype=float)
        return times, xhat ** self.eta

    def first_qualifying_density(
        self, threshold: Callable[[float], float], t: float, s: float
    ) -> float:
        """Density at s of the first post-t arrival clearing a moving cutoff.

        ``threshold`` maps time to a raw-unit cutoff; an arrival qualifies
        when its raw characteristic is at least the cutoff.
        """
        if s < t:
            raise ValueError("s must not precede t")

        def rate(u: float) -> float:
            return self.lam * float(self.raw_survival(threshold(u)))

        total, _ = integrate.quad(rate, t, s, limit=200)
        return rate(s) * math.exp(-total)


def _poisson_times(lam: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Cumulative exponential gaps, drawn in chunks, truncated at horizon."""
    mean_n = lam * horizon
    chunk = max(16, int(mean_n + 6.0 * math.sqrt(mean_n + 1.0)))
    pieces = []
    t = 0.0
    while True:
        cum = t + np.cumsum(rng.exponential(1.0 / lam, size=chunk))
        pieces.append(cum)
        t = float(cum[-1])
        if t >= horizon:
            break
    times = np.concatenate(pieces)
    return times[times < horizon]
