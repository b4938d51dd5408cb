"""Closed-form quantities of the sentiment-driven price model.

The sentiment factor ``P`` is a geometric Brownian motion started from a
constant history ``phi0`` on ``[-L, 0]``; the log-price accumulates the
delayed sentiment through the integrated information process

    X_t = int_0^t P_{u - tau} du = phi0 * tau + IP(t - tau),   t >= tau,

with ``IP(s) = int_0^s P_u du``.  Everything here is a pure function of its
arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateDenominatorError, DomainError, InvalidMomentsError, ValidationError

DENOMINATOR_TOL = 1e-10
# relative slack when checking m2 >= m1**2, absorbs rounding in the closed forms
MOMENT_RTOL = 1e-12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


@dataclass(frozen=True)
class ModelParams:
    """Model parameters, all in year units.

    ``mu_P``/``sigma_P`` drive the sentiment GBM; ``mu_S``/``sigma_S`` load the
    price drift and variance on the delayed sentiment; ``tau`` is the delay and
    ``phi0`` the constant sentiment level on the history window ``[-L, 0]``.
    ``L`` defaults to ``tau``.
    """

    mu_P: float
    sigma_P: float
    mu_S: float
    sigma_S: float
    tau: float = 0.0
    phi0: float = 1.0
    L: float | None = None

    def __post_init__(self):
        for name in ("mu_P", "sigma_P", "mu_S", "sigma_S", "tau", "phi0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
        if self.L is None:
            object.__setattr__(self, "L", float(self.tau))
        if self.sigma_P < 0 or self.sigma_S < 0:
            raise ValidationError("volatilities must be non-negative")
        if self.tau < 0:
            raise ValidationError(f"tau must be >= 0, got {self.tau}")
        if self.L < self.tau:
            raise ValidationError(f"lookback L={self.L} shorter than tau={self.tau}")
        if self.phi0 <= 0:
            raise ValidationError(f"phi0 must be > 0, got {self.phi0}")
        if self.mu_P == 0:
            raise ValidationError("mu_P must be non-zero")

    def replace(self, **changes) -> "ModelParams":
        if "tau" in changes and "L" not in changes and self.L < changes["tau"]:
            changes["L"] = changes["tau"]
        return replace(self, **changes)


@dataclass(frozen=True)
class MomentPair:
    mean: float
    variance: float


@dataclass(frozen=True)
class LevyLogNormal:
    """Lognormal law ``exp(N(alpha, nu2))`` fitted by matching two moments."""

    alpha: float
    nu2: float

    @property
    def nu(self) -> float:
        return math.sqrt(self.nu2)

    def moment(self, k: int = 1) -> float:
        return math.exp(k * self.alpha + 0.5 * k * k * self.nu2)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.nu2 == 0:
            raise DomainError("density of a point mass is undefined")
        lx = np.log(x)
        return -lx - 0.5 * np.log(2 * np.pi * self.nu2) - (lx - self.alpha) ** 2 / (2 * self.nu2)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def ppf(self, u):
        return np.exp(self.alpha + self.nu * ndtri(np.asarray(u, dtype=float)))


def _check_denominators(mu: float, sigma: float) -> None:
    s2 = sigma * sigma
    for label, value in (("mu_P", mu), ("mu_P + sigma_P^2", mu + s2), ("2 mu_P + sigma_P^2", 2 * mu + s2)):
        if abs(value) < DENOMINATOR_TOL:
            raise DegenerateDenominatorError(f"{label} = {value:.3g} is numerically zero")


def integrated_gbm_moments(p0: float, mu: float, sigma: float, s: float) -> tuple[float, float]:
    """First two raw moments of ``int_0^s P_u du`` for a GBM started at ``p0``.

    E[IP]   = p0 (e^{mu s} - 1) / mu
    E[IP^2] = 2 p0^2 / (mu + sigma^2) * [ (e^{(2 mu + sigma^2) s} - 1) / (2 mu + sigma^2)
                                          - (e^{mu s} - 1) / mu ]
    """
    if not s > 0:
        raise ValidationError(f"integration length must be > 0, got {s}")
    _check_denominators(mu, sigma)
    a = mu + sigma * sigma
    b = 2 * mu + sigma * sigma
    g_mu = math.expm1(mu * s) / mu
    m1 = p0 * g_mu
    if abs(a * s) < 1.0:
        # the bracket equals int_0^s e^{mu u} (e^{a u} - 1) du; the closed form
        # cancels badly when a*s is small, the integrand has one sign
        u = 0.5 * s * (_GL_NODES + 1.0)
        bracket = 0.5 * s * float(np.dot(_GL_WEIGHTS, np.exp(mu * u) * np.expm1(a * u)))
    else:
        bracket = math.expm1(b * s) / b - g_mu
    m2 = 2 * p0 * p0 / a * bracket
    return m1, m2


def ip_moments(params: ModelParams, s: float) -> tuple[float, float]:
    """``(E[IP(s)], E[IP(s)^2])`` with the sentiment started at ``phi0``."""
    return integrated_gbm_moments(params.phi0, params.mu_P, params.sigma_P, s)


def x_tau_deterministic(params: ModelParams) -> float:
    """Known part ``int_{-tau}^0 phi(u) du`` of the integrated information."""
    return params.phi0 * params.tau


def _pair(m1: float, m2: float, shift: float = 0.0) -> MomentPair:
    return MomentPair(mean=shift + m1, variance=max(m2 - m1 * m1, 0.0))


def integrated_info_moments(params: ModelParams, t: float, T: float | None = None) -> MomentPair:
    """Mean and variance of ``X_t`` (``T`` omitted) or of ``X_T - X_t``.

    Branches follow the ordering of ``t``, ``T`` and the delay; windows lying
    entirely in the known history return variance exactly 0.
    """
    tau, phi0 = params.tau, params.phi0
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if T is None:
        if t <= tau:
            return MomentPair(phi0 * t, 0.0)
        m1, m2 = ip_moments(params, t - tau)
        return _pair(m1, m2, shift=phi0 * tau)

    if not t < T:
        raise ValidationError(f"need t < T, got t={t}, T={T}")
    if T <= tau:
        return MomentPair(phi0 * (T - t), 0.0)
    if t <= tau:
        m1, m2 = ip_moments(params, T - tau)
        return _pair(m1, m2, shift=phi0 * (tau - t))
    # int_{t-tau}^{T-tau} P du has the law of P_{t-tau} * IP'(T - t), IP' independent
    mu, sig = params.mu_P, params.sigma_P
    lag = t - tau
    m1, m2 = ip_moments(params, T - t)
    m1 *= math.exp(mu * lag)
    m2 *= math.exp((2 * mu + sig * sig) * lag)
    return _pair(m1, m2)


def levy_params(m1: float, m2: float) -> LevyLogNormal:
    """Lognormal parameters whose first two moments equal ``m1`` and ``m2``."""
    if not (m1 > 0 and math.isfinite(m1) and math.isfinite(m2)):
        raise InvalidMomentsError(f"need finite m1 > 0, got m1={m1}, m2={m2}")
    ratio = m2 / (m1 * m1)
    if ratio < 1.0 - MOMENT_RTOL:
        raise InvalidMomentsError(f"m2={m2} < m1^2={m1 * m1}")
    if ratio - 1.0 <= MOMENT_RTOL:
        # variance at rounding level: treat as a point mass
        return LevyLogNormal(alpha=math.log(m1), nu2=0.0)
    nu2 = math.log(ratio)
    alpha = 2 * math.log(m1) - 0.5 * math.log(m2)
    return LevyLogNormal(alpha=alpha, nu2=nu2)


def log_price_moments(params: ModelParams, s0: float, t: float) -> MomentPair:
    """Unconditional mean and variance of ``log S_t`` under the physical measure."""
    if not s0 > 0:
        raise ValidationError(f"s0 must be > 0, got {s0}")
    if not t > 0:
        raise ValidationError(f"t must be > 0, got {t}")
    x = integrated_info_moments(params, t)
    c = params.mu_S - 0.5 * params.sigma_S ** 2
    return MomentPair(
        mean=math.log(s0) + c * x.mean,
        variance=c * c * x.variance + params.sigma_S ** 2 * x.mean,
    )
