"""Approximate likelihood of returns and cumulative sentiment, and estimators.

Given the cumulative sentiment ``a_i`` the log-return ``r_i`` is Gaussian with
mean ``(mu_S - sigma_S^2/2) a_i`` and variance ``sigma_S^2 a_i``.  The
cumulative sentiment itself is approximated by a lognormal chain: the first
random window by the Levy approximation of the integrated GBM, later windows
by ``log a_i ~ N(log a_{i-1} + (mu_P - sigma_P^2/2) Delta, sigma_P^2 Delta)``.
The log-likelihood therefore splits into a price block ``G(mu_S, sigma_S)``
and a sentiment block ``H(mu_P, sigma_P)``, which are maximised separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .errors import DomainError, InsufficientDataError, NumericalError, ValidationError
from .model import ModelParams, integrated_gbm_moments, levy_params
from .simulate import ReturnSample, SampledPath, build_return_sample

SIGMA_BOUNDS = (1e-6, 1e2)
MU_BOUNDS = (-1e2, 1e2)
FATOL = 1e-9
MAX_EVALS = 100_000
N_STARTS = 5
HESSIAN_REL_STEP = 1e-4
PARAM_NAMES = ("mu_P", "sigma_P", "mu_S", "sigma_S")

_LOG2PI = math.log(2 * math.pi)


def _normal_logpdf(x, mean, var):
    return -0.5 * (_LOG2PI + np.log(var) + (x - mean) ** 2 / var)


def gaussian_block(mu_S: float, sigma_S: float, sample: ReturnSample) -> float:
    """Sum of the conditional Gaussian log-densities of the returns."""
    if not sigma_S > 0:
        raise ValidationError(f"sigma_S must be > 0, got {sigma_S}")
    a = sample.cumulants
    s2 = sigma_S * sigma_S
    return float(np.sum(_normal_logpdf(sample.returns, (mu_S - 0.5 * s2) * a, s2 * a)))


def sentiment_block(mu_P: float, sigma_P: float, sample: ReturnSample) -> float:
    """Sum of the approximate lognormal log-densities of the cumulative sentiment.

    Windows lying wholly in the known history carry no density.  The first
    random window uses the Levy law of the integrated sentiment over its random
    part when ``sample.p0`` is known, and is conditioned on otherwise.
    """
    if not sigma_P > 0:
        raise ValidationError(f"sigma_P must be > 0, got {sigma_P}")
    a = sample.cumulants
    j = sample.n_fixed
    if j >= a.size:
        return 0.0
    total = 0.0
    if sample.p0 is not None:
        y = a[j] - sample.x_tau
        if not y > 0:
            raise DomainError(f"first cumulant {a[j]} does not exceed its known part {sample.x_tau}")
        m1, m2 = integrated_gbm_moments(sample.p0, mu_P, sigma_P, sample.first_span)
        total += float(levy_params(m1, m2).logpdf(y))
    if a.size > j + 1:
        la = np.log(a[j:])
        dt = sample.delta_big
        var = sigma_P * sigma_P * dt
        mean = la[:-1] + (mu_P - 0.5 * sigma_P * sigma_P) * dt
        total += float(np.sum(_normal_logpdf(la[1:], mean, var) - la[1:]))
    return total


def loglik(theta, sample: ReturnSample) -> float:
    """Approximate log-likelihood at ``theta = (mu_P, mu_S, sigma_P, sigma_S)``."""
    mu_P, mu_S, sigma_P, sigma_S = (float(v) for v in theta)
    return gaussian_block(mu_S, sigma_S, sample) + sentiment_block(mu_P, sigma_P, sample)


@dataclass
class FitResult:
    """Estimates with standard errors; delays are in years."""

    mu_P: float
    sigma_P: float
    mu_S: float
    sigma_S: float
    std_errors: dict
    loglik: float
    tau_hat: float
    method: str
    converged: bool
    tau_confidence_set: list = field(default_factory=list)
    profile: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def estimates(self) -> tuple[float, float, float, float]:
        return self.mu_P, self.sigma_P, self.mu_S, self.sigma_S

    def params(self, phi0: float = 1.0, L: float | None = None) -> ModelParams:
        return ModelParams(self.mu_P, self.sigma_P, self.mu_S, self.sigma_S, tau=self.tau_hat, phi0=phi0, L=L)

    def to_dict(self) -> dict:
        return {
            "mu_P": self.mu_P,
            "sigma_P": self.sigma_P,
            "mu_S": self.mu_S,
            "sigma_S": self.sigma_S,
            "std_errors": dict(self.std_errors),
            "loglik": self.loglik,
            "tau_hat": self.tau_hat,
            "tau_confidence_set": list(self.tau_confidence_set),
            "method": self.method,
            "converged": self.converged,
            "profile": list(self.profile),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            mu_P=float(d["mu_P"]),
            sigma_P=float(d["sigma_P"]),
            mu_S=float(d["mu_S"]),
            sigma_S=float(d["sigma_S"]),
            std_errors=dict(d.get("std_errors", {})),
            loglik=float(d.get("loglik", float("nan"))),
            tau_hat=float(d.get("tau_hat", 0.0)),
            method=str(d.get("method", "qml")),
            converged=bool(d.get("converged", True)),
            tau_confidence_set=list(d.get("tau_confidence_set", [])),
            profile=list(d.get("profile", [])),
            warnings=list(d.get("warnings", [])),
        )


# --- block optimisation -------------------------------------------------------

def _gaussian_start(sample: ReturnSample) -> tuple[float, float]:
    r, a = sample.returns, sample.cumulants
    c = r.sum() / a.sum()
    s2 = max(np.mean((r - c * a) ** 2 / a), SIGMA_BOUNDS[0] ** 2 * 4)
    return c + 0.5 * s2, math.sqrt(s2)


def _sentiment_start(sample: ReturnSample) -> tuple[float, float]:
    a = sample.cumulants[sample.n_fixed:]
    if a.size < 3:
        return 0.1, 0.5
    x = np.diff(np.log(a))
    dt = sample.delta_big
    s2 = max(np.var(x, ddof=1) / dt, 1e-4)
    return float(np.mean(x) / dt + 0.5 * s2), math.sqrt(s2)


def _maximise_block(block, sample, start, n_starts, seed):
    """Multi-start bounded Nelder-Mead over ``(mu, log sigma)``.

    Returns ``(mu, sigma, value, converged)`` of the best start.
    """
    bounds = [MU_BOUNDS, (math.log(SIGMA_BOUNDS[0]), math.log(SIGMA_BOUNDS[1]))]

    def objective(z):
        try:
            v = block(z[0], math.exp(z[1]), sample)
        except (NumericalError, DomainError, OverflowError):
            return np.inf
        return -v if np.isfinite(v) else np.inf

    x0 = np.array([start[0], math.log(max(start[1], SIGMA_BOUNDS[0]))])
    x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    starts = [x0] + [x0 + rng.normal(0.0, [0.2 * (abs(x0[0]) + 0.1), 0.3]) for _ in range(n_starts - 1)]

    best = None
    for s in starts:
        s = np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(
            objective,
            s,
            method="Nelder-Mead",
            bounds=bounds,
            options={"fatol": FATOL, "xatol": 1e-8, "maxfev": MAX_EVALS, "maxiter": MAX_EVALS},
        )
        if best is None or res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun):
        raise NumericalError("likelihood is not finite at any start")
    return float(best.x[0]), math.exp(best.x[1]), -float(best.fun), bool(best.success)


def _block_std_errors(block, sample, mu, sigma):
    """Standard errors from the inverse numerical Hessian of ``-block``."""
    theta = np.array([mu, sigma])
    h = HESSIAN_REL_STEP * np.maximum(np.abs(theta), 1e-3)
    h[1] = min(h[1], 0.5 * sigma)

    def f(t):
        return -block(t[0], t[1], sample)

    H = np.empty((2, 2))
    for i in range(2):
        for j in range(i, 2):
            ei = np.eye(2)[i] * h[i]
            ej = np.eye(2)[j] * h[j]
            H[i, j] = H[j, i] = (
                f(theta + ei + ej) - f(theta + ei - ej) - f(theta - ei + ej) + f(theta - ei - ej)
            ) / (4 * h[i] * h[j])
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return float("nan"), float("nan")
    d = np.diag(cov)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        return float("nan"), float("nan")
    return float(math.sqrt(d[0])), float(math.sqrt(d[1]))


def _safe_std_errors(block, sample, mu, sigma, warnings, label):
    try:
        se = _block_std_errors(block, sample, mu, sigma)
    except (NumericalError, ValidationError):
        se = (float("nan"), float("nan"))
    if not all(np.isfinite(se)):
        warnings.append(f"{label} information matrix is not positive definite; std errors unavailable")
    return se


def fit_gaussian_block(sample: ReturnSample, init=None, n_starts: int = N_STARTS, seed: int = 0):
    """Maximise the price block alone: ``(mu_S, sigma_S, value, converged)``."""
    start = _gaussian_start(sample) if init is None else init
    return _maximise_block(gaussian_block, sample, start, n_starts, seed)


def fit_qml(sample: ReturnSample, init=None, n_starts: int = N_STARTS, seed: int = 0) -> FitResult:
    """Quasi-maximum likelihood estimates of all four parameters.

    ``init`` is an optional ``(mu_P, sigma_P, mu_S, sigma_S)``.  Each block is
    maximised from ``n_starts`` starts (the first unperturbed); a run that
    misses the tolerance within the evaluation budget sets ``converged=False``.
    """
    if len(sample) < 8:
        raise InsufficientDataError(f"need at least 8 observations, got {len(sample)}")
    if init is not None:
        init_p, init_s = (init[0], init[1]), (init[2], init[3])
    else:
        init_p, init_s = _sentiment_start(sample), _gaussian_start(sample)
    mu_S, sigma_S, g, ok_s = _maximise_block(gaussian_block, sample, init_s, n_starts, seed)
    mu_P, sigma_P, h, ok_p = _maximise_block(sentiment_block, sample, init_p, n_starts, seed + 1)

    warnings: list[str] = []
    se_p = _safe_std_errors(sentiment_block, sample, mu_P, sigma_P, warnings, "sentiment block")
    se_s = _safe_std_errors(gaussian_block, sample, mu_S, sigma_S, warnings, "price block")
    if not (ok_s and ok_p):
        warnings.append("simplex search did not meet its tolerance")
    return FitResult(
        mu_P=mu_P,
        sigma_P=sigma_P,
        mu_S=mu_S,
        sigma_S=sigma_S,
        std_errors=dict(zip(PARAM_NAMES, (*se_p, *se_s))),
        loglik=g + h,
        tau_hat=sample.tau,
        method="qml",
        converged=ok_s and ok_p,
        warnings=warnings,
    )


def sentiment_moments(fine_sentiment: SampledPath) -> tuple[float, float, float, float]:
    """Method-of-moments ``(mu_P, sigma_P, se_mu, se_sigma)`` from fine log-returns."""
    values = fine_sentiment.values
    if values.size < 31:
        raise InsufficientDataError(f"need at least 30 fine sentiment returns, got {values.size - 1}")
    if not np.all(values > 0):
        raise ValidationError("sentiment must be strictly positive")
    x = np.diff(np.log(values))
    dt = fine_sentiment.step
    m = x.size
    s2 = np.var(x, ddof=1) / dt
    sigma = math.sqrt(s2)
    mu = float(np.mean(x)) / dt + 0.5 * s2
    return mu, sigma, sigma / math.sqrt(m * dt), sigma / math.sqrt(2 * (m - 1))


def fit_two_step(
    fine_sentiment: SampledPath,
    sample: ReturnSample,
    init=None,
    n_starts: int = N_STARTS,
    seed: int = 0,
) -> FitResult:
    """Moments for the sentiment parameters, then the price block by maximum likelihood."""
    mu_P, sigma_P, se_mu_p, se_sig_p = sentiment_moments(fine_sentiment)
    if len(sample) < 8:
        raise InsufficientDataError(f"need at least 8 observations, got {len(sample)}")
    start = _gaussian_start(sample) if init is None else (init[2], init[3])
    mu_S, sigma_S, g, ok = _maximise_block(gaussian_block, sample, start, n_starts, seed)
    warnings: list[str] = []
    se_s = _safe_std_errors(gaussian_block, sample, mu_S, sigma_S, warnings, "price block")
    try:
        h = sentiment_block(mu_P, sigma_P, sample) if sigma_P > 0 else float("nan")
    except (NumericalError, DomainError):
        h = float("nan")
    if not ok:
        warnings.append("simplex search did not meet its tolerance")
    return FitResult(
        mu_P=mu_P,
        sigma_P=sigma_P,
        mu_S=mu_S,
        sigma_S=sigma_S,
        std_errors=dict(zip(PARAM_NAMES, (se_mu_p, se_sig_p, *se_s))),
        loglik=g + h,
        tau_hat=sample.tau,
        method="two_step_moments",
        converged=ok,
        warnings=warnings,
    )


# --- profile likelihood over the delay -----------------------------------------

def confidence_threshold(alpha: float = 0.05, level: float | None = None) -> float:
    """Drop in log-likelihood defining the delay confidence set.

    The chi-square(1) quantile is taken at ``1 - 2 alpha`` unless ``level`` is
    given explicitly.
    """
    q = 1.0 - 2.0 * alpha if level is None else level
    if not 0.0 < q < 1.0:
        raise ValidationError(f"quantile level must lie in (0, 1), got {q}")
    return 0.5 * float(stats.chi2.ppf(q, df=1))


def confidence_set(taus, values, threshold: float) -> tuple[float, list]:
    """``(tau_hat, set)`` from profile values; non-finite entries are skipped."""
    taus = list(taus)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    if not ok.any():
        raise NumericalError("every grid point failed")
    best = int(np.argmax(np.where(ok, values, -np.inf)))
    keep = [t for t, v, f in zip(taus, values, ok) if f and v >= values[best] - threshold]
    return taus[best], keep


def _profile(samples, taus, fit, alpha, level):
    fits, values, warnings, rows = [], [], [], []
    for tau, sample in zip(taus, samples):
        try:
            res = fit(sample)
        except (NumericalError, ValidationError) as exc:
            warnings.append(f"tau={tau:.6g}: {exc}")
            fits.append(None)
            values.append(np.nan)
            rows.append({"tau": tau, "loglik": None, "converged": False})
            continue
        if not res.converged:
            warnings.append(f"tau={tau:.6g}: optimiser did not converge; excluded")
        fits.append(res)
        values.append(res.loglik if res.converged else np.nan)
        rows.append({"tau": tau, "loglik": res.loglik, "converged": res.converged})
    tau_hat, keep = confidence_set(taus, values, confidence_threshold(alpha, level))
    best = fits[taus.index(tau_hat)]
    best.tau_hat = tau_hat
    best.tau_confidence_set = keep
    best.profile = rows
    best.warnings = warnings + best.warnings
    return best


def _default_fit(method, fine_sentiment):
    if method == "qml":
        return fit_qml
    if method == "two_step":
        if fine_sentiment is None:
            raise ValidationError("two-step profile needs the fine sentiment path")
        return lambda s: fit_two_step(fine_sentiment, s)
    raise ValidationError(f"unknown method {method!r}")


def _first_random_index(sample: ReturnSample) -> int:
    """Index of the first window lying entirely after time 0."""
    j = sample.n_fixed + (1 if sample.p0 is not None else 0)
    if j >= len(sample):
        raise InsufficientDataError("no window lies wholly after time 0")
    return int(sample.index[j])


def profile_tau(
    price: SampledPath,
    sentiment: SampledPath,
    delta_big: float,
    tau_grid,
    alpha: float = 0.05,
    level: float | None = None,
    method: str = "qml",
    fine_sentiment: SampledPath | None = None,
) -> FitResult:
    """Maximise the likelihood over a grid of delays.

    Every grid point is scored on the same return indices, starting at the
    first window that lies after time 0 for all delays, with the first
    cumulant conditioned on.  Each delay then contributes the same number of
    density terms and the profile values are comparable.
    """
    taus = [float(t) for t in tau_grid]
    if not taus:
        raise ValidationError("empty delay grid")
    probes = [build_return_sample(price, sentiment, delta_big, t) for t in taus]
    first = max(_first_random_index(s) for s in probes)
    last = min(int(s.index[-1]) for s in probes)
    if last - first + 1 < 8:
        raise InsufficientDataError("fewer than 8 return indices are common to every grid delay")
    samples = [
        replace(
            build_return_sample(price, sentiment, delta_big, t, start=first, count=last - first + 1),
            p0=None, x_tau=0.0, first_span=None,
        )
        for t in taus
    ]
    fine = sentiment if fine_sentiment is None else fine_sentiment
    fit = _default_fit(method, fine)
    return _profile(samples, taus, fit, alpha, level)


def profile_lag(
    returns,
    sentiment_obs,
    delta_big: float,
    lags,
    alpha: float = 0.05,
    level: float | None = None,
) -> FitResult:
    """Delay profile for directly observed cumulative sentiment; delays are ``lag * delta_big``."""
    lags = [int(c) for c in lags]
    if not lags:
        raise ValidationError("empty lag grid")
    r = np.asarray(returns, dtype=float)
    a = np.asarray(sentiment_obs, dtype=float)
    if r.size != a.size:
        raise InsufficientDataError(f"length mismatch: {r.size} returns vs {a.size} sentiment observations")
    if min(lags) < 0:
        raise ValidationError("lags must be >= 0")
    top = max(lags)
    m = r.size
    if m - top < 8:
        raise InsufficientDataError(f"{m} observations leave fewer than 8 pairs at lag {top}")
    samples = []
    for c in lags:
        # common return indices top..m-1 paired with sentiment slots shifted by c
        s = ReturnSample(
            delta_big=delta_big,
            returns=r[top:m],
            cumulants=a[top - c : m - c],
            tau=c * delta_big,
            index=np.arange(top, m),
        )
        samples.append(s)
    taus = [c * delta_big for c in lags]
    return _profile(samples, taus, fit_qml, alpha, level)
