"""Suitability checks for a candidate sentiment series.

A usable proxy should have stationary log-returns (augmented Dickey-Fuller
regression with a constant) that look Gaussian (one-sample Kolmogorov-Smirnov
test on standardised log-returns).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import kolmogorov, ndtr

from .errors import InsufficientDataError, SingularRegressionError, ValidationError

LEVELS = (0.01, 0.05, 0.10)

# Dickey-Fuller critical values, constant and no trend, by sample size
_ADF_SIZES = np.array([25, 50, 100, 250, 500, np.inf])
_ADF_CRITICAL = {
    0.01: np.array([-3.75, -3.58, -3.51, -3.46, -3.44, -3.43]),
    0.05: np.array([-3.00, -2.93, -2.89, -2.88, -2.87, -2.86]),
    0.10: np.array([-2.63, -2.60, -2.58, -2.57, -2.57, -2.57]),
}


@dataclass(frozen=True)
class TestReport:
    """Outcome of a hypothesis test.

    For the ADF test ``p_value`` is the upper end of ``p_interval``, the
    bracket between tabulated levels that contains the statistic.
    """

    name: str
    statistic: float
    p_value: float
    reject_at: dict
    n: int
    p_interval: tuple | None = None
    critical_values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "test": self.name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "p_interval": list(self.p_interval) if self.p_interval else None,
            "reject_at": {str(k): v for k, v in self.reject_at.items()},
            "critical_values": {str(k): v for k, v in self.critical_values.items()},
            "n": self.n,
        }


def adf_critical_values(n: int) -> dict:
    """Critical values interpolated linearly in ``1/n``."""
    inv = 1.0 / _ADF_SIZES
    x = 1.0 / n
    # np.interp needs increasing abscissae
    return {lvl: float(np.interp(x, inv[::-1], cv[::-1])) for lvl, cv in _ADF_CRITICAL.items()}


def adf_test(series, lag_order: int = 1) -> TestReport:
    """Augmented Dickey-Fuller test of a unit root, constant but no trend.

    Regresses ``dy_t`` on ``1, y_{t-1}, dy_{t-1}, ..., dy_{t-p}`` and returns
    the t-ratio of the ``y_{t-1}`` coefficient.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise ValidationError("series must be 1-d")
    if lag_order < 0:
        raise ValidationError("lag_order must be >= 0")
    if y.size < 20 + lag_order:
        raise InsufficientDataError(f"need at least {20 + lag_order} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValidationError("series contains non-finite values")

    dy = np.diff(y)
    p = lag_order
    target = dy[p:]
    level = y[p:-1]
    # centring only moves the intercept; it keeps the design well conditioned
    cols = [np.ones(target.size), level - level.mean()]
    cols += [dy[p - j : dy.size - j] for j in range(1, p + 1)]
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularRegressionError("regression design is rank deficient")
    beta, _, _, _ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ beta
    dof = target.size - X.shape[1]
    s2 = float(resid @ resid) / dof
    if s2 <= 1e-28 * max(1.0, float(target @ target) / target.size):
        raise SingularRegressionError("regression fits exactly; residual variance is zero")
    cov = s2 * np.linalg.inv(X.T @ X)
    stat = float(beta[1] / math.sqrt(cov[1, 1]))

    n = target.size
    cvs = adf_critical_values(n)
    reject = {lvl: stat < cvs[lvl] for lvl in LEVELS}
    if reject[0.01]:
        interval = (0.0, 0.01)
    elif reject[0.05]:
        interval = (0.01, 0.05)
    elif reject[0.10]:
        interval = (0.05, 0.10)
    else:
        interval = (0.10, 1.0)
    return TestReport("adf", stat, interval[1], reject, n, interval, cvs)


def ks_normal_test(values) -> TestReport:
    """KS distance of standardised values from N(0, 1), asymptotic p-value.

    Mean and standard deviation are estimated from the same data and no
    correction is made for that, so the test is conservative.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InsufficientDataError("need at least two values")
    sd = np.std(x, ddof=1)
    if not sd > 0:
        raise SingularRegressionError("values are constant")
    z = np.sort((x - x.mean()) / sd)
    n = z.size
    cdf = ndtr(z)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    pval = float(kolmogorov(math.sqrt(n) * d))
    return TestReport("ks", d, pval, {lvl: pval < lvl for lvl in LEVELS}, n)


def ks_lognormal_test(series) -> TestReport:
    """Lognormality of the increments ``P_i / P_{i-1}`` of a positive series."""
    y = np.asarray(series, dtype=float)
    if y.size < 20:
        raise InsufficientDataError(f"need at least 20 observations, got {y.size}")
    if not np.all(y > 0):
        raise ValidationError("series must be strictly positive")
    return ks_normal_test(np.diff(np.log(y)))
