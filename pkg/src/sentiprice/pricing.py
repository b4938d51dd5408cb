"""European vanilla and cash-or-nothing option prices.

Conditional on the integrated information ``x`` the log-price is Gaussian with
total variance ``sigma_S^2 x``, so the option price is the Black-Scholes price
averaged over the law of ``x``.  That law is replaced by the moment-matched
lognormal of the integrated sentiment and the average is computed by
Gauss-Legendre quadrature in probability space.  A Monte Carlo pricer under
the minimal martingale measure serves as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import DomainError, ValidationError
from .model import ModelParams, ip_moments, levy_params
from .simulate import terminal_prices

KINDS = ("call", "put", "binary_cash_call")
QUANTILE_RANGE = (1e-8, 1.0 - 1e-8)
DEFAULT_NODES = 256

Rate = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class OptionSpec:
    """European contract; ``rate`` is a constant or a deterministic function of time."""

    kind: str
    strike: float
    maturity: float
    rate: Rate = 0.0
    cash: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.maturity > 0:
            raise ValidationError(f"maturity must be > 0, got {self.maturity}")
        if not self.strike >= 0:
            raise ValidationError(f"strike must be >= 0, got {self.strike}")
        if self.kind == "binary_cash_call" and not self.cash > 0:
            raise ValidationError(f"binary payout must be > 0, got {self.cash}")

    def discount(self, t: float = 0.0) -> float:
        """``exp(-int_t^T r(u) du)``."""
        if callable(self.rate):
            integral, _ = integrate.quad(self.rate, t, self.maturity)
        else:
            integral = float(self.rate) * (self.maturity - t)
        return math.exp(-integral)

    def payoff(self, s_T):
        s_T = np.asarray(s_T, dtype=float)
        if self.kind == "call":
            return np.maximum(s_T - self.strike, 0.0)
        if self.kind == "put":
            return np.maximum(self.strike - s_T, 0.0)
        return np.where(s_T > self.strike, self.cash, 0.0)


@dataclass(frozen=True)
class PriceResult:
    price: float
    method: str
    stderr: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def bs_kernel(t: float, s, x, spec: OptionSpec, sigma_S: float):
    """Black-Scholes price at time ``t`` with total log-variance ``sigma_S^2 x``.

    Vectorised over ``s`` and ``x``.  Puts follow from parity; the binary pays
    ``spec.cash`` if the terminal price exceeds the strike.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(x <= 0):
        raise DomainError("integrated information must be > 0")
    if np.any(s <= 0):
        raise DomainError("spot must be > 0")
    if not t < spec.maturity:
        raise DomainError(f"valuation time {t} not before maturity {spec.maturity}")
    disc = spec.discount(t)
    k_disc = spec.strike * disc
    if spec.strike == 0:
        if spec.kind == "call":
            return s * np.ones_like(x)
        if spec.kind == "put":
            return np.zeros(np.broadcast(s, x).shape)
        return spec.cash * disc * np.ones(np.broadcast(s, x).shape)

    vol = sigma_S * np.sqrt(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(s / k_disc) + 0.5 * vol * vol) / vol
        # zero volatility: the forward either finishes above the strike or not
        d1 = np.where(vol > 0, d1, np.where(np.log(s / k_disc) > 0, np.inf, -np.inf))
    d2 = d1 - vol
    call = s * ndtr(d1) - k_disc * ndtr(d2)
    if spec.kind == "call":
        return call
    if spec.kind == "put":
        return call - s + k_disc
    return spec.cash * disc * ndtr(d2)


def _legendre(nodes: int):
    lo, hi = QUANTILE_RANGE
    z, w = np.polynomial.legendre.leggauss(nodes)
    u = lo + 0.5 * (hi - lo) * (z + 1.0)
    # renormalised so the weights integrate constants exactly
    return u, w / w.sum()


def price_quadrature(
    params: ModelParams,
    s0: float,
    spec: OptionSpec,
    include_initial_window: bool = True,
    nodes: int = DEFAULT_NODES,
) -> PriceResult:
    """Price at time 0 by integrating the kernel against the lognormal information law.

    The integration variable is the integrated sentiment ``IP(T - tau)``; with
    ``include_initial_window`` the known history ``phi0 * tau`` is added before
    it enters the kernel.  If the maturity falls inside the delay the
    information is deterministic, ``phi0 * T``.
    """
    if not s0 > 0:
        raise ValidationError(f"s0 must be > 0, got {s0}")
    if nodes < 2:
        raise ValidationError("need at least 2 quadrature nodes")
    T, tau = spec.maturity, params.tau
    if T <= tau:
        x = params.phi0 * T
        price = float(bs_kernel(0.0, s0, x, spec, params.sigma_S))
        return PriceResult(price, "quadrature", 0.0, {"nodes": 0, "deterministic_information": x})

    m1, m2 = ip_moments(params, T - tau)
    law = levy_params(m1, m2)
    shift = params.phi0 * tau if include_initial_window else 0.0
    if law.nu2 == 0.0:
        price = float(bs_kernel(0.0, s0, m1 + shift, spec, params.sigma_S))
        used = 0
    else:
        u, w = _legendre(nodes)
        x = law.ppf(u) + shift
        price = float(np.dot(w, bs_kernel(0.0, s0, x, spec, params.sigma_S)))
        used = nodes
    return PriceResult(
        price,
        "quadrature",
        0.0,
        {"nodes": used, "alpha": law.alpha, "nu2": law.nu2, "include_initial_window": include_initial_window},
    )


def _constant_rate(spec: OptionSpec) -> float:
    if callable(spec.rate):
        raise ValidationError("Monte Carlo pricing needs a constant rate")
    return float(spec.rate)


def price_mc_many(
    params: ModelParams,
    s0: float,
    specs,
    n_paths: int,
    step: float,
    seed: int,
    workers: int = 1,
) -> list[PriceResult]:
    """Monte Carlo prices for several contracts sharing maturity and rate.

    One set of risk-neutral terminal prices is simulated and reused, so the
    estimates are correlated across contracts.
    """
    specs = list(specs)
    if not specs:
        return []
    T = specs[0].maturity
    r = _constant_rate(specs[0])
    for sp in specs[1:]:
        if sp.maturity != T or _constant_rate(sp) != r:
            raise ValidationError("contracts priced together must share maturity and rate")
    s_T = terminal_prices(params, s0, T, step, n_paths, seed, measure="risk_neutral", rate=r, workers=workers)
    disc = math.exp(-r * T)
    out = []
    for sp in specs:
        v = disc * sp.payoff(s_T)
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
        out.append(PriceResult(float(np.mean(v)), "monte_carlo", se, {"paths": n_paths, "step": step, "seed": seed}))
    return out


def price_mc(
    params: ModelParams,
    s0: float,
    spec: OptionSpec,
    n_paths: int,
    step: float,
    seed: int,
    workers: int = 1,
) -> PriceResult:
    """Discounted average payoff over risk-neutral paths, with its standard error."""
    return price_mc_many(params, s0, [spec], n_paths, step, seed, workers)[0]


# --- numerical tables ----------------------------------------------------------

@dataclass(frozen=True)
class TableRow:
    maturity: float
    tau: float
    p0: float


@dataclass(frozen=True)
class PriceTable:
    kind: str
    strikes: tuple
    rows: tuple
    prices: np.ndarray

    def to_csv_rows(self) -> list[list]:
        header = ["maturity", "tau", "p0"] + [f"K={k:g}" for k in self.strikes]
        body = [[r.maturity, r.tau, r.p0] + list(map(float, p)) for r, p in zip(self.rows, self.prices)]
        return [header] + body


def table_report(
    params: ModelParams,
    s0: float,
    strikes,
    maturities,
    taus,
    p0s,
    kind: str = "call",
    rate: float = 0.0,
    cash: float = 1.0,
    include_initial_window: bool = True,
    nodes: int = DEFAULT_NODES,
) -> PriceTable:
    """Quadrature prices, one row per (maturity, tau, p0) and one column per strike."""
    rows = [TableRow(T, tau, p0) for T in maturities for tau in taus for p0 in p0s]
    return _price_rows(params, s0, tuple(strikes), rows, kind, rate, cash, include_initial_window, nodes)


def _price_rows(params, s0, strikes, rows, kind, rate, cash, include_initial_window, nodes):
    prices = np.empty((len(rows), len(strikes)))
    for i, row in enumerate(rows):
        p = params.replace(tau=row.tau, phi0=row.p0, L=max(params.L, row.tau))
        for j, k in enumerate(strikes):
            spec = OptionSpec(kind, k, row.maturity, rate=rate, cash=cash)
            prices[i, j] = price_quadrature(p, s0, spec, include_initial_window, nodes).price
    return PriceTable(kind, tuple(strikes), tuple(rows), prices)


TABLE_BASE = dict(s0=450.0, rate=0.01, mu_P=0.03, sigma_P=0.35, sigma_S=0.04)
TABLE_STRIKES = (400.0, 425.0, 450.0, 475.0, 500.0)


def table_preset(name: str, year_days: float = 252.0):
    """Layout of the published price tables.

    Returns ``(kind, rows, params)``.  Maturities
    of 1 and 3 months are ``year_days/12`` and ``year_days/4`` days, a week is
    5 working days; all divided by ``year_days``.
    """
    month = 1.0 / 12.0
    week = 5.0 / year_days
    # whole trading days per month, so 252 gives 21 and 63
    m1 = round(year_days * month) / year_days
    m3 = round(year_days * 3 * month) / year_days
    layouts = {
        "table3": ("call", [(m3, week, p0) for p0 in (10.0, 100.0, 1000.0)]),
        "table4": ("call", [(T, tw, 100.0) for T in (m1, m3) for tw in (week, 2 * week)]),
        "table5": ("binary_cash_call", [(m3, week, p0) for p0 in (10.0, 100.0, 1000.0)]),
        "table6": ("binary_cash_call", [(T, tw, 100.0) for T in (m1, m3) for tw in (week, 2 * week)]),
    }
    if name not in layouts:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(layouts)}")
    kind, rows = layouts[name]
    base = TABLE_BASE
    params = ModelParams(base["mu_P"], base["sigma_P"], 0.0, base["sigma_S"], tau=0.0, phi0=1.0)
    return kind, [TableRow(*r) for r in rows], params


def table_preset_report(
    name: str,
    include_initial_window: bool = False,
    nodes: int = DEFAULT_NODES,
    year_days: float = 252.0,
) -> PriceTable:
    """Reproduce one of the published tables; binaries pay 100."""
    kind, rows, params = table_preset(name, year_days)
    return _price_rows(
        params,
        TABLE_BASE["s0"],
        TABLE_STRIKES,
        rows,
        kind,
        TABLE_BASE["rate"],
        100.0,
        include_initial_window,
        nodes,
    )
