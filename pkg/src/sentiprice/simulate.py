"""Path simulation and construction of the discretely observed sample.

Sentiment is simulated exactly from its lognormal solution on a grid of step
``delta`` that also carries the constant history ``phi0`` on ``[-L, 0]``.  The
log-price is advanced with the delayed sentiment frozen at one end of each
step, so given the sentiment path the price increments are exactly Gaussian.
The default freezes it at the right end, the same nodes the weekly
aggregation in :func:`build_return_sample` sums over; the simulated
cumulative sentiment is then exactly the variance carrier of the returns.

Random numbers come from independent streams keyed by ``(seed, block)`` where a
block is a fixed run of ``BLOCK_SIZE`` paths; output never depends on how the
blocks are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, MisalignedGridError, ValidationError
from .model import ModelParams

BLOCK_SIZE = 4096
GRID_TOL = 1e-12


@dataclass(frozen=True)
class SampledPath:
    """Uniformly spaced series: ``values[j]`` is observed at ``start_time + j * step``."""

    step: float
    start_time: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("a path needs a non-empty 1-d array of values")
        if not self.step > 0:
            raise ValidationError(f"step must be > 0, got {self.step}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.step * np.arange(self.values.size)

    @property
    def end_time(self) -> float:
        return self.start_time + self.step * (self.values.size - 1)


@dataclass(frozen=True)
class ReturnSample:
    """Paired log-returns ``R_i`` and cumulative sentiment ``A_i`` at step ``delta_big``.

    The first ``n_fixed`` cumulants lie entirely in the known sentiment history.
    When the first random window straddles time 0, ``x_tau`` is its known part,
    ``first_span`` the length of its random part and ``p0`` the sentiment at 0;
    otherwise ``p0`` is None and likelihoods condition on the first cumulant.
    """

    delta_big: float
    returns: np.ndarray
    cumulants: np.ndarray
    x_tau: float = 0.0
    p0: float | None = None
    first_span: float | None = None
    n_fixed: int = 0
    tau: float = 0.0
    index: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        a = np.asarray(self.cumulants, dtype=float)
        if r.shape != a.shape or r.ndim != 1 or r.size == 0:
            raise ValidationError("returns and cumulants must be 1-d, equal length and non-empty")
        if not np.all(a > 0):
            raise ValidationError("cumulative sentiment must be strictly positive")
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "cumulants", a)
        if self.index is None:
            object.__setattr__(self, "index", np.arange(1, r.size + 1))

    def __len__(self) -> int:
        return self.returns.size


@dataclass(frozen=True)
class PathBundle:
    """Simulated paths, one row per path.

    ``sentiment`` starts at ``sentiment_start`` (<= 0, the history) and ``price``
    at time 0; both share ``step``.
    """

    step: float
    sentiment_start: float
    sentiment: np.ndarray
    price: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.price.shape[0]

    def path(self, i: int) -> tuple[SampledPath, SampledPath]:
        return (
            SampledPath(self.step, self.sentiment_start, self.sentiment[i]),
            SampledPath(self.step, 0.0, self.price[i]),
        )


def grid_multiple(length: float, step: float, what: str = "delay") -> int:
    """Integer ``m`` with ``length == m * step`` (to 1e-12), else MisalignedGridError."""
    m = round(length / step)
    if abs(m * step - length) > GRID_TOL * max(1.0, abs(length)) or m < 0:
        raise MisalignedGridError(f"{what} {length!r} is not an integer multiple of step {step!r}")
    return int(m)


def aligned_step(target: float, *lengths: float, max_refine: int = 1000) -> float:
    """Largest step no bigger than ``target`` that divides every positive length.

    The first positive length fixes the candidates ``lengths[0] / n``.
    """
    positive = [v for v in lengths if v > 0]
    if not target > 0:
        raise ValidationError(f"target step must be > 0, got {target}")
    if not positive:
        return target
    base = positive[0]
    n0 = max(1, int(math.ceil(base / target - 1e-9)))
    for n in range(n0, n0 * max_refine + 1):
        step = base / n
        try:
            for v in positive[1:]:
                grid_multiple(v, step)
        except MisalignedGridError:
            continue
        return step
    raise MisalignedGridError(f"no common step <= {target} divides {positive}")


def _history_steps(params: ModelParams, step: float) -> int:
    r = grid_multiple(params.tau, step)
    return max(r, int(math.ceil(params.L / step - 1e-9)))


def evolve(
    params: ModelParams,
    s0: float,
    step: float,
    z_sentiment: np.ndarray,
    z_price: np.ndarray,
    rate: float | None = None,
    history: int | None = None,
    rule: str = "right",
) -> tuple[np.ndarray, np.ndarray]:
    """Turn standard normal draws into sentiment and log-price paths.

    ``z_sentiment`` and ``z_price`` have shape ``(n_paths, n_steps)``.  Returns
    ``(sentiment, log_price)``: sentiment on times ``-history*step .. n_steps*step``,
    log-price on ``0 .. n_steps*step``.  ``rate=None`` is the physical measure;
    a float switches to the minimal martingale measure with that short rate.
    ``rule`` picks the sentiment node used over each step: ``"right"`` uses
    ``P(t + step - tau)``, ``"left"`` uses ``P(t - tau)``.
    """
    z_sentiment = np.atleast_2d(z_sentiment)
    z_price = np.atleast_2d(z_price)
    n, n_steps = z_price.shape
    r = grid_multiple(params.tau, step)
    h = _history_steps(params, step) if history is None else history
    if h < r:
        raise ValidationError("history shorter than the delay")

    sq = math.sqrt(step)
    inc = (params.mu_P - 0.5 * params.sigma_P ** 2) * step + params.sigma_P * sq * z_sentiment
    sentiment = np.empty((n, h + n_steps + 1))
    sentiment[:, : h + 1] = params.phi0
    sentiment[:, h + 1 :] = params.phi0 * np.exp(np.cumsum(inc, axis=1))

    # delayed sentiment for step k: P at time (k + shift)*step - tau
    shift = _rule_shift(rule)
    delayed = sentiment[:, h - r + shift : h - r + shift + n_steps]
    s2 = params.sigma_S ** 2
    if rate is None:
        drift = (params.mu_S - 0.5 * s2) * delayed * step
    else:
        drift = (rate - 0.5 * s2 * delayed) * step
    dlog = drift + params.sigma_S * np.sqrt(delayed * step) * z_price
    log_price = np.empty((n, n_steps + 1))
    log_price[:, 0] = math.log(s0)
    np.cumsum(dlog, axis=1, out=log_price[:, 1:])
    log_price[:, 1:] += math.log(s0)
    return sentiment, log_price


def _rule_shift(rule: str) -> int:
    if rule == "right":
        return 1
    if rule == "left":
        return 0
    raise ValidationError(f"unknown integration rule {rule!r}")


def _check_inputs(params, s0, horizon, step, n_paths, seed):
    if not step > 0:
        raise ValidationError(f"step must be > 0, got {step}")
    if not horizon >= step:
        raise ValidationError(f"horizon {horizon} shorter than one step {step}")
    if not s0 > 0:
        raise ValidationError(f"s0 must be > 0, got {s0}")
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    if seed < 0:
        raise ValidationError("seed must be a non-negative integer")
    grid_multiple(params.tau, step)
    return grid_multiple(horizon, step, "horizon")


def _block_draws(seed: int, block: int, n: int, n_steps: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    return rng.standard_normal((n, n_steps)), rng.standard_normal((n, n_steps))


def _blocks(n_paths: int):
    for b, start in enumerate(range(0, n_paths, BLOCK_SIZE)):
        yield b, start, min(BLOCK_SIZE, n_paths - start)


def _map_blocks(fn, n_paths, workers):
    blocks = list(_blocks(n_paths))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda blk: fn(*blk), blocks))
    return [fn(*blk) for blk in blocks]


def simulate_paths(
    params: ModelParams,
    s0: float,
    horizon: float,
    step: float,
    n_paths: int,
    seed: int,
    measure: str = "physical",
    rate: float = 0.0,
    workers: int = 1,
    rule: str = "right",
) -> PathBundle:
    """Simulate ``n_paths`` joint sentiment/price paths on ``[0, horizon]``.

    ``measure`` is ``"physical"`` or ``"risk_neutral"`` (drift replaced by
    ``rate``; the sentiment keeps its drift).  Deterministic given ``seed``
    and independent of ``workers``.
    """
    n_steps = _check_inputs(params, s0, horizon, step, n_paths, seed)
    rn = _measure_rate(measure, rate)
    h = _history_steps(params, step)

    def run(b, start, n):
        z_sent, z_price = _block_draws(seed, b, n, n_steps)
        p, logs = evolve(params, s0, step, z_sent, z_price, rate=rn, history=h, rule=rule)
        return p, np.exp(logs)

    parts = _map_blocks(run, n_paths, workers)
    return PathBundle(
        step=step,
        sentiment_start=-h * step,
        sentiment=np.concatenate([p for p, _ in parts]),
        price=np.concatenate([s for _, s in parts]),
    )


def terminal_prices(
    params: ModelParams,
    s0: float,
    horizon: float,
    step: float,
    n_paths: int,
    seed: int,
    measure: str = "risk_neutral",
    rate: float = 0.0,
    workers: int = 1,
    rule: str = "right",
) -> np.ndarray:
    """Terminal prices only; same streams as :func:`simulate_paths`, bounded memory."""
    n_steps = _check_inputs(params, s0, horizon, step, n_paths, seed)
    rn = _measure_rate(measure, rate)
    h = _history_steps(params, step)

    def run(b, start, n):
        z_sent, z_price = _block_draws(seed, b, n, n_steps)
        _, logs = evolve(params, s0, step, z_sent, z_price, rate=rn, history=h, rule=rule)
        return np.exp(logs[:, -1])

    return np.concatenate(_map_blocks(run, n_paths, workers))


def _measure_rate(measure: str, rate: float) -> float | None:
    if measure == "physical":
        return None
    if measure == "risk_neutral":
        return float(rate)
    raise ValidationError(f"unknown measure {measure!r}")


def log_returns(path: SampledPath) -> np.ndarray:
    values = path.values
    if not np.all(values > 0):
        raise ValidationError("log-returns need strictly positive values")
    return np.diff(np.log(values))


def build_return_sample(
    price: SampledPath,
    sentiment: SampledPath,
    delta_big: float,
    tau: float,
    start: int = 1,
    count: int | None = None,
) -> ReturnSample:
    """Aggregate fine paths into ``(R_i, A_i)`` at observation step ``delta_big``.

    ``A_i`` is ``delta`` times the sum of the sentiment values at the right end of
    each fine step of ``[(i-1)*delta_big - tau, i*delta_big - tau]``; with a
    week of daily data and no delay this is the weekly mean times ``delta_big``.
    Time 0 is ``price.start_time``.  Windows reaching before the start of the
    sentiment series are dropped; ``start``/``count`` select returns by index.
    """
    step = price.step
    if abs(sentiment.step - step) > GRID_TOL * max(1.0, step) * 1e3:
        raise MisalignedGridError(f"price step {step} != sentiment step {sentiment.step}")
    k = grid_multiple(delta_big, step, "observation step")
    if k < 1:
        raise MisalignedGridError("observation step shorter than the data step")
    r = grid_multiple(tau, step)
    off = grid_multiple(price.start_time - sentiment.start_time, step, "series offset")
    if price.start_time < sentiment.start_time:
        raise MisalignedGridError("sentiment series starts after the price series")

    if not np.all(price.values > 0):
        raise ValidationError("prices must be strictly positive")
    if not np.all(sentiment.values > 0):
        raise ValidationError("sentiment must be strictly positive")
    log_s = np.log(price.values)
    p = sentiment.values
    n_total = (len(price) - 1) // k

    idx = np.arange(1, n_total + 1)
    lo = off + (idx - 1) * k - r + 1  # first node of each window
    hi = lo + k - 1
    ok = (lo >= 0) & (hi < p.size) & (idx >= start)
    idx = idx[ok]
    if count is not None:
        idx = idx[:count]
    if idx.size == 0:
        raise InsufficientDataError("no complete observation window in the data")
    lo = off + (idx - 1) * k - r + 1

    csum = np.concatenate([[0.0], np.cumsum(p)])
    cumulants = step * (csum[lo + k] - csum[lo])
    returns = log_s[idx * k] - log_s[(idx - 1) * k]

    known = np.clip(off - lo + 1, 0, k)  # nodes at or before time 0
    n_fixed = int(np.sum(known == k))
    x_tau, p0, span = 0.0, None, None
    if n_fixed < idx.size and lo[n_fixed] - 1 <= off:
        j = lo[n_fixed]
        q = int(known[n_fixed])
        x_tau = float(step * (csum[j + q] - csum[j]))
        p0 = float(p[off])
        span = (k - q) * step
    return ReturnSample(
        delta_big=delta_big,
        returns=returns,
        cumulants=cumulants,
        x_tau=x_tau,
        p0=p0,
        first_span=span,
        n_fixed=n_fixed,
        tau=tau,
        index=idx,
    )


def ingest_preaggregated(
    returns,
    sentiment_obs,
    delta_big: float,
    lag: int,
) -> ReturnSample:
    """Pair returns with directly observed cumulative sentiment lagged by ``lag`` slots.

    Both inputs are indexed by observation period; ``R_j`` is paired with
    ``A_{j-lag}``, so ``lag=c`` encodes a delay of ``c * delta_big``.  The first
    cumulant is conditioned on in the likelihood (``p0`` is None).
    """
    if lag < 0:
        raise ValidationError("lag must be >= 0")
    r = np.asarray(returns, dtype=float)
    a = np.asarray(sentiment_obs, dtype=float)
    if np.any(a <= 0):
        raise ValidationError("sentiment observations must be positive")
    m = min(r.size, a.size)
    if m - lag < 1:
        raise InsufficientDataError(f"{m} observations leave no pair at lag {lag}")
    if r.size != a.size:
        raise InsufficientDataError(f"length mismatch: {r.size} returns vs {a.size} sentiment observations")
    return ReturnSample(
        delta_big=delta_big,
        returns=r[lag:m],
        cumulants=a[: m - lag],
        tau=lag * delta_big,
        index=np.arange(lag, m),
    )
