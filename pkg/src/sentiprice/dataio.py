"""CSV ingestion of price/sentiment series and option quotes, and quote scoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import DataFormatError, SentipriceError, ValidationError
from .likelihood import FitResult
from .model import ModelParams
from .pricing import OptionSpec, bs_kernel, price_quadrature
from .simulate import SampledPath

DAYS_PER_YEAR = 365.0
SERIES_HEADER = ["date", "value"]
QUOTE_HEADER = ["quote_date", "expiry", "strike", "bid", "ask", "underlying"]
ATM_BAND = 0.05


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if [h.strip() for h in first] != header:
            raise DataFormatError(f"{path}:1: expected header {','.join(header)}, got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _parse_date(text, path, lineno):
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: bad date {text!r}") from None


def _parse_float(text, path, lineno):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: bad number {text!r}") from None
    if not math.isfinite(value):
        raise DataFormatError(f"{path}:{lineno}: non-finite number {text!r}")
    return value


def read_dated_series(path, positive: bool = True) -> tuple[list[date], np.ndarray]:
    """Raw ``(dates, values)`` from a ``date,value`` CSV after validation."""
    dates, values = [], []
    for lineno, (d, v) in _read_rows(path, SERIES_HEADER):
        day = _parse_date(d, path, lineno)
        value = _parse_float(v, path, lineno)
        if dates and day <= dates[-1]:
            raise DataFormatError(f"{path}:{lineno}: date {day} does not follow {dates[-1]}")
        if positive and not value > 0:
            raise ValidationError(f"{path}:{lineno}: value must be > 0, got {value}")
        dates.append(day)
        values.append(value)
    if len(dates) < 2:
        raise DataFormatError(f"{path}: need at least two rows")
    gaps = [(b - a).days for a, b in zip(dates, dates[1:])]
    step = min(gaps)
    if step not in (1, 7):
        raise DataFormatError(f"{path}: spacing of {step} days is neither daily nor weekly")
    for (a, b), g in zip(zip(dates, dates[1:]), gaps):
        if g != step:
            missing = a + timedelta(days=step)
            raise DataFormatError(f"{path}: gap after {a}: missing {missing}")
    return dates, np.array(values)


def load_series(path, origin: date | None = None, positive: bool = True) -> SampledPath:
    """Daily or weekly ``date,value`` CSV as a :class:`SampledPath` in years.

    ``origin`` is the calendar date of time 0 (default: the first row).
    """
    dates, values = read_dated_series(path, positive)
    step = (dates[1] - dates[0]).days / DAYS_PER_YEAR
    start = 0.0 if origin is None else (dates[0] - origin).days / DAYS_PER_YEAR
    return SampledPath(step, start, values)


def write_series(path, series: SampledPath, origin: date) -> None:
    """Write a daily or weekly path; ``origin`` is the calendar date of time 0."""
    days = series.step * DAYS_PER_YEAR
    if abs(days - round(days)) > 1e-9 or round(days) not in (1, 7):
        raise ValidationError(f"step of {days} days cannot be written as a dated series")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        for t, v in zip(series.times, series.values):
            w.writerow([(origin + timedelta(days=round(t * DAYS_PER_YEAR))).isoformat(), repr(float(v))])


def normalize_max100(series: SampledPath) -> SampledPath:
    """Rescale so the largest value is exactly 100."""
    v = series.values
    if not np.all(v > 0):
        raise ValidationError("series must be strictly positive")
    return SampledPath(series.step, series.start_time, v / v.max() * 100.0)


@dataclass(frozen=True)
class QuoteRow:
    """Call quote with bid/ask expressed as fractions of the underlying."""

    quote_date: date
    expiry: date
    strike: float
    bid: float
    ask: float
    underlying: float

    def __post_init__(self):
        if not 0 <= self.bid <= self.ask:
            raise ValidationError(f"need 0 <= bid <= ask, got bid={self.bid}, ask={self.ask}")
        if not self.expiry > self.quote_date:
            raise ValidationError(f"expiry {self.expiry} not after quote date {self.quote_date}")
        if not self.underlying > 0:
            raise ValidationError(f"underlying must be > 0, got {self.underlying}")
        if not self.strike > 0:
            raise ValidationError(f"strike must be > 0, got {self.strike}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def maturity(self) -> float:
        return (self.expiry - self.quote_date).days / DAYS_PER_YEAR

    @property
    def moneyness(self) -> str:
        m = self.strike / self.underlying
        if abs(m - 1.0) <= ATM_BAND:
            return "ATM"
        return "ITM" if m < 1.0 else "OTM"


@dataclass(frozen=True)
class QuoteBook:
    """Validated quotes plus the number of rows dropped for having no trades."""

    rows: tuple
    dropped: int = 0

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]


def load_quotes(path) -> QuoteBook:
    """Read ``quote_date,expiry,strike,bid,ask,underlying``; rows with bid = ask = 0 are dropped."""
    rows, dropped = [], 0
    for lineno, cells in _read_rows(path, QUOTE_HEADER):
        qd = _parse_date(cells[0], path, lineno)
        ex = _parse_date(cells[1], path, lineno)
        strike, bid, ask, und = (_parse_float(c, path, lineno) for c in cells[2:])
        if bid == 0 and ask == 0:
            dropped += 1
            continue
        try:
            rows.append(QuoteRow(qd, ex, strike, bid, ask, und))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return QuoteBook(tuple(rows), dropped)


@dataclass
class RmseReport:
    """Pricing error summary; ``statistic`` says how errors are aggregated.

    ``root_sse`` is the square root of the summed squared errors, ``rmse`` the
    root of their mean.
    """

    overall: float
    by_expiry: dict
    by_moneyness: dict
    n_options: int
    counts: dict
    statistic: str
    baseline: str
    rows: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "by_expiry": dict(self.by_expiry),
            "by_moneyness": dict(self.by_moneyness),
            "n_options": self.n_options,
            "counts": dict(self.counts),
            "statistic": self.statistic,
            "baseline": self.baseline,
            "excluded": list(self.excluded),
        }


def _aggregate(errors, statistic):
    e = np.asarray(errors, dtype=float)
    if statistic == "root_sse":
        return float(math.sqrt(np.sum(e * e)))
    return float(math.sqrt(np.mean(e * e)))


def historical_volatility(price: SampledPath) -> float:
    """Annualised standard deviation of log-returns."""
    if len(price) < 3:
        raise ValidationError("need at least three prices")
    x = np.diff(np.log(price.values))
    return float(np.std(x, ddof=1) / math.sqrt(price.step))


def evaluate_rmse(
    quotes,
    fitted: FitResult | None,
    params_base: ModelParams,
    baseline: str = "model",
    bs_volatility: float | None = None,
    statistic: str = "root_sse",
    include_initial_window: bool = True,
    nodes: int = 256,
) -> RmseReport:
    """Compare model (or Black-Scholes) call prices with quote mid-prices.

    Prices use a zero rate and are divided by the underlying to match the
    quote units.  ``fitted`` supplies the four estimates and the delay;
    ``params_base`` supplies ``phi0`` (and everything when ``fitted`` is None).
    Rows whose price cannot be computed are excluded and listed.
    """
    if statistic not in ("root_sse", "rmse"):
        raise ValidationError(f"statistic must be 'root_sse' or 'rmse', got {statistic!r}")
    if baseline not in ("model", "black_scholes"):
        raise ValidationError(f"baseline must be 'model' or 'black_scholes', got {baseline!r}")
    if baseline == "black_scholes" and not (bs_volatility and bs_volatility > 0):
        raise ValidationError("the Black-Scholes baseline needs a positive volatility")
    params = params_base
    if fitted is not None:
        params = ModelParams(
            fitted.mu_P,
            fitted.sigma_P,
            fitted.mu_S,
            fitted.sigma_S,
            tau=fitted.tau_hat,
            phi0=params_base.phi0,
            L=max(params_base.L, fitted.tau_hat),
        )

    rows, excluded = [], []
    for q in quotes:
        spec = OptionSpec("call", q.strike, q.maturity, rate=0.0)
        try:
            if baseline == "model":
                price = price_quadrature(params, q.underlying, spec, include_initial_window, nodes).price
            else:
                price = float(bs_kernel(0.0, q.underlying, q.maturity, spec, bs_volatility))
        except SentipriceError as exc:
            excluded.append({"strike": q.strike, "expiry": q.expiry.isoformat(), "error": str(exc)})
            continue
        fraction = price / q.underlying
        rows.append(
            {
                "quote_date": q.quote_date.isoformat(),
                "expiry": q.expiry.isoformat(),
                "strike": q.strike,
                "moneyness": q.moneyness,
                "mid": q.mid,
                "price": fraction,
                "error": fraction - q.mid,
            }
        )
    if not rows:
        raise ValidationError("no quote could be priced")
    # fixed order so the report does not depend on quote order
    rows.sort(key=lambda r: (r["expiry"], r["strike"], r["quote_date"]))

    def grouped(key):
        groups: dict = {}
        for r in rows:
            groups.setdefault(r[key], []).append(r["error"])
        return {k: _aggregate(v, statistic) for k, v in sorted(groups.items())}, {
            k: len(v) for k, v in sorted(groups.items())
        }

    by_expiry, _ = grouped("expiry")
    by_moneyness, counts = grouped("moneyness")
    return RmseReport(
        overall=_aggregate([r["error"] for r in rows], statistic),
        by_expiry=by_expiry,
        by_moneyness=by_moneyness,
        n_options=len(rows),
        counts=counts,
        statistic=statistic,
        baseline=baseline,
        rows=rows,
        excluded=excluded,
    )
