"""Command line interface.

Exit status is 0 on success, 1 for invalid input or usage, 2 when a numerical
routine cannot proceed.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
import urllib.request
from datetime import date
from pathlib import Path

import numpy as np

from .dataio import (
    DAYS_PER_YEAR,
    evaluate_rmse,
    historical_volatility,
    load_quotes,
    load_series,
    read_dated_series,
    write_series,
)
from .diagnostics import adf_test, ks_lognormal_test
from .errors import DataFormatError, NumericalError, ValidationError
from .likelihood import FitResult, fit_qml, fit_two_step, profile_lag, profile_tau
from .model import ModelParams
from .pricing import OptionSpec, price_mc, price_quadrature, table_preset_report
from .simulate import SampledPath, aligned_step, build_return_sample, ingest_preaggregated, simulate_paths

PARAM_KEYS = ("mu_P", "sigma_P", "mu_S", "sigma_S", "tau", "tau_days", "phi0", "L")
SETTING_KEYS = (
    "s0", "rate", "seed", "nodes", "paths", "step", "step_days",
    "horizon", "include_initial_window", "year_days",
)
CONFIG_KEYS = PARAM_KEYS + SETTING_KEYS
TABLES = ("table3", "table4", "table5", "table6")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    out = {}
    for key, value in cp["config"].items():
        if key not in CONFIG_KEYS:
            raise ValidationError(f"{path}: unknown key {key!r}; allowed: {', '.join(CONFIG_KEYS)}")
        out[key] = value
    return out


def _settings(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _get(cfg, key, cast=float, default=None):
    value = cfg.get(key, default)
    if value is None:
        return None
    try:
        return cast(value)
    except (TypeError, ValueError, argparse.ArgumentTypeError):
        raise ValidationError(f"bad value for {key}: {value!r}") from None


def _params(cfg) -> ModelParams:
    missing = [k for k in ("mu_P", "sigma_P", "mu_S", "sigma_S") if k not in cfg]
    if missing:
        raise ValidationError(f"missing model parameters: {', '.join(missing)}")
    tau = _get(cfg, "tau", default=0.0)
    if "tau_days" in cfg:
        tau = _get(cfg, "tau_days") / DAYS_PER_YEAR
    return ModelParams(
        mu_P=_get(cfg, "mu_P"),
        sigma_P=_get(cfg, "sigma_P"),
        mu_S=_get(cfg, "mu_S"),
        sigma_S=_get(cfg, "sigma_S"),
        tau=tau,
        phi0=_get(cfg, "phi0", default=1.0),
        L=_get(cfg, "L"),
    )


def _step(cfg, default_days=1.0) -> float:
    if "step" in cfg:
        return _get(cfg, "step")
    return _get(cfg, "step_days", default=default_days) / DAYS_PER_YEAR


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, date):
        return o.isoformat()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _write_csv(rows, out):
    if out:
        with Path(out).open("w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)


# --- subcommands ----------------------------------------------------------------

def cmd_simulate(args, cfg):
    params = _params(cfg)
    step = _step(cfg)
    horizon = _get(cfg, "horizon", default=1.0)
    n = _get(cfg, "paths", int, default=1)
    seed = _get(cfg, "seed", int, default=0)
    bundle = simulate_paths(
        params, _get(cfg, "s0", default=100.0), horizon, step, n, seed,
        measure=args.measure, rate=_get(cfg, "rate", default=0.0),
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    origin = date.fromisoformat(args.origin)
    for i in range(bundle.n_paths):
        sentiment, price = bundle.path(i)
        write_series(out / f"sentiment_{i}.csv", sentiment, origin)
        write_series(out / f"price_{i}.csv", price, origin)
    print(f"wrote {bundle.n_paths} path pairs to {out}")


def cmd_fit(args, cfg):
    delta_days = args.delta_days
    if args.preaggregated:
        # cumulative sentiment A_j is dated at the end of the period of return j
        price_dates, r_prices = read_dated_series(args.price)
        sent_dates, a = read_dated_series(args.sentiment)
        if sent_dates != price_dates:
            raise ValidationError("pre-aggregated sentiment must share the price dates")
        returns = np.diff(np.log(r_prices))
        a = a[1:]
        delta_big = delta_days / DAYS_PER_YEAR
        if args.lags:
            lags = _int_grid(args.lags)
            result = profile_lag(returns, a, delta_big, lags, alpha=args.alpha)
        else:
            sample = ingest_preaggregated(returns, a, delta_big, args.lag)
            result = fit_qml(sample, seed=_get(cfg, "seed", int, default=0))
        _emit_json(result.to_dict(), args.out)
        return

    dates, _ = read_dated_series(args.price)
    price = load_series(args.price)
    sentiment = load_series(args.sentiment, origin=dates[0])
    delta_big = delta_days / DAYS_PER_YEAR
    fine = _fine_part(sentiment)
    method = args.method.replace("-", "_")
    if args.tau_grid:
        taus = [d / DAYS_PER_YEAR for d in _int_grid(args.tau_grid)]
        result = profile_tau(price, sentiment, delta_big, taus, alpha=args.alpha, method=method, fine_sentiment=fine)
    else:
        if "tau_days" in cfg:
            tau = _get(cfg, "tau_days") / DAYS_PER_YEAR
        else:
            tau = _get(cfg, "tau", default=0.0)
        sample = build_return_sample(price, sentiment, delta_big, tau)
        if method == "qml":
            result = fit_qml(sample, seed=_get(cfg, "seed", int, default=0))
        else:
            result = fit_two_step(fine, sample)
    _emit_json(result.to_dict(), args.out)


def _fine_part(sentiment):
    """Sentiment from time 0 on, for moment estimates."""
    k = max(0, int(round(-sentiment.start_time / sentiment.step)))
    return SampledPath(sentiment.step, sentiment.start_time + k * sentiment.step, sentiment.values[k:])


def _int_grid(text: str) -> list[int]:
    """``"0:10"`` (inclusive range) or ``"0,2,5"``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"bad grid {text!r}; use 'a:b' or 'a,b,c'") from None


def cmd_price(args, cfg):
    params = _params(cfg)
    s0 = _get(cfg, "s0", default=100.0)
    maturity = args.maturity if args.maturity is not None else args.maturity_days / DAYS_PER_YEAR
    spec = OptionSpec(args.kind, args.strike, maturity, rate=_get(cfg, "rate", default=0.0), cash=args.cash)
    if args.method == "quadrature":
        include = _get(cfg, "include_initial_window", _bool, default=True)
        res = price_quadrature(params, s0, spec, include, _get(cfg, "nodes", int, default=256))
    else:
        step = aligned_step(_step(cfg, default_days=0.5), maturity, params.tau)
        res = price_mc(params, s0, spec, _get(cfg, "paths", int, default=100_000), step, _get(cfg, "seed", int, default=0))
    _emit_json({"price": res.price, "method": res.method, "stderr": res.stderr, "diagnostics": res.diagnostics}, args.out)


def cmd_tables(args, cfg):
    include = _get(cfg, "include_initial_window", _bool, default=False)
    names = TABLES if args.preset == "all" else (args.preset,)
    rows = []
    for name in names:
        table = table_preset_report(
            name, include, _get(cfg, "nodes", int, default=256), _get(cfg, "year_days", default=252.0)
        )
        csv_rows = table.to_csv_rows()
        rows.append(["table", "kind"] + csv_rows[0])
        rows += [[name, table.kind] + [f"{v:.6g}" if isinstance(v, float) else v for v in r] for r in csv_rows[1:]]
    _write_csv(rows, args.out)


def cmd_proxy_test(args, cfg):
    _, values = read_dated_series(args.series)
    log_returns = np.diff(np.log(values))
    report = {
        "series": str(args.series),
        "adf_log_returns": adf_test(log_returns, args.lag_order).to_dict(),
        "ks_lognormal": ks_lognormal_test(values).to_dict(),
    }
    _emit_json(report, args.out)


def cmd_evaluate(args, cfg):
    quotes = load_quotes(args.quotes)
    fitted = FitResult.from_dict(json.loads(Path(args.fit).read_text())) if args.fit else None
    if fitted is not None:
        base = ModelParams(fitted.mu_P, fitted.sigma_P, fitted.mu_S, fitted.sigma_S, tau=fitted.tau_hat,
                           phi0=_get(cfg, "phi0", default=1.0))
    else:
        base = _params(cfg)
    vol = args.bs_vol
    if args.baseline == "black_scholes" and vol is None:
        if not args.price:
            raise ValidationError("the Black-Scholes baseline needs --bs-vol or --price")
        vol = historical_volatility(load_series(args.price))
    report = evaluate_rmse(
        quotes, fitted, base, baseline=args.baseline, bs_volatility=vol, statistic=args.statistic,
        include_initial_window=_get(cfg, "include_initial_window", _bool, default=True),
        nodes=_get(cfg, "nodes", int, default=256),
    )
    payload = report.to_dict()
    payload["dropped_quotes"] = quotes.dropped
    _emit_json(payload, args.out_json)
    if args.out_csv:
        keys = ["quote_date", "expiry", "strike", "moneyness", "mid", "price", "error"]
        _write_csv([keys] + [[r[k] for k in keys] for r in report.rows], args.out_csv)


def cmd_fetch(args, cfg):
    try:
        with urllib.request.urlopen(args.url, timeout=args.timeout) as resp:
            data = resp.read()
    except (OSError, ValueError) as exc:
        raise ValidationError(f"could not fetch {args.url}: {exc}") from None
    out = Path(args.out)
    out.write_bytes(data)
    # validate by parsing it back
    try:
        head = data.decode("utf-8").splitlines()[0].strip()
    except (UnicodeDecodeError, IndexError):
        raise DataFormatError(f"{args.url}: not a text CSV") from None
    if head.replace(" ", "") == "date,value":
        read_dated_series(out, positive=False)
    elif head.replace(" ", "").startswith("quote_date"):
        load_quotes(out)
    else:
        raise DataFormatError(f"{args.url}: unrecognised header {head!r}")
    print(f"saved {len(data)} bytes to {out}")


# --- parser ------------------------------------------------------------------------

def _model_args(p):
    g = p.add_argument_group("model parameters (override --config)")
    g.add_argument("--mu-P", dest="mu_P", type=float)
    g.add_argument("--sigma-P", dest="sigma_P", type=float)
    g.add_argument("--mu-S", dest="mu_S", type=float)
    g.add_argument("--sigma-S", dest="sigma_S", type=float)
    g.add_argument("--tau", type=float, help="delay in years")
    g.add_argument("--tau-days", dest="tau_days", type=float, help="delay in days (365-day year)")
    g.add_argument("--phi0", type=float, help="constant sentiment history level")
    g.add_argument("--L", type=float, help="history window length in years")
    g.add_argument("--s0", type=float, help="initial price")
    g.add_argument("--rate", type=float, help="risk-free rate")


def _global_args(p, default):
    p.add_argument("--config", default=default, help="flat key=value file with model parameters and settings")
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--nodes", type=int, default=default, help="quadrature nodes")
    p.add_argument("--paths", type=int, default=default, help="Monte Carlo paths")
    p.add_argument("--include-initial-window", dest="include_initial_window", type=_bool, default=default,
                   metavar="BOOL", help="add the known delay window to the integrated information")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sentiprice", description="Sentiment-driven price model toolkit.")
    _global_args(parser, None)
    # the same flags after the subcommand; SUPPRESS keeps them from resetting earlier values
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate paths and write date,value CSVs")
    _model_args(p)
    p.add_argument("--horizon", type=float, help="years")
    p.add_argument("--step-days", dest="step_days", type=float, help="1 (daily) or 7 (weekly)")
    p.add_argument("--measure", choices=("physical", "risk_neutral"), default="physical")
    p.add_argument("--origin", default="2000-01-01", help="calendar date of time 0")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="estimate parameters from price and sentiment CSVs")
    _model_args(p)
    p.add_argument("--price", required=True)
    p.add_argument("--sentiment", required=True)
    p.add_argument("--method", choices=("qml", "two-step"), default="qml")
    p.add_argument("--delta-days", type=float, default=7.0, help="return observation step in days")
    p.add_argument("--tau-grid", help="delays in days for the profile, 'a:b' or 'a,b,c'")
    p.add_argument("--preaggregated", action="store_true",
                   help="sentiment file holds cumulative sentiment at the return dates")
    p.add_argument("--lag", type=int, default=0, help="sentiment lag in observation periods")
    p.add_argument("--lags", help="lag grid for the profile, 'a:b' or 'a,b,c'")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("price", parents=[common], help="price one option")
    _model_args(p)
    p.add_argument("--kind", choices=("call", "put", "binary_cash_call"), default="call")
    p.add_argument("--strike", type=float, required=True)
    m = p.add_mutually_exclusive_group(required=True)
    m.add_argument("--maturity", type=float, help="years")
    m.add_argument("--maturity-days", type=float)
    p.add_argument("--cash", type=float, default=1.0, help="binary payout")
    p.add_argument("--method", choices=("quadrature", "mc"), default="quadrature")
    p.add_argument("--step-days", dest="step_days", type=float, help="Monte Carlo step in days")
    p.add_argument("--out")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("tables", parents=[common], help="reproduce the published price tables as CSV")
    p.add_argument("--preset", choices=TABLES + ("all",), default="all")
    p.add_argument("--year-days", dest="year_days", type=float, help="day count (default 252)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("proxy-test", parents=[common], help="ADF and KS checks of a sentiment series")
    p.add_argument("--series", required=True)
    p.add_argument("--lag-order", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_proxy_test)

    p = sub.add_parser("evaluate", parents=[common], help="score model prices against option quotes")
    _model_args(p)
    p.add_argument("--quotes", required=True)
    p.add_argument("--fit", help="FitResult JSON from 'fit'")
    p.add_argument("--baseline", choices=("model", "black_scholes"), default="model")
    p.add_argument("--bs-vol", type=float, help="Black-Scholes volatility")
    p.add_argument("--price", help="price CSV to estimate the Black-Scholes volatility from")
    p.add_argument("--statistic", choices=("root_sse", "rmse"), default="root_sse")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fetch", parents=[common], help="download a CSV from a URL and validate it")
    p.add_argument("--url", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _settings(args)
        args.func(args, cfg)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
