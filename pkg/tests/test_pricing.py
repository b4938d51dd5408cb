import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from sentiprice import DomainError, ModelParams, ValidationError
from sentiprice.pricing import (
    OptionSpec,
    bs_kernel,
    price_mc,
    price_mc_many,
    price_quadrature,
    table_preset_report,
    table_report,
)

BASE = ModelParams(0.03, 0.35, 0.0, 0.04, tau=5 / 252, phi0=100.0)


def textbook_call(s, k, r, T, vol):
    d1 = (math.log(s / k) + (r + vol**2 / 2) * T) / (vol * math.sqrt(T))
    d2 = d1 - vol * math.sqrt(T)
    return s * norm.cdf(d1) - k * math.exp(-r * T) * norm.cdf(d2)


def test_kernel_matches_textbook_formula():
    T, r, sig, x = 0.5, 0.03, 0.2, 2.0
    spec = OptionSpec("call", 95.0, T, rate=r)
    vol = sig * math.sqrt(x / T)
    assert bs_kernel(0.0, 100.0, x, spec, sig) == pytest.approx(textbook_call(100.0, 95.0, r, T, vol), abs=1e-10)


def test_kernel_binary_matches_textbook():
    T, r, sig, x = 0.25, 0.01, 0.3, 1.0
    spec = OptionSpec("binary_cash_call", 100.0, T, rate=r, cash=7.0)
    vol = sig * math.sqrt(x)
    d2 = (math.log(1.0) + r * T - vol**2 / 2) / vol
    assert bs_kernel(0.0, 100.0, x, spec, sig) == pytest.approx(7.0 * math.exp(-r * T) * norm.cdf(d2), abs=1e-12)


@given(
    s=st.floats(10, 1000),
    k=st.floats(10, 1000),
    x=st.floats(1e-3, 50),
    r=st.floats(-0.02, 0.1),
)
@settings(max_examples=200, deadline=None)
def test_kernel_put_call_parity(s, k, x, r):
    T = 0.5
    call = bs_kernel(0.0, s, x, OptionSpec("call", k, T, rate=r), 0.1)
    put = bs_kernel(0.0, s, x, OptionSpec("put", k, T, rate=r), 0.1)
    assert call - put == pytest.approx(s - k * math.exp(-r * T), abs=1e-10 * max(s, k))


def test_kernel_zero_information_limit():
    spec = OptionSpec("call", 90.0, 0.5, rate=0.02)
    intrinsic = 100.0 - 90.0 * math.exp(-0.01)
    assert bs_kernel(0.0, 100.0, 1e-14, spec, 0.2) == pytest.approx(intrinsic, abs=1e-9)
    with pytest.raises(DomainError):
        bs_kernel(0.0, 100.0, 0.0, spec, 0.2)


def test_zero_strike_call_is_spot():
    res = price_quadrature(BASE, 450.0, OptionSpec("call", 0.0, 0.25, rate=0.01))
    assert res.price == 450.0


def test_quadrature_put_call_parity():
    T, r = 0.25, 0.01
    for k in (400.0, 450.0, 500.0):
        c = price_quadrature(BASE, 450.0, OptionSpec("call", k, T, rate=r)).price
        p = price_quadrature(BASE, 450.0, OptionSpec("put", k, T, rate=r)).price
        assert c - p == pytest.approx(450.0 - k * math.exp(-r * T), abs=1e-10)


def test_monotone_in_strike():
    calls = [price_quadrature(BASE, 450.0, OptionSpec("call", k, 0.25, 0.01)).price for k in np.linspace(300, 600, 13)]
    binaries = [
        price_quadrature(BASE, 450.0, OptionSpec("binary_cash_call", k, 0.25, 0.01)).price
        for k in np.linspace(300, 600, 13)
    ]
    assert np.all(np.diff(calls) < 0)
    assert np.all(np.diff(binaries) < 0)


def test_monotone_in_history_level_and_maturity():
    by_p0 = [
        price_quadrature(BASE.replace(phi0=p0), 450.0, OptionSpec("call", 450.0, 0.25, 0.01)).price
        for p0 in (1.0, 10.0, 100.0, 1000.0)
    ]
    by_T = [
        price_quadrature(BASE, 450.0, OptionSpec("call", 450.0, T, 0.01)).price for T in (0.05, 0.1, 0.25, 0.5, 1.0)
    ]
    assert np.all(np.diff(by_p0) > 0)
    assert np.all(np.diff(by_T) > 0)


@pytest.mark.parametrize("include", [False, True])
def test_node_convergence_on_table3(include):
    a = table_preset_report("table3", include, nodes=256).prices
    b = table_preset_report("table3", include, nodes=512).prices
    assert np.max(np.abs(a - b) / b) < 1e-6


def test_point_mass_limit():
    spec = OptionSpec("call", 440.0, 0.25, 0.01)
    exact = price_quadrature(BASE.replace(sigma_P=0.0), 450.0, spec)
    assert exact.diagnostics["nodes"] == 0
    near = price_quadrature(BASE.replace(sigma_P=1e-7), 450.0, spec)
    assert near.price == pytest.approx(exact.price, abs=1e-8)


def test_maturity_inside_delay_is_deterministic():
    p = BASE.replace(tau=0.5)
    spec = OptionSpec("call", 450.0, 0.25, 0.01)
    res = price_quadrature(p, 450.0, spec)
    vol = p.sigma_S * math.sqrt(p.phi0 * 0.25 / 0.25)
    assert res.price == pytest.approx(textbook_call(450.0, 450.0, 0.01, 0.25, vol), abs=1e-10)


def test_initial_window_raises_call_price():
    spec = OptionSpec("call", 450.0, 0.25, 0.01)
    on = price_quadrature(BASE, 450.0, spec, include_initial_window=True).price
    off = price_quadrature(BASE, 450.0, spec, include_initial_window=False).price
    assert on > off


def test_time_dependent_rate_discount():
    spec = OptionSpec("call", 0.0, 1.0, rate=lambda t: 0.02 + 0.02 * t)
    assert spec.discount() == pytest.approx(math.exp(-0.03), rel=1e-12)
    b = OptionSpec("binary_cash_call", 0.0, 1.0, rate=lambda t: 0.02 + 0.02 * t)
    assert price_quadrature(BASE, 450.0, b).price == pytest.approx(math.exp(-0.03), rel=1e-12)


def test_mc_deterministic_payoff_without_price_noise():
    p = ModelParams(0.5, 0.8, 0.1, 0.0, tau=0.0, phi0=1.0)
    spec = OptionSpec("call", 90.0, 0.25, rate=0.03)
    res = price_mc(p, 100.0, spec, 2000, 1 / 364, seed=0)
    # forward is exactly S0 e^{rT} on every path
    assert res.price == pytest.approx(100.0 - 90.0 * math.exp(-0.03 * 0.25), rel=1e-12)
    assert res.stderr < 1e-10


def test_binary_bounded_by_discounted_cash():
    for p0 in (1.0, 100.0, 1000.0):
        spec = OptionSpec("binary_cash_call", 1.0, 0.25, 0.05, cash=3.0)
        res = price_quadrature(BASE.replace(phi0=p0), 450.0, spec)
        assert 0 <= res.price <= 3.0 * math.exp(-0.05 * 0.25)


def test_mc_agrees_with_quadrature_small():
    p = ModelParams(0.03, 0.35, 0.0, 0.04, tau=5 / 252, phi0=10.0)
    step = 1 / 756
    specs = [OptionSpec("call", k, 63 / 252, 0.01) for k in (425.0, 450.0, 475.0)]
    mc = price_mc_many(p, 450.0, specs, 20000, step, seed=7)
    for spec, m in zip(specs, mc):
        q = price_quadrature(p, 450.0, spec).price
        assert abs(m.price - q) < max(4 * m.stderr, 0.01 * q)


def test_mc_many_requires_common_maturity():
    specs = [OptionSpec("call", 1.0, 0.25), OptionSpec("call", 1.0, 0.5)]
    with pytest.raises(ValidationError):
        price_mc_many(BASE, 450.0, specs, 10, 1 / 365, 0)


def test_single_cell_table_equals_direct_price():
    t = table_report(BASE, 450.0, [450.0], [0.25], [5 / 252], [100.0], rate=0.01)
    direct = price_quadrature(BASE, 450.0, OptionSpec("call", 450.0, 0.25, 0.01)).price
    assert t.prices.shape == (1, 1)
    assert t.prices[0, 0] == direct


def test_table_preset_shape_and_header():
    t = table_preset_report("table4")
    rows = t.to_csv_rows()
    assert rows[0] == ["maturity", "tau", "p0", "K=400", "K=425", "K=450", "K=475", "K=500"]
    assert t.prices.shape == (4, 5)


def test_invalid_contracts():
    with pytest.raises(ValidationError):
        OptionSpec("digital", 1.0, 1.0)
    with pytest.raises(ValidationError):
        OptionSpec("call", 1.0, 0.0)
    with pytest.raises(ValidationError):
        OptionSpec("call", -1.0, 1.0)
