import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sentiprice import (
    DegenerateDenominatorError,
    DomainError,
    InvalidMomentsError,
    LevyLogNormal,
    ModelParams,
    ValidationError,
    integrated_info_moments,
    ip_moments,
    levy_params,
    log_price_moments,
    simulate_paths,
    x_tau_deterministic,
)
from sentiprice.model import integrated_gbm_moments
from sentiprice.simulate import aligned_step

from conftest import mc_integrated_gbm


def test_params_validation():
    with pytest.raises(ValidationError):
        ModelParams(0.0, 0.3, 0.1, 0.2)
    with pytest.raises(ValidationError):
        ModelParams(0.1, -0.3, 0.1, 0.2)
    with pytest.raises(ValidationError):
        ModelParams(0.1, 0.3, 0.1, 0.2, tau=0.1, L=0.05)
    with pytest.raises(ValidationError):
        ModelParams(0.1, 0.3, 0.1, 0.2, phi0=0.0)
    with pytest.raises(ValidationError):
        ModelParams(0.1, 0.3, float("nan"), 0.2)
    p = ModelParams(0.1, 0.3, 0.1, 0.2, tau=0.1)
    assert p.L == 0.1
    assert p.replace(tau=0.2).L == 0.2


def test_ip_moments_noise_free_limit():
    p = ModelParams(mu_P=1.0, sigma_P=1e-9, mu_S=0.0, sigma_S=0.1, phi0=1.0)
    m1, m2 = ip_moments(p, 1.0)
    assert m1 == pytest.approx(math.e - 1, rel=1e-14)
    assert m2 == pytest.approx(m1 * m1, rel=1e-12)


def test_ip_moments_frozen_values():
    # closed form evaluated once at the table3 preset market, s = 0.25 - 5/365
    p = ModelParams(mu_P=0.03, sigma_P=0.35, mu_S=0.0, sigma_S=0.04, phi0=100.0)
    s = 0.25 - 5 / 365
    m1, m2 = ip_moments(p, s)
    g = math.expm1(0.03 * s) / 0.03
    b = 2 * 0.03 + 0.35**2
    assert m1 == pytest.approx(100 * g, rel=1e-15)
    assert m2 == pytest.approx(2e4 / (0.03 + 0.35**2) * (math.expm1(b * s) / b - g), rel=1e-15)
    # frozen from the first evaluation
    assert m1 == pytest.approx(23.71409276379825, rel=1e-12)
    assert m2 == pytest.approx(567.8336040542533, rel=1e-12)


def test_ip_moments_match_monte_carlo():
    p = ModelParams(mu_P=0.03, sigma_P=0.35, mu_S=0.0, sigma_S=0.04, phi0=100.0)
    s = 0.25 - 5 / 365
    m1, m2 = ip_moments(p, s)
    x = mc_integrated_gbm(100.0, 0.03, 0.35, 0.0, s, 1_000_000, 64, seed=11)
    se1 = x.std() / math.sqrt(x.size)
    se2 = (x * x).std() / math.sqrt(x.size)
    # 3 MC standard errors
    assert abs(x.mean() - m1) < 3 * se1
    assert abs((x * x).mean() - m2) < 3 * se2


def test_ip_second_moment_small_span_no_cancellation():
    # sigma = 0: IP(s) is deterministic so m2 = m1^2 up to rounding, even for tiny s
    for s in (1e-6, 1e-3, 0.01):
        m1, m2 = integrated_gbm_moments(1.0, 0.0625, 0.0, s)
        assert m2 == pytest.approx(m1 * m1, rel=1e-14)


@given(
    phi0=st.floats(0.1, 1e3),
    mu=st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 1e-3),
    sigma=st.floats(0.0, 2.0),
    s=st.floats(1e-3, 3.0),
)
@settings(max_examples=200, deadline=None)
def test_ip_moments_scale_with_start(phi0, mu, sigma, s):
    if min(abs(mu + sigma**2), abs(2 * mu + sigma**2)) < 1e-3:
        return
    base = ModelParams(mu, sigma, 0.0, 0.1, phi0=1.0)
    a1, a2 = ip_moments(base, s)
    b1, b2 = ip_moments(base.replace(phi0=phi0), s)
    assert b1 == pytest.approx(phi0 * a1, rel=1e-12)
    assert b2 == pytest.approx(phi0 * phi0 * a2, rel=1e-12)
    assert a2 >= a1 * a1 * (1 - 1e-12)


def test_ip_moments_doubling_start():
    p = ModelParams(0.2, 0.4, 0.0, 0.1, phi0=1.0)
    a = ip_moments(p, 0.7)
    b = ip_moments(p.replace(phi0=2.0), 0.7)
    assert b[0] == 2 * a[0]
    assert b[1] == 4 * a[1]


def test_degenerate_denominators():
    with pytest.raises(DegenerateDenominatorError):
        integrated_gbm_moments(1.0, -0.08, 0.4, 1.0)  # 2 mu + sigma^2 = 0
    with pytest.raises(DegenerateDenominatorError):
        integrated_gbm_moments(1.0, -0.25, 0.5, 1.0)  # mu + sigma^2 = 0
    with pytest.raises(DegenerateDenominatorError):
        integrated_gbm_moments(1.0, 1e-12, 0.5, 1.0)


def test_x_tau_deterministic():
    assert x_tau_deterministic(ModelParams(0.1, 0.2, 0, 0.1, tau=5 / 365, phi0=100)) == pytest.approx(1.369863, abs=1e-6)
    assert x_tau_deterministic(ModelParams(0.1, 0.2, 0, 0.1, tau=0.0, phi0=100)) == 0.0
    assert x_tau_deterministic(ModelParams(0.1, 0.2, 0, 0.1, tau=0.1, phi0=10)) == pytest.approx(1.0, rel=1e-15)


def test_info_moments_deterministic_branches(table3_params):
    p = table3_params
    m = integrated_info_moments(p, p.tau / 2)
    assert m.mean == pytest.approx(p.phi0 * p.tau / 2)
    assert m.variance == 0.0
    w = integrated_info_moments(p, 0.001, p.tau)
    assert w.variance == 0.0
    assert w.mean == pytest.approx(p.phi0 * (p.tau - 0.001))


def test_info_moments_from_zero_compose(table3_params):
    p = table3_params
    m1, m2 = ip_moments(p, 0.25 - p.tau)
    w = integrated_info_moments(p, 0.0, 0.25)
    assert w.mean == pytest.approx(x_tau_deterministic(p) + m1, rel=1e-14)
    assert w.variance == pytest.approx(m2 - m1 * m1, rel=1e-12)
    # E[X_{0,T}] = E[X_T] - X_0 with X_0 = 0
    assert integrated_info_moments(p, 0.25).mean == pytest.approx(w.mean, rel=1e-14)


def test_info_moments_window_after_delay_match_monte_carlo():
    p = ModelParams(mu_P=0.5, sigma_P=0.8, mu_S=0.0, sigma_S=0.1, tau=0.1, phi0=2.0)
    t, T = 0.4, 0.9
    m = integrated_info_moments(p, t, T)
    x = mc_integrated_gbm(2.0, 0.5, 0.8, t - p.tau, T - p.tau, 1_000_000, 64, seed=5)
    se_mean = x.std() / math.sqrt(x.size)
    d = (x - x.mean()) ** 2
    se_var = d.std() / math.sqrt(x.size)
    assert abs(x.mean() - m.mean) < 3 * se_mean
    assert abs(x.var() - m.variance) < 3 * se_var


def test_levy_params_examples():
    law = levy_params(1.0, 1.0)
    assert law.alpha == 0.0 and law.nu2 == 0.0
    law = levy_params(math.exp(0.5), math.exp(2.0))
    assert law.alpha == pytest.approx(0.0, abs=1e-15)
    assert law.nu2 == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(InvalidMomentsError):
        levy_params(0.0, 1.0)
    with pytest.raises(InvalidMomentsError):
        levy_params(2.0, 3.0)


def test_levy_round_trip_table3(table3_params):
    m1, m2 = ip_moments(table3_params, 0.25 - table3_params.tau)
    law = levy_params(m1, m2)
    assert law.moment(1) == pytest.approx(m1, rel=1e-12)
    assert law.moment(2) == pytest.approx(m2, rel=1e-12)


@given(m1=st.floats(1e-6, 1e6), excess=st.floats(0.0, 50.0))
@settings(max_examples=300, deadline=None)
def test_levy_round_trip_property(m1, excess):
    m2 = m1 * m1 * (1.0 + excess)
    law = levy_params(m1, m2)
    assert law.nu2 >= 0
    assert law.moment(1) == pytest.approx(m1, rel=1e-12)
    assert law.moment(2) == pytest.approx(m2, rel=1e-12)


def test_levy_density():
    from scipy import stats

    law = LevyLogNormal(0.3, 0.5)
    x = np.linspace(0.1, 5, 7)
    ref = stats.lognorm(s=math.sqrt(0.5), scale=math.exp(0.3))
    np.testing.assert_allclose(law.pdf(x), ref.pdf(x), rtol=1e-12)
    np.testing.assert_allclose(law.ppf([0.1, 0.5, 0.9]), ref.ppf([0.1, 0.5, 0.9]), rtol=1e-12)
    with pytest.raises(DomainError):
        LevyLogNormal(0.0, 0.0).logpdf(1.0)


def test_log_price_moments_inside_delay(table3_params):
    p = table3_params.replace(mu_S=0.3)
    t = p.tau / 2
    m = log_price_moments(p, 450.0, t)
    c = 0.3 - 0.5 * 0.04**2
    assert m.mean == pytest.approx(math.log(450) + c * p.phi0 * t, rel=1e-15)
    assert m.variance == pytest.approx(0.04**2 * p.phi0 * t, rel=1e-15)


def test_log_price_moments_drift_cancels(table3_params):
    p = table3_params.replace(mu_S=0.5 * 0.04**2)
    for t in (0.01, 0.25, 2.0):
        assert log_price_moments(p, 450.0, t).mean == pytest.approx(math.log(450.0), rel=1e-15)


def test_log_price_moments_match_simulation(table3_params):
    p = table3_params.replace(mu_S=0.2)
    step = aligned_step(1 / 730, 0.25, p.tau)
    b = simulate_paths(p, 450.0, 0.25, step, 200_000, seed=2)
    ls = np.log(b.price[:, -1])
    m = log_price_moments(p, 450.0, 0.25)
    n = ls.size
    se_mean = ls.std() / math.sqrt(n)
    se_var = ((ls - ls.mean()) ** 2).std() / math.sqrt(n)
    # 3 MC standard errors
    assert abs(ls.mean() - m.mean) < 3 * se_mean
    assert abs(ls.var() - m.variance) < 3 * se_var


def test_conditional_lognormality(table3_params):
    from scipy import stats

    p = table3_params.replace(mu_S=0.2)
    step = 1 / 365
    b = simulate_paths(p, 450.0, 91 / 365, step, 10_000, seed=4)
    r = round(p.tau / step)
    h = round(-b.sentiment_start / step)
    n_steps = b.price.shape[1] - 1
    # right-end nodes of every step, the same nodes the simulator used
    x = step * b.sentiment[:, h - r + 1 : h - r + 1 + n_steps].sum(axis=1)
    c = p.mu_S - 0.5 * p.sigma_S**2
    z = (np.log(b.price[:, -1] / 450.0) - c * x) / (p.sigma_S * np.sqrt(x))
    assert stats.kstest(z, "norm").pvalue > 0.01
