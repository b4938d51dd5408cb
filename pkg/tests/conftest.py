import numpy as np
import pytest

from sentiprice import ModelParams


def mc_integrated_gbm(p0, mu, sigma, start, end, n_paths, n_steps, seed, block=100_000):
    """Samples of int_start^end P_u du for a GBM with P_0 = p0 (trapezoid, exact GBM nodes)."""
    rng = np.random.default_rng(seed)
    out = []
    h = (end - start) / n_steps
    for b in range(0, n_paths, block):
        n = min(block, n_paths - b)
        log_p = np.full(n, np.log(p0))
        if start > 0:
            log_p += (mu - 0.5 * sigma**2) * start + sigma * np.sqrt(start) * rng.standard_normal(n)
        inc = (mu - 0.5 * sigma**2) * h + sigma * np.sqrt(h) * rng.standard_normal((n, n_steps))
        path = np.exp(log_p[:, None] + np.concatenate([np.zeros((n, 1)), np.cumsum(inc, axis=1)], axis=1))
        out.append(h * (path.sum(axis=1) - 0.5 * (path[:, 0] + path[:, -1])))
    return np.concatenate(out)


@pytest.fixture
def table3_params():
    # table3 preset market: mu_P = 0.03, sigma_P = 0.35, sigma_S = 0.04, P0 = 100, one-week delay
    return ModelParams(mu_P=0.03, sigma_P=0.35, mu_S=0.0, sigma_S=0.04, tau=5 / 365, phi0=100.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
