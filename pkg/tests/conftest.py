import numpy as np
import pytest

from climgame.climate_econ import ClimateParams, EconParams, phi_constant
from climgame.itm_core import TimeGrid


@pytest.fixture(scope="session")
def econ():
    return EconParams()


@pytest.fixture(scope="session")
def climate():
    return ClimateParams()


@pytest.fixture(scope="session")
def quant_climate():
    # stock units where half a century of flows stays small relative to
    # the baseline; used for temperature-path comparisons
    return ClimateParams(S_bar=1e6, P0=1e6, T0=0.0)


@pytest.fixture(scope="session")
def grid():
    return TimeGrid(0.0, 50.0, 512)


@pytest.fixture(scope="session")
def coarse_grid():
    return TimeGrid(0.0, 50.0, 128)


@pytest.fixture(scope="session")
def phi_c(econ, climate):
    return phi_constant(econ.rho, climate)


def rel_gap(a, b):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return float(np.max(np.abs(a - b) / np.maximum.reduce(
        [np.ones_like(a), np.abs(a), np.abs(b)])))


@pytest.fixture(scope="session")
def table1_box_sampler():
    """Draws Hyp-valid parameter sets within +-50% of the benchmark."""

    def draw(rng: np.random.Generator, sigma: float = 1.0) -> EconParams:
        from climgame.climate_econ import TechCurve
        while True:
            a_bar = rng.uniform(5.0, 15.0)
            eta_k = rng.uniform(0.5, 1.5)
            eta_b = rng.uniform(0.5, 1.5)
            th1 = rng.uniform(0.25, 0.75)
            th2 = rng.uniform(0.25, 0.75)
            g0 = rng.uniform(0.1, 0.3)
            g_inf = rng.uniform(0.25, 0.75)
            h0 = rng.uniform(0.25, 0.75)
            h_inf = rng.uniform(0.45, 0.99)
            ga1 = rng.uniform(0.00625, 0.01875)
            ga2 = rng.uniform(0.00625, 0.01875)
            rho = rng.uniform(0.5 * 0.40821994520255167, 1.5 * 0.40821994520255167)
            if g_inf <= g0 or h_inf <= h0:
                continue
            if a_bar * h0 <= 1.0:
                continue
            # concavity of g^(1/(1-theta2)) for the rational curve
            if th2 / (1.0 - th2) * (g_inf - g0) > 2.0 * g0:
                continue
            try:
                return EconParams(A_bar=a_bar, sigma1=sigma, sigma2=sigma,
                                  gamma1=ga1, gamma2=ga2, rho1=rho,
                                  eta_K=eta_k, eta_B=eta_b, theta1=th1,
                                  theta2=th2, g_fn=TechCurve(g0, g_inf),
                                  h_fn=TechCurve(h0, h_inf))
            except ValueError:
                continue

    return draw
