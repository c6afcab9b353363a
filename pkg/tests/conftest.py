import numpy as np
import pytest

from qarrival import ModelParams, gaussian_packet, make_grid, step_indicator


@pytest.fixture
def ref_grid():
    return make_grid(-50.0, 50.0, 512)


@pytest.fixture
def ref_params():
    return ModelParams(gamma=1.0, tau=10.0, dt=1e-3)


@pytest.fixture
def ref_packet(ref_grid):
    return gaussian_packet(ref_grid, x0=10.0, p0=-2.0, sigma=1.0)


@pytest.fixture
def ref_step(ref_grid):
    return step_indicator(ref_grid)


def analytic_free_gaussian(x, t, x0, p0, sigma, mass=1.0, hbar=1.0):
    """Closed-form free evolution of exp(-(x-x0)^2/(4 sigma^2) + i p0 x / hbar).

    Evaluated by completing the square in the free-kernel convolution;
    normalized to unit L2 norm.  Independent of any propagation code.
    """
    x = np.asarray(x, dtype=float)
    norm = (2.0 * np.pi * sigma ** 2) ** -0.25
    if t == 0:
        return norm * np.exp(-((x - x0) ** 2) / (4.0 * sigma ** 2) + 1j * p0 * x / hbar)
    a = 1.0 / (4.0 * sigma ** 2)
    alpha = 1j * mass / (2.0 * hbar * t) - a
    beta = -1j * mass * x / (hbar * t) + 2.0 * a * x0 + 1j * p0 / hbar
    c = 1j * mass * x ** 2 / (2.0 * hbar * t) - a * x0 ** 2
    pref = np.sqrt(mass / (2.0 * np.pi * hbar * t)) * np.exp(-1j * np.pi / 4.0)
    return norm * pref * np.sqrt(-np.pi / alpha) * np.exp(-(beta ** 2) / (4.0 * alpha) + c)
