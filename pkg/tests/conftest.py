import numpy as np
import pytest
from scipy.optimize import brentq

from rnwave import (Nonlinearity, bump_data, cauchy_grid, cauchy_to_characteristic,
                    evolve, make_background)


@pytest.fixture(scope="session")
def schw():
    return make_background(1.0, 0.0)


@pytest.fixture(scope="session")
def rn():
    return make_background(1.0, 0.6)


def closed_form_tortoise(M, e, r):
    """Independent evaluation of the tortoise map (log|r - r_+| convention)."""
    d = np.sqrt(M * M - e * e)
    rp, rm = M + d, M - d
    out = r + rp * rp / (rp - rm) * np.log(r - rp)
    if rm > 0:
        out -= rm * rm / (rp - rm) * np.log(r - rm)
    return out


def bisect_radius(M, e, r_star):
    rp = M + np.sqrt(M * M - e * e)
    f = lambda r: closed_form_tortoise(M, e, r) - r_star
    hi = max(r_star, 0.0) + 10 * rp + 10
    return brentq(f, rp * (1 + 1e-15), hi, xtol=1e-14, rtol=1e-15, maxiter=500)


@pytest.fixture(scope="session")
def small_run(schw):
    """Short homogeneous bump run shared by the cheap tests."""
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 80.0, 40.0)
    data = bump_data(1e-3, 6.0, 2.0)
    state, rep = evolve(grid, cauchy_to_characteristic(data, grid), Nonlinearity())
    return grid, data, state, rep


@pytest.fixture(scope="session")
def zero_run(schw):
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 60.0, 30.0)
    data = bump_data(0.0, 6.0, 2.0)
    state, rep = evolve(grid, cauchy_to_characteristic(data, grid), Nonlinearity())
    return grid, data, state, rep
