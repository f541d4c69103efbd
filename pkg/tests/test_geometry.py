import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rnwave import (DomainError, ExtremalBackgroundError, horizon_bound_constants,
                    make_background, one_minus_mu, radius_from_tortoise, tortoise)
from rnwave.geometry import dtortoise_dr, hawking_mass, horizon_gap

from conftest import bisect_radius, closed_form_tortoise


def test_background_schwarzschild(schw):
    assert schw.r_plus == 2.0
    assert schw.r_minus == 0.0
    assert schw.kappa_plus == 0.25


def test_background_rn(rn):
    assert rn.r_plus == pytest.approx(1.8, abs=1e-15)
    assert rn.r_minus == pytest.approx(0.2, abs=1e-15)
    assert rn.kappa_plus == pytest.approx(1.6 / (2 * 3.24), rel=1e-14)
    assert rn.r_minus < rn.r_plus and rn.r_plus > rn.mass


@pytest.mark.parametrize("M, e", [(1.0, 1.0), (1.0, -1.0), (1.0, 1.5)])
def test_extremal_rejected(M, e):
    with pytest.raises(ExtremalBackgroundError):
        make_background(M, e)


def test_nonpositive_mass_rejected():
    with pytest.raises(ValueError):
        make_background(0.0, 0.0)


def test_one_minus_mu_examples(schw, rn):
    assert one_minus_mu(schw, 4.0) == 0.5
    assert abs(one_minus_mu(rn, 1.8)) < 1e-15
    assert one_minus_mu(rn, 2.0) == pytest.approx(0.09, abs=1e-15)
    assert one_minus_mu(schw, schw.r_plus) == 0.0


def test_hawking_mass_on_horizon(rn):
    # 1 - mu = 0 with mu = 2m/r forces m = r_+/2
    assert hawking_mass(rn, rn.r_plus) == pytest.approx(rn.r_plus / 2, rel=1e-14)


def test_tortoise_examples(schw, rn):
    assert tortoise(schw, 3.0) == 3.0
    assert tortoise(schw, 4.0) == pytest.approx(4 + 2 * math.log(2), rel=1e-15)
    assert tortoise(rn, 2.8) == pytest.approx(2.8 - 0.025 * math.log(2.6), rel=1e-14)
    assert tortoise(rn, 2.8) == pytest.approx(2.77611, abs=1e-5)


@pytest.mark.parametrize("r", [2.0, 1.0, -1.0])
def test_tortoise_domain(schw, r):
    with pytest.raises(DomainError):
        tortoise(schw, r)


def test_radius_from_tortoise_examples(schw):
    assert radius_from_tortoise(schw, 3.0) == pytest.approx(3.0, abs=1e-12)
    r = radius_from_tortoise(schw, 5.38629, tol=1e-12)
    assert r == pytest.approx(bisect_radius(1.0, 0.0, 5.38629), abs=1e-11)
    assert r == pytest.approx(4.0, abs=1e-5)


def test_deep_horizon_gap(schw):
    # fixed point of g = exp((r_star - 2 - g)/2); two passes reach rounding
    g = 0.0
    for _ in range(4):
        g = math.exp((-50.0 - 2.0 - g) / 2.0)
    got = radius_from_tortoise(schw, -50.0, return_gap=True)
    assert got == pytest.approx(g, rel=1e-12)
    assert got == pytest.approx(math.exp(-26), rel=1e-10)


def test_one_minus_mu_accuracy_at_minus_300(schw, rn):
    g_ref = 0.0
    for _ in range(4):
        g_ref = math.exp((-300.0 - 2.0 - g_ref) / 2.0)
    g = horizon_gap(schw, -300.0)
    assert one_minus_mu(schw, gap=g) == pytest.approx(g_ref / (2 + g_ref), rel=1e-8)
    # RN: 1 - mu = g (g + r_+ - r_-)/(r_+ + g)^2
    g = horizon_gap(rn, -300.0)
    assert g > 0
    assert tortoise(rn, gap=g) == pytest.approx(-300.0, abs=1e-9)
    d = rn.r_plus - rn.r_minus
    assert one_minus_mu(rn, gap=g) == pytest.approx(g * (g + d) / (rn.r_plus + g) ** 2,
                                                    rel=1e-12)


@pytest.mark.parametrize("e", [0.0, 0.6])
def test_roundtrip_and_monotone_grid(e):
    bg = make_background(1.0, e)
    x = np.linspace(-200.0, 200.0, 10_000)
    g = horizon_gap(bg, x)
    assert np.max(np.abs(tortoise(bg, gap=g) - x)) <= 1e-10
    assert np.all(np.diff(g) > 0)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-200.0, 200.0), e=st.sampled_from([0.0, 0.6]))
def test_roundtrip_property(x, e):
    bg = make_background(1.0, e)
    g = horizon_gap(bg, x)
    assert abs(tortoise(bg, gap=g) - x) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-150.0, 150.0), dx=st.floats(1e-3, 5.0))
def test_inverse_monotone_property(x, dx):
    bg = make_background(1.0, 0.6)
    assert horizon_gap(bg, x + dx) > horizon_gap(bg, x)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(2.5, 50.0), e=st.sampled_from([0.0, 0.6]))
def test_derivative_identity_second_order(r, e):
    bg = make_background(1.0, e)
    exact = 1.0 / one_minus_mu(bg, r)
    errs = []
    for h in (1e-2, 5e-3):
        fd = (tortoise(bg, r + h) - tortoise(bg, r - h)) / (2 * h)
        errs.append(abs(fd - exact))
    assert dtortoise_dr(bg, r) == pytest.approx(exact, rel=1e-14)
    if errs[0] > 1e-9:
        assert 3.0 < errs[0] / errs[1] < 5.0


def test_closed_form_agrees(rn):
    r = np.linspace(1.81, 40.0, 200)
    assert np.allclose(tortoise(rn, r), closed_form_tortoise(1.0, 0.6, r),
                       rtol=0, atol=1e-12)


def test_horizon_bounds_hold(schw):
    hb = horizon_bound_constants(schw, -10.0)
    rs = np.linspace(-200.0, -10.0, 3001)
    g = horizon_gap(schw, rs)
    omm = one_minus_mu(schw, gap=g)
    ex = np.exp((schw.r_plus - schw.r_minus) / schw.r_plus ** 2 * rs)
    tol = 1e-12
    assert np.all(hb.C1_hat * ex <= hb.C1 * g * (1 + tol))
    assert np.all(hb.C1 * g <= omm * (1 + tol))
    assert np.all(omm <= hb.C2 * g * (1 + tol))
    assert np.all(hb.C2 * g <= hb.C2_hat * ex * (1 + tol))


def test_horizon_ratio_limit(schw):
    g = horizon_gap(schw, np.array([-100.0, -200.0]))
    assert np.allclose(one_minus_mu(schw, gap=g) / g, 0.5, rtol=1e-12)


@pytest.mark.parametrize("e", [0.0, 0.6])
def test_horizon_exponential_rate(e):
    bg = make_background(1.0, e)
    rs = np.linspace(-200.0, -50.0, 400)
    omm = one_minus_mu(bg, gap=horizon_gap(bg, rs))
    slope = np.polyfit(rs, np.log(omm), 1)[0]
    rate = (bg.r_plus - bg.r_minus) / bg.r_plus ** 2
    assert slope == pytest.approx(rate, rel=0.02)
    if e == 0.6:
        assert rate == pytest.approx(0.49383, abs=1e-5)


def test_horizon_bounds_reject_far_cut(schw):
    with pytest.raises(ValueError):
        horizon_bound_constants(schw, 500.0)
