import numpy as np
import pytest

from rnwave import (FieldState, GridError, bump_data, build_grid, cauchy_grid,
                    cauchy_to_characteristic, characteristic_data)
from rnwave.fields import BumpProfile, InitialData, lattice_derivative, seed_slice

from conftest import bisect_radius, closed_form_tortoise


def test_build_grid_example(schw):
    g = build_grid(schw, 0.0, 0.0, 3, 3, 1.0)
    assert g.r_star[0, 0] == 0.0
    assert g.r[0, 0] == pytest.approx(bisect_radius(1.0, 0.0, 0.0), abs=1e-12)
    assert g.r[0, 0] + 2 * np.log(g.r[0, 0] - 2) == pytest.approx(0.0, abs=1e-12)
    # the log(r/r_+ - 1) convention differs by the constant 2 ln 2
    g2 = build_grid(schw, -2 * np.log(2.0), 2 * np.log(2.0), 3, 3, 1.0)
    assert g2.r[0, 0] == pytest.approx(2.55693, abs=1e-5)
    assert g.r_star[2, 0] == -1.0 and g.r_star[0, 2] == 1.0
    assert g.r[0, 2] > g.r[0, 0] > g.r[2, 0]


def test_grid_invariants(rn):
    g = build_grid(rn, -3.0, 2.0, 17, 23, 0.25)
    i, j = 5, 7
    assert g.u[i] == -3.0 + 0.25 * i and g.v[j] == 2.0 + 0.25 * j
    assert np.all(np.diff(g.r, axis=0) < 0)
    assert np.all(np.diff(g.r, axis=1) > 0)
    assert np.max(np.abs(closed_form_tortoise(1.0, 0.6, g.r) - g.r_star)) < 1e-10
    p = g.node(i, j)
    assert p.t == pytest.approx((p.u + p.v) / 2) and p.r_star == pytest.approx((p.v - p.u) / 2)


@pytest.mark.parametrize("h", [0.0, -1.0, float("nan")])
def test_degenerate_spacing(schw, h):
    with pytest.raises(GridError):
        build_grid(schw, 0.0, 0.0, 3, 3, h)


def test_degenerate_counts(schw):
    with pytest.raises(GridError):
        build_grid(schw, 0.0, 0.0, 0, 3, 1.0)


def test_grid_bit_reproducible(rn):
    a = build_grid(rn, -40.0, 1.0, 64, 80, 0.3)
    b = build_grid(rn, -40.0, 1.0, 64, 80, 0.3)
    assert np.array_equal(a.r, b.r) and np.array_equal(a.gap, b.gap)


def test_diagonal_of_time_rounding(schw):
    g = cauchy_grid(schw, 0.1, 1.0, -1.0, 14.6, 40.0, 20.0)
    n = g.first_diagonal_from(1.0)
    assert g.time_of_diagonal(n) == pytest.approx(1.0, abs=1e-12)
    assert g.not_before(1.0)[g.diagonal(n)].all()
    assert not g.not_before(1.0)[g.diagonal(n - 1)].any()


def test_bump_profile():
    d = bump_data(1e-3, 6.0, 2.0)
    p = d.profile
    assert p.value(6.0) == 1e-3
    assert p.support == (4.0, 8.0)
    r = np.linspace(3.0, 9.0, 6001)
    assert p.value(r).max() == 1e-3
    assert np.all(p.value(r[(r < 4) | (r > 8)]) == 0)
    assert p.value(4.0) == 0 and p.value(8.0) == 0
    assert p.d1(4.0) == 0 and p.d1(8.0) == 0
    # d1 matches a central difference of value
    x, eps = 6.7, 1e-6
    assert p.d1(x) == pytest.approx((p.value(x + eps) - p.value(x - eps)) / (2 * eps),
                                    rel=1e-6)


@pytest.mark.parametrize("w", [0.0, -1.0])
def test_bump_width_rejected(w):
    with pytest.raises(ValueError):
        bump_data(1e-3, 6.0, w)


def test_characteristic_corner_mismatch():
    with pytest.raises(ValueError):
        characteristic_data([1.0, 0.0], [0.0, 0.0])


def test_initial_data_dict_roundtrip():
    d = bump_data(2e-3, 5.0, 1.5, velocity="outgoing", normalization="unit_normal")
    assert InitialData.from_dict(d.to_dict()) == d


def test_zero_data_zero_seed(zero_run):
    grid, data, _, _ = zero_run
    s = cauchy_to_characteristic(data, grid)
    assert np.all(s.rpsi[np.isfinite(s.rpsi)] == 0)


def test_time_symmetric_seed_derivatives(schw):
    grid = cauchy_grid(schw, 0.2, 1.0, -1.0, 14.6, 30.0, 15.0)
    s = cauchy_to_characteristic(bump_data(1e-3, 6.0, 2.0), grid)
    np.testing.assert_allclose(s.slice_theta, -s.slice_zeta, rtol=0, atol=1e-18)
    # theta - zeta = r d_{r*} psi = r (1 - mu) d_r phi0 on the slice
    i, j = grid.diagonal(s.start_diagonal)
    r, omm = grid.r[i, j], grid.one_minus_mu[i, j]
    prof = bump_data(1e-3, 6.0, 2.0).profile
    np.testing.assert_allclose(s.slice_theta - s.slice_zeta, r * omm * prof.d1(r),
                               rtol=1e-12, atol=1e-18)


def test_bump_seed_amplitude(schw):
    grid = cauchy_grid(schw, 0.1, 1.0, -1.0, 14.6, 30.0, 15.0)
    data = bump_data(1e-3, 6.0, 2.0)
    s = cauchy_to_characteristic(data, grid)
    i, j = grid.diagonal(s.start_diagonal)
    seeded = np.abs(s.rpsi[i, j]).max()
    rr = np.linspace(4.0, 8.0, 40001)
    oracle = np.max(rr * data.profile.value(rr))
    assert 4e-3 <= seeded <= 8e-3
    assert seeded == pytest.approx(oracle, rel=1e-3)
    # phi reproduces phi0 on the slice
    np.testing.assert_allclose(s.phi[i, j], data.profile.value(grid.r[i, j]),
                               rtol=0, atol=1e-18)


def test_seed_second_diagonal_order(schw):
    # time-symmetric data: psi(t + h/2) = phi0 + O(h^2) on the second diagonal
    data = bump_data(1e-3, 6.0, 2.0)
    errs = []
    for h in (0.2, 0.1):
        g = cauchy_grid(schw, h, 1.0, -1.0, 14.6, 30.0, 15.0)
        s = cauchy_to_characteristic(data, g)
        i, j = g.diagonal(s.start_diagonal + 1)
        errs.append(np.abs(s.phi[i, j] - data.profile.value(g.r[i, j])).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_rpsi_is_single_source(small_run):
    grid, _, state, _ = small_run
    ok = np.isfinite(state.rpsi)
    np.testing.assert_allclose(state.phi[ok] * grid.r[ok], state.rpsi[ok],
                               rtol=1e-15, atol=0)
    with pytest.raises(ValueError):
        state.rpsi[0, 0] = 1.0


def test_field_shape_checked(schw):
    g = build_grid(schw, 0.0, 0.0, 4, 4, 0.5)
    with pytest.raises(GridError):
        FieldState(g, np.zeros((3, 4)))


def test_null_derivatives_second_order(schw):
    errs = []
    for h in (0.2, 0.1):
        g = build_grid(schw, -10.0, 0.0, int(20 / h) + 1, int(20 / h) + 1, h)
        U, V = np.meshgrid(g.u, g.v, indexing="ij")
        psi = np.sin(U / 5.0) * np.cos(V / 7.0)
        s = FieldState(g, psi * g.r)
        zeta_ex = g.r * np.cos(U / 5.0) / 5.0 * np.cos(V / 7.0)
        theta_ex = -g.r * np.sin(U / 5.0) * np.sin(V / 7.0) / 7.0
        errs.append((np.abs(s.zeta - zeta_ex).max(), np.abs(s.theta - theta_ex).max()))
    for a, b in zip(*errs):
        assert a / b == pytest.approx(4.0, rel=0.25)


def test_lattice_derivative_one_sided_exact_on_quadratics():
    x = np.arange(6.0)
    f = np.tile(x ** 2, (3, 1))
    d = lattice_derivative(f, 0, 1, 1.0)
    np.testing.assert_allclose(d, np.tile(2 * x, (3, 1)), atol=1e-12)


def test_seed_slice_bounds(schw):
    g = build_grid(schw, 0.0, 0.0, 4, 4, 0.5)
    z = lambda r, rs: np.zeros_like(r)
    with pytest.raises(GridError):
        seed_slice(g, g.n_diagonals - 1, z, z)


def test_truncation_flag(schw):
    grid = cauchy_grid(schw, 0.2, 1.0, -1.0, 14.6, 30.0, 15.0)
    s = cauchy_to_characteristic(bump_data(1e-3, 3.0, 2.0), grid)
    assert s.truncated
    s = cauchy_to_characteristic(bump_data(1e-3, 6.0, 2.0), grid)
    assert not s.truncated


def test_profile_coordinate_validation():
    with pytest.raises(ValueError):
        BumpProfile(1.0, 0.0, 1.0, coordinate="x")
