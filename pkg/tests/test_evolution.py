import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rnwave import (GridError, Nonlinearity, Thresholds, bump_data, build_grid,
                    cauchy_grid, cauchy_to_characteristic, characteristic_data,
                    evolve, evolve_duhamel_slice, make_background, step_box)
from rnwave.evolution import CellGeometry
from rnwave.geometry import horizon_gap, one_minus_mu


def exact_cell(bg, u, v, h):
    """Cell with past corner (u, v) and exact radii from the tortoise inverse."""
    rs = np.array([(v - u) / 2, (v - u - h) / 2, (v + h - u) / 2])
    g = horizon_gap(bg, rs, tol=1e-14)
    r = bg.r_plus + g
    omm = one_minus_mu(bg, gap=g[0])
    mt = (bg.mass - bg.charge ** 2 / r[0]) * omm / (2 * r[0] ** 2)
    return CellGeometry(r[0], r[1], r[2], r[0], r[0], omm, mt)


def constant_defect(bg, u, v, h, c=1.0):
    cell = exact_cell(bg, u - h / 2, v - h / 2, h)
    out = step_box(c * cell.r_s, c * cell.r_a, c * cell.r_b, cell, h)
    return abs(out - c * cell.r_ne)


def test_step_box_zero():
    cell = exact_cell(make_background(1.0, 0.0), 0.0, 5.0, 0.1)
    assert step_box(0.0, 0.0, 0.0, cell, 0.1) == 0.0
    assert step_box(0.0, 0.0, 0.0, cell, 0.1, Nonlinearity("power_abs", p=3)) == 0.0


@pytest.mark.parametrize("e", [0.0, 0.6])
@pytest.mark.parametrize("uv", [(-5.0, 5.0), (0.0, 3.0), (-20.0, 1.0)])
def test_constant_defect_fourth_order(e, uv):
    bg = make_background(1.0, e)
    d1 = constant_defect(bg, *uv, 0.2)
    d2 = constant_defect(bg, *uv, 0.1)
    assert d1 / d2 == pytest.approx(16.0, abs=4.0)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3),
       X=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       Y=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       F=st.floats(-1, 1))
def test_step_box_affine(a, b, X, Y, F):
    cell = exact_cell(make_background(1.0, 0.6), -1.0, 4.0, 0.3)
    nl = Nonlinearity("prescribed_F", source=np.zeros((1, 1)))
    step = lambda Z: step_box(*Z, cell, 0.3, nl, F_center=F)
    Z = [a * x + b * y for x, y in zip(X, Y)]
    f0 = step([0.0, 0.0, 0.0])
    expected = a * step(X) + b * step(Y) + (1 - a - b) * f0
    assert step(Z) == pytest.approx(expected, abs=1e-12)


def test_step_box_homogeneous_linear():
    cell = exact_cell(make_background(1.0, 0.0), -1.0, 4.0, 0.3)
    X, Y = [0.3, -0.2, 0.5], [1.0, 2.0, -1.0]
    Z = [2 * x - 3 * y for x, y in zip(X, Y)]
    assert step_box(*Z, cell, 0.3) == pytest.approx(
        2 * step_box(*X, cell, 0.3) - 3 * step_box(*Y, cell, 0.3), abs=1e-14)


@pytest.mark.parametrize("kw, exc", [
    ({"kind": "cubic"}, ValueError), ({"p": 1.0}, ValueError),
    ({"sign": 0}, ValueError), ({"K": 0.0}, ValueError),
    ({"kind": "prescribed_F"}, ValueError), ({"kind": "table"}, ValueError)])
def test_nonlinearity_validation(kw, exc):
    with pytest.raises(exc):
        Nonlinearity(**kw)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(1.01, 8.0), x=st.lists(st.floats(-10, 10), min_size=1, max_size=20))
def test_john_bound_power_kinds(p, x):
    assert Nonlinearity("power_abs", p=p).john_bound_holds(x)
    assert Nonlinearity("power_odd", p=p, sign=-1).john_bound_holds(x)


def test_table_kind_interpolates():
    nl = Nonlinearity("table", table=([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0]))
    assert nl(0.5) == pytest.approx(0.5)


def test_zero_data_zero_solution(zero_run):
    _, _, state, rep = zero_run
    assert rep.verdict == "completed"
    assert np.all(state.phi[state.valid] == 0)
    assert rep.sup_bootstrap == 0.0


def test_zero_data_nonlinear(schw):
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 40.0, 20.0)
    data = bump_data(0.0, 6.0, 2.0)
    nl = Nonlinearity("power_abs", p=3.0)
    state, rep = evolve(grid, cauchy_to_characteristic(data, grid, nl), nl)
    assert rep.completed and np.all(state.phi[state.valid] == 0)


def _char_grid(bg, N=40, h=0.25):
    return build_grid(bg, 0.0, 2.0, N, N, h)


def test_causality(schw):
    grid = _char_grid(schw)
    base = characteristic_data(np.zeros(grid.Nv), np.zeros(grid.Nu))
    ray = np.zeros(grid.Nv)
    j0 = 13
    ray[j0] = 1e-3
    pert = characteristic_data(ray, np.zeros(grid.Nu))
    a, _ = evolve(grid, cauchy_to_characteristic(base, grid))
    b, _ = evolve(grid, cauchy_to_characteristic(pert, grid))
    touched = (b.rpsi - a.rpsi) != 0
    cone = np.zeros(grid.shape, dtype=bool)
    cone[:, j0:] = True
    assert not touched[~cone].any()
    # the first two columns of the cone carry the signal everywhere
    assert touched[:, j0].all() and touched[1:, j0 + 1].all()


def test_causality_interior_node(schw):
    # perturb a v0-ray node: the affected set lies in i >= i0
    grid = _char_grid(schw)
    ray = np.zeros(grid.Nu)
    ray[7] = 1e-3
    b, _ = evolve(grid, cauchy_to_characteristic(
        characteristic_data(np.zeros(grid.Nv), ray), grid))
    nz = b.rpsi != 0
    assert not nz[:7].any() and nz[7:, :].any() and nz[7, :].all()


def test_parallel_determinism(small_run):
    grid, data, state, rep = small_run
    s2, r2 = evolve(grid, cauchy_to_characteristic(data, grid), parallel=True, threads=2)
    assert np.array_equal(state.rpsi, s2.rpsi, equal_nan=True)
    assert rep.sup_bootstrap == r2.sup_bootstrap


def test_nonlinear_parallel_determinism(schw):
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 60.0, 30.0)
    data = bump_data(1e-2, 6.0, 2.0)
    nl = Nonlinearity("power_abs", p=3.0)
    a, _ = evolve(grid, cauchy_to_characteristic(data, grid, nl), nl)
    b, _ = evolve(grid, cauchy_to_characteristic(data, grid, nl), nl, parallel=True)
    assert np.array_equal(a.rpsi, b.rpsi, equal_nan=True)


def smooth_bump(x, c, w):
    s = (x - c) / w
    out = np.zeros_like(x)
    m = np.abs(s) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


def test_second_order_convergence(schw):
    # C-infinity characteristic data; coarse-lattice nodes are shared by all runs
    phis = []
    for h in (0.2, 0.1, 0.05):
        N = int(round(40 / h)) + 1
        g = build_grid(schw, 0.0, 0.0, N, N, h)
        data = characteristic_data(1e-3 * g.r[0, :] * smooth_bump(g.v, 8.0, 4.0),
                                   np.zeros(N))
        s, _ = evolve(g, cauchy_to_characteristic(data, g), energies=False)
        k = int(round(0.2 / h))
        phis.append(s.phi[::k, ::k])
    d1 = np.abs(phis[0] - phis[1])
    d2 = np.abs(phis[1] - phis[2])
    assert d1.max() / d2.max() == pytest.approx(4.0, rel=0.2)
    for u, v in ((20.0, 30.0), (30.0, 38.0)):
        i, j = int(u / 0.2), int(v / 0.2)
        assert d1[i, j] / d2[i, j] == pytest.approx(4.0, rel=0.2)


@pytest.mark.parametrize("e", [0.0, 0.6])
def test_constant_preservation(e):
    bg = make_background(1.0, e)
    errs = []
    for h in (0.2, 0.1):
        N = int(10 / h) + 1
        g = build_grid(bg, -5.0, 0.0, N, N, h)
        c = 0.7
        data = characteristic_data(c * g.r[0, :], c * g.r[:, 0])
        s, _ = evolve(g, cauchy_to_characteristic(data, g), energies=False)
        errs.append(np.abs(s.phi - c).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


def test_bootstrap_brute_force(small_run):
    grid, _, state, rep = small_run
    vp = np.maximum(grid.v, 1.0)
    best = 0.0
    for i in range(grid.Nu):
        for j in range(grid.Nv):
            if grid.time_of_diagonal(i + j) >= 1.0 - 1e-9 and np.isfinite(state.phi[i, j]):
                best = max(best, vp[j] * abs(state.phi[i, j]))
    assert rep.sup_bootstrap == best
    i, j = rep.bootstrap_node
    assert vp[j] * abs(state.phi[i, j]) == best


def test_report_series(small_run):
    grid, _, state, rep = small_run
    assert len(rep.diagonals) == rep.end_diagonal - state.start_diagonal + 1
    assert np.all(np.diff(rep.bootstrap_running) >= 0)
    assert rep.energy is not None and np.all(rep.energy >= 0)
    d = rep.to_dict()
    assert d["verdict"] == "completed" and d["nonlinearity"]["kind"] == "zero"


def test_blow_up_verdict(schw):
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 100.0, 60.0)
    data = bump_data(1.0, 6.0, 2.0)
    nl = Nonlinearity("power_abs", p=3.0)
    state, rep = evolve(grid, cauchy_to_characteristic(data, grid, nl), nl)
    assert rep.verdict == "blow_up"
    assert rep.blow_up_node is not None and rep.blow_up_point is not None
    assert rep.end_diagonal < grid.n_diagonals - 1
    assert np.all(np.isnan(state.rpsi[grid.diagonal_index > rep.end_diagonal]))


def test_defocusing_completes(schw):
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 100.0, 60.0)
    data = bump_data(1.0, 6.0, 2.0)
    nl = Nonlinearity("power_odd", p=3.0, sign=-1)
    _, rep = evolve(grid, cauchy_to_characteristic(data, grid, nl), nl, energies=False)
    assert rep.verdict == "completed"


def test_slow_instability_is_numerical_failure(schw):
    # a threshold below the data's own growth without localisation
    grid = cauchy_grid(schw, 0.4, 1.0, -1.0, 14.6, 40.0, 20.0)
    data = bump_data(1e-3, 6.0, 2.0)
    _, rep = evolve(grid, cauchy_to_characteristic(data, grid), thresholds=Thresholds(phi_max=1e-4))
    assert rep.verdict == "numerical_failure"


def test_duhamel_slice_zero(schw):
    grid = build_grid(schw, 0.0, 4.0, 20, 20, 0.25)
    s = evolve_duhamel_slice(grid, np.zeros(grid.shape), 3.0)
    assert np.all(s.rpsi[s.valid] == 0)


def test_duhamel_slice_top_corner(schw):
    grid = build_grid(schw, 0.0, 4.0, 10, 10, 0.25)
    with pytest.raises(GridError):
        evolve_duhamel_slice(grid, np.zeros(grid.shape), grid.time_of_diagonal(grid.n_diagonals - 1))


def test_duhamel_slice_velocity(schw):
    # the second diagonal carries dt (1 - mu) r F to leading order
    grid = build_grid(schw, 0.0, 4.0, 40, 40, 0.05)
    F = lambda u, v, r: np.ones_like(r)
    s = evolve_duhamel_slice(grid, F, 3.0)
    n0 = grid.diagonal_of_time(3.0)
    i, j = grid.diagonal(n0 + 1)
    expect = 0.5 * grid.h * grid.one_minus_mu[i, j] * grid.r[i, j]
    np.testing.assert_allclose(s.rpsi[i, j], expect, rtol=grid.h)


def test_init_grid_mismatch(schw):
    a = build_grid(schw, 0.0, 4.0, 10, 10, 0.25)
    b = build_grid(schw, 0.0, 4.0, 10, 10, 0.25)
    init = cauchy_to_characteristic(characteristic_data(np.zeros(10), np.zeros(10)), a)
    with pytest.raises(GridError):
        evolve(b, init)
