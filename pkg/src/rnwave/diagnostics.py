"""Energies, energy-identity residuals, the red-shift quantity and the
bootstrap monitor.

Slices ``{t = const}`` are lattice diagonals; consecutive nodes on a
diagonal are ``h`` apart in ``r_*``, so the trapezoid rule with spacing ``h``
is the exact-segment quadrature.  With ``theta = r d_v psi`` and
``zeta = r d_u psi`` the energy density obeys::

    d_u(theta^2) + d_v(zeta^2) = (1/2)(1 - mu) r^2 F (d_u psi + d_v psi)

from which both identities below follow by integration.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import NamedTuple, Optional

import numpy as np
from scipy import stats

from .exceptions import GridError
from .fields import FieldState, NullGrid

RESIDUAL_FLOOR = 1e-30


class Rect(NamedTuple):
    """Index rectangle ``i0 <= i <= i1``, ``j0 <= j <= j1`` (inclusive)."""

    i0: int
    i1: int
    j0: int
    j1: int

    @classmethod
    def full(cls, grid: NullGrid) -> "Rect":
        return cls(0, grid.Nu - 1, 0, grid.Nv - 1)

    @classmethod
    def from_coords(cls, grid: NullGrid, u_range=None, v_range=None) -> "Rect":
        ur = u_range or (grid.u[0], grid.u[-1])
        vr = v_range or (grid.v[0], grid.v[-1])
        out = cls(grid.u_index(ur[0]), grid.u_index(ur[1]),
                  grid.v_index(vr[0]), grid.v_index(vr[1]))
        out.check(grid)
        return out

    def check(self, grid: NullGrid):
        if not (0 <= self.i0 <= self.i1 < grid.Nu and 0 <= self.j0 <= self.j1 < grid.Nv):
            raise GridError(f"rectangle {tuple(self)} outside grid {grid.shape}")


def _trap(f: np.ndarray, h: float) -> float:
    """Trapezoid rule with unit spacing ``h``; empty or single node gives 0."""
    if f.size < 2:
        return 0.0
    return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))


def _diag_nodes(grid: NullGrid, n: int, rect: Rect):
    i, j = grid.diagonal(n)
    keep = (i >= rect.i0) & (i <= rect.i1) & (j >= rect.j0) & (j <= rect.j1)
    return i[keep], j[keep]


@dataclass
class EnergyRecord:
    """Slice energy in both forms plus (for identities) the other terms."""

    t: float
    diagonal: int
    E_t: float
    E_t_static: float
    flux_u: float = 0.0
    flux_v: float = 0.0
    source_work: float = 0.0

    @property
    def form_mismatch(self) -> float:
        return abs(self.E_t - self.E_t_static) / max(self.E_t, RESIDUAL_FLOOR)

    def to_dict(self):
        return asdict(self)


def _diagonal_of(state: FieldState, t) -> int:
    n = state.grid.diagonal_of_time(t)
    if not state.start_diagonal <= n <= state.end_diagonal:
        raise GridError(f"slice t={t!r} outside the computed domain")
    return n


def slice_energy(state: FieldState, t: float, corner=None) -> EnergyRecord:
    """``E_t`` on ``{t}`` clipped to ``u <= u1``, ``v <= v1``.

    ``corner`` is ``(u1, v1)`` in coordinates; default is the grid's top
    corner.  Returns both the null form ``2 int (theta^2 + zeta^2) dr_*``
    and the static form ``int (psi_t^2 + psi_{r_*}^2) r^2 dr_*``, computed
    from independent stencils.
    """
    grid = state.grid
    n = _diagonal_of(state, t)
    rect = Rect.full(grid)
    if corner is not None:
        rect = Rect(0, grid.u_index(corner[0]), 0, grid.v_index(corner[1]))
        rect.check(grid)
    return _energy_on(state, n, rect)


def _energy_on(state: FieldState, n: int, rect: Rect) -> EnergyRecord:
    grid = state.grid
    i, j = _diag_nodes(grid, n, rect)
    th, ze = state.theta[i, j], state.zeta[i, j]
    E = 2.0 * _trap(th * th + ze * ze, grid.h)
    pt, pr = state.static_derivatives
    r = grid.r[i, j]
    Es = _trap((pt[i, j] ** 2 + pr[i, j] ** 2) * r * r, grid.h)
    return EnergyRecord(grid.time_of_diagonal(n), n, E, Es)


def energy_series(state: FieldState, diagonals=None) -> np.ndarray:
    """Null-form ``E_t`` of every listed diagonal over the whole grid."""
    grid = state.grid
    if diagonals is None:
        diagonals = np.arange(state.start_diagonal, state.end_diagonal + 1)
    dens = 2.0 * (state.theta ** 2 + state.zeta ** 2)
    out = np.empty(len(diagonals))
    for m, n in enumerate(diagonals):
        i, j = grid.diagonal(int(n))
        d = dens[i, j]
        out[m] = _trap(d[np.isfinite(d)], grid.h)
    return out


def _source_density(state: FieldState) -> Optional[np.ndarray]:
    if state.source is None:
        return None
    grid = state.grid
    psi_t = (state.theta + state.zeta) / grid.r
    return grid.one_minus_mu * state.source * psi_t * grid.r ** 2


@dataclass
class IdentityResult:
    residual: float
    lhs: float
    rhs: float
    terms: dict

    def __float__(self):
        return self.residual


def bulk_energy_residual(state: FieldState, t3: float, t2: float,
                         rect: Optional[Rect] = None) -> IdentityResult:
    """Residual of the energy identity between ``{t3}`` and ``{t2}``.

    With the region clipped to ``rect``::

        E_t2 + 2 int theta^2(u_hi, v) dv + 2 int zeta^2(u, v_hi) du
          = E_t3 + 2 int theta^2(u_lo, v) dv + 2 int zeta^2(u, v_lo) du
            + 2 int int (1 - mu) F psi_t r^2 dr_* dt

    Returns ``|LHS - RHS| / max(E_t3, 1e-30)``.
    """
    if not t2 > t3:
        raise ValueError("need t2 > t3")
    grid = state.grid
    rect = rect or Rect.full(grid)
    rect.check(grid)
    n3, n2 = _diagonal_of(state, t3), _diagonal_of(state, t2)
    h = grid.h
    e3, e2 = _energy_on(state, n3, rect), _energy_on(state, n2, rect)
    th2, ze2 = state.theta ** 2, state.zeta ** 2

    def edge_u(i):  # theta^2 along column i between the slices
        j = np.arange(max(rect.j0, n3 - i), min(rect.j1, n2 - i) + 1)
        return 2.0 * _trap(th2[i, j], h) if j.size else 0.0

    def edge_v(j):
        i = np.arange(max(rect.i0, n3 - j), min(rect.i1, n2 - j) + 1)
        return 2.0 * _trap(ze2[i, j], h) if i.size else 0.0

    out_u, out_v = edge_u(rect.i1), edge_v(rect.j1)
    in_u, in_v = edge_u(rect.i0), edge_v(rect.j0)
    work = 0.0
    dens = _source_density(state)
    if dens is not None:
        per = np.array([_trap(dens[_diag_nodes(grid, n, rect)], h)
                        for n in range(n3, n2 + 1)])
        work = 2.0 * _trap(per, 0.5 * h)
    lhs = e2.E_t + out_u + out_v
    rhs = e3.E_t + in_u + in_v + work
    res = abs(lhs - rhs) / max(e3.E_t, RESIDUAL_FLOOR)
    return IdentityResult(res, lhs, rhs, {
        "E_t2": e2.E_t, "E_t3": e3.E_t, "flux_out_u": out_u, "flux_out_v": out_v,
        "flux_in_u": in_u, "flux_in_v": in_v, "source_work": work,
        "E_t2_static": e2.E_t_static, "E_t3_static": e3.E_t_static})


def characteristic_energy_residual(state: FieldState, rect: Rect) -> IdentityResult:
    """Residual of the four-flux identity on the characteristic rectangle::

        int zeta^2(u, v1) du + int theta^2(u1, v) dv
          = int zeta^2(u, v2) du + int theta^2(u2, v) dv
            + (1/2) int int (1 - mu) F (psi_u + psi_v) r^2 du dv

    normalised by the past (incoming) flux, floored at ``1e-30``.
    """
    grid = state.grid
    rect.check(grid)
    if rect.i0 + rect.j0 < state.start_diagonal:
        raise GridError("rectangle reaches below the computed domain")
    if rect.i1 + rect.j1 > state.end_diagonal:
        raise GridError("rectangle reaches beyond the computed domain")
    h = grid.h
    th2, ze2 = state.theta ** 2, state.zeta ** 2
    iu = np.arange(rect.i0, rect.i1 + 1)
    jv = np.arange(rect.j0, rect.j1 + 1)
    fut_v = _trap(ze2[iu, rect.j1], h)
    fut_u = _trap(th2[rect.i1, jv], h)
    past_v = _trap(ze2[iu, rect.j0], h)
    past_u = _trap(th2[rect.i0, jv], h)
    work = 0.0
    dens = _source_density(state)
    if dens is not None:
        sub = dens[rect.i0:rect.i1 + 1, rect.j0:rect.j1 + 1]
        inner = np.array([_trap(row, h) for row in sub])
        work = 0.5 * _trap(inner, h)
    lhs = fut_v + fut_u
    rhs = past_v + past_u + work
    scale = max(past_u + past_v, RESIDUAL_FLOOR)
    return IdentityResult(abs(lhs - rhs) / scale, lhs, rhs, {
        "future_v": fut_v, "future_u": fut_u, "past_v": past_v,
        "past_u": past_u, "source_work": work})


# --------------------------------------------------------------------------
# red shift


def redshift_quantity(state: FieldState) -> np.ndarray:
    """``zeta / (1 - mu) = r d_u psi / (1 - mu)`` at every node."""
    return state.zeta / state.grid.one_minus_mu


@dataclass
class RedshiftFit:
    rate: float
    stderr: float
    v_window: tuple
    n_samples: int
    column: int
    gap_window: tuple
    tail_level: float

    def to_dict(self):
        d = asdict(self)
        d["v_window"] = list(self.v_window)
        d["gap_window"] = list(self.gap_window)
        return d


def fit_redshift_rate(state: FieldState, column: Optional[int] = None, *,
                      drop: float = 1e-2, smooth: float = 4.0,
                      min_samples: int = 20) -> RedshiftFit:
    """Exponential decay rate in ``v`` of ``|zeta/(1 - mu)|`` along a column.

    The default column is the largest-``u`` one (horizon proxy).  The window
    opens once the quantity has fallen by ``drop`` below its peak and closes
    where it comes within a factor 10 of the polynomial tail.  The tail is
    located by the change of local log-slope: the local slope (taken over
    ``smooth`` units of ``v``) is compared with the slope at the window
    start, and the first point where it has relaxed to half of it marks the
    onset of the tail; the tail level there sets the cut-off.
    """
    grid = state.grid
    i = grid.Nu - 1 if column is None else int(column)
    q = np.abs(redshift_quantity(state)[i, :])
    v = grid.v
    ok = np.isfinite(q) & (q > 0)
    if ok.sum() < min_samples:
        raise ValueError("not enough finite samples on the column")
    jj = np.flatnonzero(ok)
    peak = jj[np.argmax(q[jj])]
    after = jj[jj > peak]
    start_c = after[q[after] <= drop * q[peak]]
    if start_c.size == 0:
        raise ValueError("quantity never falls below the drop level")
    j0 = start_c[0]
    lq = np.log(np.where(ok, q, np.nan))
    w = max(2, int(round(smooth / grid.h)))
    slope = np.full(q.shape, np.nan)
    slope[:-w] = (lq[w:] - lq[:-w]) / (v[w:] - v[:-w])
    s0 = np.nanmedian(slope[j0:j0 + w + 1])
    if not s0 < 0:
        raise ValueError("no exponential decay after the peak")
    later = np.flatnonzero((np.arange(q.size) > j0) & (slope > 0.5 * s0))
    if later.size == 0:
        j_tail = jj[-1]
    else:
        j_tail = later[0]
    tail = q[j_tail]
    cand = np.flatnonzero((np.arange(q.size) >= j0) & (np.arange(q.size) <= j_tail)
                          & (q <= 10.0 * tail))
    j1 = cand[0] if cand.size else j_tail
    sel = np.arange(j0, j1 + 1)
    sel = sel[ok[sel]]
    if sel.size < min_samples:
        raise ValueError(f"fit window holds {sel.size} < {min_samples} samples")
    fit = stats.linregress(v[sel], lq[sel])
    gap = grid.gap[i, :]
    return RedshiftFit(float(-fit.slope), float(fit.stderr),
                       (float(v[sel[0]]), float(v[sel[-1]])), int(sel.size), i,
                       (float(gap[sel[0]]), float(gap[sel[-1]])), float(tail))


def integrating_factor_solution(grid: NullGrid, i: int, j0: int, q0: float,
                                theta_col: np.ndarray) -> np.ndarray:
    """Integrate ``d_v Q + k(r) Q = theta/(2r)`` along column ``i`` from ``j0``.

    ``k = (M - e^2/r)/r^2``; the integral formula is evaluated with the
    trapezoid rule.  ``theta_col`` holds ``theta`` at the column nodes.
    """
    bg = grid.background
    r = grid.r[i, j0:]
    kk = (bg.mass - bg.charge ** 2 / r) / r ** 2
    h = grid.h
    K = np.concatenate([[0.0], np.cumsum(0.5 * h * (kk[1:] + kk[:-1]))])
    g = np.exp(K) * theta_col[j0:] / (2.0 * r)
    G = np.concatenate([[0.0], np.cumsum(0.5 * h * (g[1:] + g[:-1]))])
    return np.exp(-K) * (q0 + G)


# --------------------------------------------------------------------------
# bootstrap monitor


@dataclass(frozen=True)
class Region:
    """Nodes with ``i <= i_max``, ``j <= j_max`` and ``t >= t_min``.

    ``Region(i_max=i, j_max=j)`` is the causal past of node ``(i, j)``.
    ``None`` bounds mean the full grid.
    """

    i_max: Optional[int] = None
    j_max: Optional[int] = None
    t_min: float = 1.0
    i_min: int = 0
    j_min: int = 0

    def mask(self, state: FieldState) -> np.ndarray:
        grid = state.grid
        i = np.arange(grid.Nu)[:, None]
        j = np.arange(grid.Nv)[None, :]
        im = grid.Nu - 1 if self.i_max is None else self.i_max
        jm = grid.Nv - 1 if self.j_max is None else self.j_max
        return ((i >= self.i_min) & (i <= im) & (j >= self.j_min) & (j <= jm)
                & grid.not_before(self.t_min) & state.valid)

    def to_dict(self):
        return asdict(self)


@dataclass
class BootstrapMonitor:
    B_observed: float
    argmax: tuple
    region: Region
    n_nodes: int

    def improves_to_half(self, B: float) -> bool:
        return self.B_observed <= 0.5 * B

    def to_dict(self):
        return {"B_observed": self.B_observed, "argmax": list(self.argmax),
                "region": self.region.to_dict(), "n_nodes": self.n_nodes}


def bootstrap_sup(state: FieldState, region: Optional[Region] = None) -> BootstrapMonitor:
    """Exact maximum of ``max(v, 1) |phi|`` over the region's nodes.

    Ties go to the lexicographically smallest ``(i, j)``.
    """
    region = region or Region()
    m = region.mask(state)
    if not m.any():
        raise ValueError("empty bootstrap region")
    vp = np.maximum(state.grid.v, 1.0)[None, :]
    w = np.where(m, vp * np.abs(state.phi), -np.inf)
    w = np.where(np.isnan(w), -np.inf, w)
    flat = int(np.argmax(w))
    a = np.unravel_index(flat, w.shape)
    return BootstrapMonitor(float(w[a]), (int(a[0]), int(a[1])), region,
                            int(m.sum()))
