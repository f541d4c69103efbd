"""Box-scheme characteristic integrator for ``d_u d_v (r psi)``.

The evolved equation is::

    d_u d_v (r psi) = -(M - e^2/r)(1 - mu)/(2 r^2) psi + (1 - mu) r F / 4

with ``F = G(psi)`` or a prescribed source.  Each cell is updated by the
diamond rule with a predictor (three-corner average of ``psi``) and one
corrector pass (four-corner average).  Cells on one anti-diagonal
``i + j = n`` are independent, so a sweep runs diagonal by diagonal; the
parallel and serial sweeps perform identical floating-point operations per
cell and therefore give bit-identical fields.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Union

import numba
import numpy as np
from numba import njit, prange

from .exceptions import GridError
from .fields import FieldState, NullGrid, seed_slice

KINDS = ("zero", "power_abs", "power_odd", "prescribed_F", "table")
_KIND_CODE = {k: n for n, k in enumerate(KINDS)}


@dataclass(frozen=True)
class Nonlinearity:
    """The source ``G`` together with its John-bound certificate.

    Parameters
    ----------
    kind : str
        One of ``zero``, ``power_abs`` (``sign |x|^p``), ``power_odd``
        (``sign x |x|^{p-1}``), ``prescribed_F`` (linear inhomogeneous, see
        ``source``) or ``table`` (piecewise-linear ``G`` through ``table``).
    p : float
        Exponent, ``p > 1``.
    sign : int
        ``+1`` or ``-1``.  With ``sign = +1`` and ``power_abs`` the source has
        the focusing sign of the John problem.
    K, c : float
        Certificate ``|G(x)| <= K |x|^p`` for ``|x| <= c``.  Power kinds have
        ``K = 1`` and any ``c``.
    table : pair of arrays, optional
        Abscissae (increasing) and values of a tabulated ``G``.
    source : callable or ndarray, optional
        Prescribed ``F``: an array of node values, or ``f(u, v, r)``.
    """

    kind: str = "zero"
    p: float = 3.0
    sign: int = 1
    K: float = 1.0
    c: float = float("inf")
    table: Optional[tuple] = None
    source: Union[None, np.ndarray, Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if not self.p > 1:
            raise ValueError("exponent p must exceed 1")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not (self.K > 0 and self.c > 0):
            raise ValueError("K and c must be positive")
        if self.kind == "table":
            if self.table is None:
                raise ValueError("table kind needs (x, G) samples")
            x, g = (np.asarray(a, dtype=float) for a in self.table)
            if x.shape != g.shape or x.size < 2 or np.any(np.diff(x) <= 0):
                raise ValueError("table abscissae must be increasing")
            object.__setattr__(self, "table", (x, g))
        if self.kind == "prescribed_F" and self.source is None:
            raise ValueError("prescribed_F needs a source")

    @property
    def code(self) -> int:
        return _KIND_CODE[self.kind]

    @property
    def is_linear(self) -> bool:
        return self.kind in ("zero", "prescribed_F")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "power_abs":
            return self.sign * np.abs(x) ** self.p
        if self.kind == "power_odd":
            return self.sign * x * np.abs(x) ** (self.p - 1.0)
        if self.kind == "table":
            return np.interp(x, *self.table)
        return np.zeros_like(x)

    def john_bound_holds(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        x = x[np.abs(x) <= self.c]
        return bool(np.all(np.abs(self(x)) <= self.K * np.abs(x) ** self.p
                           * (1 + 1e-12)))

    def source_nodes(self, grid: NullGrid) -> Optional[np.ndarray]:
        if self.kind != "prescribed_F":
            return None
        if callable(self.source):
            u, v = np.meshgrid(grid.u, grid.v, indexing="ij")
            return np.asarray(self.source(u, v, grid.r), dtype=float)
        F = np.asarray(self.source, dtype=float)
        if F.shape != grid.shape:
            raise GridError("prescribed source does not match grid")
        return F

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "p": self.p, "sign": self.sign, "K": self.K,
             "c": self.c}
        if self.table is not None:
            d["table"] = [np.asarray(a).tolist() for a in self.table]
        return d


# --------------------------------------------------------------------------
# kernels


@njit(cache=True, inline="always")
def _G(x, kind, p, sign, tx, tg):
    if kind == 1:
        return sign * abs(x) ** p
    if kind == 2:
        return sign * x * abs(x) ** (p - 1.0)
    if kind == 4:
        return np.interp(x, tx, tg)
    return 0.0


@njit(cache=True, inline="always")
def _box(s, a, b, r_s, r_a, r_b, r_ne, r_c, omm_c, mt_c, h2,
         kind, p, sign, tx, tg, F_c):
    """Predictor and corrector values of ``r psi`` at the north corner."""
    psi_s = s / r_s
    psi_a = a / r_a
    psi_b = b / r_b
    base = a + b - s
    src = 0.25 * omm_c * r_c
    psi_c = (psi_s + psi_a + psi_b) / 3.0
    f = F_c if kind == 3 else _G(psi_c, kind, p, sign, tx, tg)
    pred = base + h2 * (-mt_c * psi_c + src * f)
    psi_c = 0.25 * (psi_s + psi_a + psi_b + pred / r_ne)
    if kind != 3:
        f = _G(psi_c, kind, p, sign, tx, tg)
    corr = base + h2 * (-mt_c * psi_c + src * f)
    return pred, corr


@njit(cache=True, inline="always")
def _update(rpsi, i, n, off, r_line, omm_line, mt_line, h2, kind, p, sign,
            tx, tg, F, absphi, dcorr):
    j = n - i
    k = j - i + off  # line index of the south corner, centre and north node
    F_c = 0.0
    if kind == 3:
        F_c = 0.25 * (F[i - 1, j - 1] + F[i, j - 1] + F[i - 1, j] + F[i, j])
    rc = r_line[k]
    pred, corr = _box(rpsi[i - 1, j - 1], rpsi[i, j - 1], rpsi[i - 1, j],
                      rc, r_line[k - 1], r_line[k + 1], rc, rc,
                      omm_line[k], mt_line[k], h2, kind, p, sign, tx, tg, F_c)
    rpsi[i, j] = corr
    absphi[i] = abs(corr / rc)
    dcorr[i] = abs(corr - pred)


@njit(cache=True)
def _sweep_serial(rpsi, n, off, Nv, r_line, omm_line, mt_line, h2, kind, p,
                  sign, tx, tg, F, absphi, dcorr):
    lo = max(1, n - (Nv - 1))
    hi = min(rpsi.shape[0] - 1, n - 1)
    for i in range(lo, hi + 1):
        _update(rpsi, i, n, off, r_line, omm_line, mt_line, h2, kind, p,
                sign, tx, tg, F, absphi, dcorr)


@njit(cache=True, parallel=True)
def _sweep_parallel(rpsi, n, off, Nv, r_line, omm_line, mt_line, h2, kind, p,
                    sign, tx, tg, F, absphi, dcorr):
    lo = max(1, n - (Nv - 1))
    hi = min(rpsi.shape[0] - 1, n - 1)
    for i in prange(lo, hi + 1):
        _update(rpsi, i, n, off, r_line, omm_line, mt_line, h2, kind, p,
                sign, tx, tg, F, absphi, dcorr)


@dataclass(frozen=True)
class CellGeometry:
    """Radii at the corners and centre of one lattice cell.

    ``r_s`` is the past corner ``(i, j)``, ``r_a`` the corner ``(i + 1, j)``,
    ``r_b`` the corner ``(i, j + 1)`` and ``r_ne`` the future corner.
    """

    r_s: float
    r_a: float
    r_b: float
    r_ne: float
    r_c: float
    one_minus_mu_c: float
    mass_term_c: float

    @classmethod
    def from_grid(cls, grid: NullGrid, i: int, j: int) -> "CellGeometry":
        k = int(grid.line_index(i, j))
        rl = grid.r_line
        return cls(rl[k], rl[k - 1], rl[k + 1], rl[k], rl[k],
                   grid.one_minus_mu_line[k], grid.mass_term_line[k])


_EMPTY = np.zeros(1)
_EMPTY2 = np.zeros((1, 1))


def _table(nl: Nonlinearity):
    if nl.table is None:
        return _EMPTY, _EMPTY
    return nl.table


def step_box(rpsi_s: float, rpsi_a: float, rpsi_b: float, cell: CellGeometry,
             h: float, nl: Optional[Nonlinearity] = None,
             F_center: float = 0.0) -> float:
    """One diamond update; returns ``r psi`` at the north corner.

    Corner naming: ``s`` is the past corner ``(i, j)``, ``a`` is ``(i+1, j)``
    and ``b`` is ``(i, j+1)``.  ``F_center`` is used for ``prescribed_F``.
    Raises ``FloatingPointError`` if the result is not finite.
    """
    nl = nl or Nonlinearity()
    tx, tg = _table(nl)
    _, corr = _box(float(rpsi_s), float(rpsi_a), float(rpsi_b), cell.r_s,
                   cell.r_a, cell.r_b, cell.r_ne, cell.r_c,
                   cell.one_minus_mu_c, cell.mass_term_c, h * h, nl.code,
                   float(nl.p), float(nl.sign), tx, tg, float(F_center))
    if not np.isfinite(corr):
        raise FloatingPointError("non-finite box update")
    return corr


# --------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class Thresholds:
    """Blow-up detection parameters.

    ``phi_max=None`` means ``1e6 max(1, sup |phi_initial|)``.  The growth
    trigger fires when the diagonal maximum of ``|phi|`` grows by
    ``growth_factor`` over ``growth_window`` diagonals, stays above
    ``max(1, sup |phi_initial|)``, and its location moves by at most
    ``growth_radius`` cells in ``r_*``.
    """

    phi_max: Optional[float] = None
    growth_factor: float = 10.0
    growth_window: int = 4
    growth_radius: int = 4

    def to_dict(self):
        return asdict(self)


@dataclass
class RunReport:
    verdict: str
    reason: str
    nonlinearity: dict
    threshold: float
    sup_initial: float
    sup_bootstrap: float
    bootstrap_node: Optional[tuple]
    blow_up_node: Optional[tuple] = None
    blow_up_point: Optional[dict] = None
    growth_diagonal: Optional[int] = None
    end_diagonal: int = 0
    truncated: bool = False
    corrector_max: float = 0.0
    wall_time: float = 0.0
    diagonals: np.ndarray = field(default=None, repr=False)
    t: np.ndarray = field(default=None, repr=False)
    max_abs_phi: np.ndarray = field(default=None, repr=False)
    argmax_i: np.ndarray = field(default=None, repr=False)
    bootstrap_running: np.ndarray = field(default=None, repr=False)
    energy: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def completed(self) -> bool:
        return self.verdict == "completed"

    def to_dict(self, series: bool = True, timing: bool = True) -> dict:
        d = {k: getattr(self, k) for k in (
            "verdict", "reason", "nonlinearity", "threshold", "sup_initial",
            "sup_bootstrap", "bootstrap_node", "blow_up_node", "blow_up_point",
            "growth_diagonal", "end_diagonal", "truncated", "corrector_max")}
        for k in ("bootstrap_node", "blow_up_node"):
            if d[k] is not None:
                d[k] = [int(x) for x in d[k]]
        if timing:
            d["wall_time"] = self.wall_time
        if series:
            for k in ("diagonals", "t", "max_abs_phi", "argmax_i",
                      "bootstrap_running", "energy"):
                a = getattr(self, k)
                d[k] = None if a is None else np.asarray(a).tolist()
        return _plain(d)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _diag_values(a: np.ndarray, grid: NullGrid, n: int):
    i, j = grid.diagonal(n)
    return i, a[i, j]


def evolve(grid: NullGrid, init: FieldState, nl: Optional[Nonlinearity] = None,
           thresholds: Optional[Thresholds] = None, *, parallel: bool = False,
           threads: Optional[int] = None, energies: bool = True,
           progress: Optional[Callable[[dict], None]] = None):
    """Fill the rectangle in causal (diagonal) order from a seeded state.

    Parameters
    ----------
    grid : NullGrid
    init : FieldState
        Seed from :func:`rnwave.fields.cauchy_to_characteristic` or
        :func:`rnwave.fields.seed_slice`; its first two diagonals and both rays
        beyond them must be finite.
    nl : Nonlinearity, optional
        Defaults to the homogeneous equation.
    thresholds : Thresholds, optional
    parallel : bool
        Use the multi-threaded diagonal sweep; ``threads`` caps the pool.
    energies : bool
        Attach the slice energy of every diagonal to the report.
    progress : callable, optional
        Called with one record per computed diagonal.

    Returns
    -------
    state : FieldState
        Frozen result; nodes past ``end_diagonal`` are NaN after an early stop.
    report : RunReport
    """
    t_start = time.perf_counter()
    nl = nl or Nonlinearity()
    th = thresholds or Thresholds()
    if init.grid is not grid:
        raise GridError("initial state lives on a different grid")
    n0 = init.start_diagonal
    Nu, Nv = grid.shape
    nd = grid.n_diagonals
    rpsi = np.array(init.rpsi, dtype=float, copy=True)
    r = grid.r
    F = nl.source_nodes(grid)
    F_arg = np.ascontiguousarray(F) if F is not None else _EMPTY2
    tx, tg = _table(nl)
    if parallel and threads:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    sweep = _sweep_parallel if parallel else _sweep_serial

    vplus = np.maximum(grid.v, 1.0)
    n_boot = grid.first_diagonal_from(1.0)
    t_diag = grid.time_of_diagonal(np.arange(nd))
    dmax = np.zeros(nd)
    darg = np.full(nd, -1, dtype=np.int64)
    bsup_diag = np.zeros(nd)
    bnode = np.full((nd, 2), -1, dtype=np.int64)
    cmax = 0.0

    def record(n, i, vals):
        j = n - i
        ok = np.isfinite(vals)
        if ok.any():
            m = int(np.argmax(np.where(ok, vals, -1.0)))
            dmax[n], darg[n] = vals[m], i[m]
            if n >= n_boot:
                w = np.where(ok, vals * vplus[j], -1.0)
                b = int(np.argmax(w))
                bsup_diag[n], bnode[n] = w[b], (i[b], j[b])
        return bool(np.isnan(vals).any()), bool(np.isposinf(vals).any())

    start_n = n0 + 2 if n0 + 1 < nd else nd
    for n in range(n0, min(start_n, nd)):
        i, vals = _diag_values(rpsi, grid, n)
        if not np.all(np.isfinite(vals)):
            raise GridError(f"seed diagonal {n} is not finite")
        record(n, i, np.abs(vals / r[i, n - i]))
    # rays beyond the seed are data too
    ray_phi = np.concatenate([np.abs(rpsi[0, start_n:] / r[0, start_n:]),
                              np.abs(rpsi[start_n:, 0] / r[start_n:, 0])])
    if not np.all(np.isfinite(ray_phi)):
        raise GridError("ray data are not finite")
    sup_init = float(max(dmax[n0:start_n].max(initial=0.0),
                         ray_phi.max(initial=0.0)))
    phi_max = th.phi_max if th.phi_max is not None else 1e6 * max(1.0, sup_init)
    floor = max(1.0, sup_init)

    verdict, reason = "completed", ""
    node = None
    growth_at = None
    end = nd - 1
    absphi = np.zeros(Nu)
    dcorr = np.zeros(Nu)
    off = Nu - 1
    h2 = grid.h * grid.h
    for n in range(start_n, nd):
        sweep(rpsi, n, off, Nv, grid.r_line, grid.one_minus_mu_line,
              grid.mass_term_line, h2, nl.code, float(nl.p), float(nl.sign),
              tx, tg, F_arg, absphi, dcorr)
        lo, hi = max(1, n - (Nv - 1)), min(Nu - 1, n - 1)
        i = np.arange(lo, hi + 1)
        vals = absphi[lo:hi + 1].copy()
        # ray nodes on this diagonal
        ray = []
        if n < Nv:
            ray.append((0, abs(rpsi[0, n] / r[0, n])))
        if n < Nu:
            ray.append((n, abs(rpsi[n, 0] / r[n, 0])))
        if ray:
            i = np.concatenate([i, [x[0] for x in ray]]).astype(np.int64)
            vals = np.concatenate([vals, [x[1] for x in ray]])
        has_nan, _ = record(n, i, vals)
        if hi >= lo:
            cmax = max(cmax, float(np.nanmax(dcorr[lo:hi + 1])))
        if progress is not None:
            progress({"diagonal": n, "t": t_diag[n], "max_abs_phi": dmax[n]})
        w = th.growth_window
        if (growth_at is None and n - w >= n0 and dmax[n] > floor
                and dmax[n] > th.growth_factor * dmax[n - w]
                and darg[n] >= 0 and darg[n - w] >= 0):
            k_now = (n - darg[n]) - darg[n]
            k_then = (n - w - darg[n - w]) - darg[n - w]
            if abs(k_now - k_then) <= 2 * th.growth_radius:
                growth_at = n
        crossed = dmax[n] > phi_max or np.isposinf(vals).any()
        if crossed:
            a = int(darg[n]) if darg[n] >= 0 else int(i[np.argmax(vals)])
            node = (a, n - a)
            end = n
            if growth_at is not None:
                verdict, reason = "blow_up", "threshold crossed after localized growth"
            else:
                verdict = "numerical_failure"
                reason = "threshold crossed without localized fast growth (slow instability)"
            break
        if has_nan:
            verdict, reason, end = "numerical_failure", "non-finite value", n
            a = int(i[np.argmax(np.isnan(vals))])
            node = (a, n - a)
            break
    if end < nd - 1:
        mask = grid.diagonal_index > end
        rpsi[mask] = np.nan

    if F is None and not nl.is_linear:
        with np.errstate(invalid="ignore", over="ignore"):
            F = nl(rpsi / r)
    elif F is not None:
        F = np.array(F, copy=True)
    state = FieldState(grid, rpsi, start_diagonal=n0, end_diagonal=end,
                       source=F, truncated=init.truncated,
                       slice_theta=init.slice_theta, slice_zeta=init.slice_zeta)
    state.freeze()

    running = np.maximum.accumulate(bsup_diag)
    b_idx = int(np.argmax(bsup_diag)) if bsup_diag.max() > 0 else None
    diags = np.arange(n0, end + 1)
    energy = None
    if energies and np.isfinite(dmax[n0:end + 1]).all():
        from .diagnostics import energy_series
        energy = energy_series(state, diags)
    point = None
    if node is not None:
        p = grid.node(*node)
        point = {"u": p.u, "v": p.v, "t": p.t, "r_star": p.r_star, "r": p.r}
    report = RunReport(
        verdict=verdict, reason=reason, nonlinearity=nl.to_dict(),
        threshold=float(phi_max), sup_initial=sup_init,
        sup_bootstrap=float(bsup_diag.max()),
        bootstrap_node=tuple(int(x) for x in bnode[b_idx]) if b_idx is not None else None,
        blow_up_node=node if verdict == "blow_up" else None,
        blow_up_point=point if verdict == "blow_up" else None,
        growth_diagonal=growth_at, end_diagonal=end, truncated=init.truncated,
        corrector_max=cmax, wall_time=time.perf_counter() - t_start,
        diagonals=diags, t=t_diag[diags], max_abs_phi=dmax[diags],
        argmax_i=darg[diags], bootstrap_running=running[diags], energy=energy)
    return state, report


def _source_at(F, grid: NullGrid, n: int, t: float):
    """Source values at the nodes of diagonal ``n`` evaluated at time ``t``.

    A callable is evaluated at ``(t - r_*, t + r_*)``; a node array is
    interpolated from diagonal ``n - 1`` (average of the two neighbours).
    """
    i, j = grid.diagonal(n)
    k = grid.line_index(i, j)
    if callable(F):
        rs = grid.r_star_line[k]
        return np.asarray(F(t - rs, t + rs, grid.r_line[k]), dtype=float)
    F = np.asarray(F, dtype=float)
    left = np.where(i >= 1, F[np.maximum(i - 1, 0), j], np.nan)
    down = np.where(j >= 1, F[i, np.maximum(j - 1, 0)], np.nan)
    out = np.nanmean(np.stack([left, down]), axis=0)
    return np.nan_to_num(out)


def seed_prescribed(grid: NullGrid, nl: Nonlinearity, t_init: float,
                    value=None, velocity=None, accel=None) -> FieldState:
    """Seed for a prescribed-source run from Cauchy data on ``{t = t_init}``.

    ``value``, ``velocity`` and ``accel`` are as in
    :func:`rnwave.fields.seed_slice` and default to zero; the source
    contribution ``(1 - mu) r F`` is added to the acceleration.
    """
    n0 = grid.diagonal_of_time(t_init)
    zero = lambda r, rs: np.zeros_like(r)
    value, velocity, accel = value or zero, velocity or zero, accel or zero
    i, j = grid.diagonal(n0 + 1)
    k = grid.line_index(i, j)
    src = (grid.one_minus_mu_line[k] * grid.r_line[k]
           * _source_at(nl.source, grid, n0 + 1, t_init))
    rpsi = seed_slice(grid, n0, value, velocity,
                      lambda r, rs: np.asarray(accel(r, rs), dtype=float) + src)
    return FieldState(grid, rpsi, start_diagonal=n0)


def evolve_duhamel_slice(grid: NullGrid, F, s: float, **kwargs) -> FieldState:
    """Homogeneous evolution of the data ``psi = 0``, ``d_t psi = (1 - mu) F``
    on ``{t = s}``.

    ``F`` is a node array or a callable ``f(u, v, r)``.  Keyword arguments
    are passed to :func:`evolve`.
    """
    n0 = grid.diagonal_of_time(s)
    if n0 > grid.n_diagonals - 2:
        raise GridError("slice at the top corner")
    i, j = grid.diagonal(n0 + 1)
    k = grid.line_index(i, j)
    vel = grid.one_minus_mu_line[k] * grid.r_line[k] * _source_at(F, grid, n0 + 1, s)
    # r psi vanishes on the slice, so the Taylor polynomial of the seed is
    # dt V + dt^3/6 (V'' - W V); neighbours on a diagonal are h apart in r_*
    lap = np.zeros_like(vel)
    if vel.size >= 3:
        lap[1:-1] = (vel[:-2] - 2.0 * vel[1:-1] + vel[2:]) / grid.h ** 2
        lap[0], lap[-1] = lap[1], lap[-2]
    W = 4.0 * grid.mass_term_line[k] / grid.r_line[k]
    dt = 0.5 * grid.h
    vel = vel + dt * dt / 6.0 * (lap - W * vel)
    zero = lambda r, rs: np.zeros_like(r)
    rpsi = seed_slice(grid, n0, zero, lambda r, rs: vel)
    seed = FieldState(grid, rpsi, start_diagonal=n0)
    kwargs.setdefault("energies", False)
    state, _ = evolve(grid, seed, Nonlinearity(), **kwargs)
    return state
