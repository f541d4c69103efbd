"""Double-null lattice, field storage and initial-data constructors.

The lattice is uniform with ``du = dv = h``.  Because the background is
static, every geometric quantity depends on the node only through
``k = j - i`` (equivalently ``r_* = (v - u)/2``), so the geometry cache is a
one-dimensional line of length ``Nu + Nv - 1`` and the two-dimensional arrays
exposed by :class:`NullGrid` are read-only Toeplitz views of it.  The centre of
the cell with south corner ``(i, j)`` has the same ``r_*`` as that corner, so
cell-centre geometry is read off the same line.

Nodes outside the domain of a :class:`FieldState` (below the start diagonal,
or beyond the last computed diagonal after an early stop) hold NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .exceptions import GridError, InversionError
from .geometry import Background, horizon_gap, one_minus_mu, tortoise

_DIAG_TOL = 1e-7


def _toeplitz(line: np.ndarray, Nu: int, Nv: int) -> np.ndarray:
    s = line.strides[0]
    view = as_strided(line[Nu - 1:], shape=(Nu, Nv), strides=(-s, s),
                      writeable=False)
    return view


@dataclass(frozen=True)
class NullPoint:
    u: float
    v: float
    t: float
    r_star: float
    r: float
    gap: float


@dataclass(eq=False)
class NullGrid:
    """Uniform double-null lattice over a characteristic rectangle.

    Node ``(i, j)`` sits at ``u = u0 + i h``, ``v = v0 + j h``.  Construct
    with :func:`build_grid` or :func:`cauchy_grid`.
    """

    background: Background
    u0: float
    v0: float
    Nu: int
    Nv: int
    h: float
    tol: float
    r_star_line: np.ndarray = field(repr=False)
    gap_line: np.ndarray = field(repr=False)

    @property
    def du(self) -> float:
        return self.h

    @property
    def dv(self) -> float:
        return self.h

    @property
    def shape(self):
        return (self.Nu, self.Nv)

    @property
    def n_diagonals(self) -> int:
        return self.Nu + self.Nv - 1

    @cached_property
    def r_line(self) -> np.ndarray:
        return self.background.r_plus + self.gap_line

    @cached_property
    def one_minus_mu_line(self) -> np.ndarray:
        return one_minus_mu(self.background, gap=self.gap_line)

    @cached_property
    def mass_term_line(self) -> np.ndarray:
        """``(M - e^2/r)(1 - mu)/(2 r^2)``, the potential coefficient for ``r psi``."""
        bg, r = self.background, self.r_line
        return (bg.mass - bg.charge ** 2 / r) * self.one_minus_mu_line / (2.0 * r * r)

    @property
    def u(self) -> np.ndarray:
        return self.u0 + self.h * np.arange(self.Nu)

    @property
    def v(self) -> np.ndarray:
        return self.v0 + self.h * np.arange(self.Nv)

    @property
    def r_star(self) -> np.ndarray:
        return _toeplitz(self.r_star_line, self.Nu, self.Nv)

    @property
    def r(self) -> np.ndarray:
        return _toeplitz(self.r_line, self.Nu, self.Nv)

    @property
    def gap(self) -> np.ndarray:
        return _toeplitz(self.gap_line, self.Nu, self.Nv)

    @property
    def one_minus_mu(self) -> np.ndarray:
        return _toeplitz(self.one_minus_mu_line, self.Nu, self.Nv)

    @property
    def t(self) -> np.ndarray:
        return 0.5 * (self.u[:, None] + self.v[None, :])

    @property
    def diagonal_index(self) -> np.ndarray:
        return np.arange(self.Nu)[:, None] + np.arange(self.Nv)[None, :]

    def line_index(self, i, j):
        return np.asarray(j) - np.asarray(i) + self.Nu - 1

    def node(self, i: int, j: int) -> NullPoint:
        if not (0 <= i < self.Nu and 0 <= j < self.Nv):
            raise IndexError((i, j))
        k = self.line_index(i, j)
        u, v = self.u0 + i * self.h, self.v0 + j * self.h
        return NullPoint(u, v, 0.5 * (u + v), float(self.r_star_line[k]),
                         float(self.r_line[k]), float(self.gap_line[k]))

    def time_of_diagonal(self, n: int) -> float:
        return 0.5 * (self.u0 + self.v0 + n * self.h)

    def diagonal_of_time(self, t: float) -> int:
        """Index ``n = i + j`` of the diagonal carrying the slice ``{t = const}``.

        Raises
        ------
        GridError
            If the slice misses the rectangle or does not pass through nodes.
        """
        x = (2.0 * t - self.u0 - self.v0) / self.h
        n = int(round(x))
        if abs(x - n) > _DIAG_TOL * max(1.0, abs(x)):
            lo = self.time_of_diagonal(int(np.floor(x)))
            raise GridError(
                f"slice t={t!r} is not a lattice diagonal; nearest are "
                f"t={lo!r} and t={lo + 0.5 * self.h!r}")
        if not 0 <= n < self.n_diagonals:
            raise GridError(f"slice t={t!r} outside the grid rectangle")
        return n

    def first_diagonal_from(self, t: float) -> int:
        """Smallest diagonal index whose time is ``>= t`` up to rounding."""
        if not np.isfinite(t):
            return 0 if t < 0 else self.n_diagonals
        x = (2.0 * t - self.u0 - self.v0) / self.h
        return int(np.ceil(x - _DIAG_TOL * max(1.0, abs(x))))

    def not_before(self, t: float) -> np.ndarray:
        """Node mask of ``t_node >= t`` decided on diagonal indices; the
        node times ``(u + v)/2`` themselves carry rounding."""
        return self.diagonal_index >= self.first_diagonal_from(t)

    def diagonal(self, n: int):
        """Index arrays ``(i, j)`` of the nodes on diagonal ``n``, ordered by ``i``."""
        i = np.arange(max(0, n - self.Nv + 1), min(self.Nu - 1, n) + 1)
        return i, n - i

    def u_index(self, u: float) -> int:
        return int(round((u - self.u0) / self.h))

    def v_index(self, v: float) -> int:
        return int(round((v - self.v0) / self.h))

    def to_dict(self) -> dict:
        return {"u0": self.u0, "v0": self.v0, "Nu": self.Nu, "Nv": self.Nv,
                "h": self.h}


def build_grid(bg: Background, u0: float, v0: float, Nu: int, Nv: int,
               h: float, tol: float = 1e-12) -> NullGrid:
    """Lattice with SW corner ``(u0, v0)``, ``Nu x Nv`` nodes and spacing ``h``."""
    if not (np.isfinite(h) and h > 0):
        raise GridError(f"spacing h must be positive and finite, got {h!r}")
    if int(Nu) != Nu or int(Nv) != Nv or Nu < 2 or Nv < 2:
        raise GridError(f"node counts must be integers >= 2, got {(Nu, Nv)!r}")
    Nu, Nv = int(Nu), int(Nv)
    k = np.arange(-(Nu - 1), Nv)
    r_star = 0.5 * (float(v0) - float(u0)) + 0.5 * h * k
    try:
        gap = horizon_gap(bg, r_star, tol=tol)
    except InversionError as exc:
        bad = float(np.atleast_1d(exc.payload.get("r_star", [np.nan]))[0])
        kk = int(np.argmin(np.abs(r_star - bad))) - (Nu - 1)
        raise GridError(
            f"tortoise inversion failed at node {(max(0, -kk), max(0, kk))}: "
            f"{exc}") from exc
    positive = gap > 0
    if np.any(np.diff(gap[positive]) <= 0) or np.any(np.diff(gap) < 0):
        raise GridError("radius is not monotone along the lattice")
    return NullGrid(bg, float(u0), float(v0), Nu, Nv, float(h), tol,
                    r_star, gap)


def cauchy_grid(bg: Background, h: float, t_slice: float, r_star_in: float,
                r_star_out: float, v_max: float, u_max: float,
                tol: float = 1e-12) -> NullGrid:
    """Lattice whose south-west staircase is the slice ``{t = t_slice}``.

    The slice diagonal spans ``r_* in [r_star_in, r_star_in + n0 h]`` with
    ``n0 = ceil((r_star_out - r_star_in)/h)``; the rectangle extends to
    ``u <= u_max`` and ``v <= v_max``.  The rectangle may cut the slice; the
    part beyond the cut lies outside its domain of dependence.  Halving ``h`` keeps every node of the
    coarse lattice when ``(r_star_out - r_star_in)/h`` is an integer.
    """
    if not h > 0:
        raise GridError("h must be positive")
    n0 = int(np.ceil((r_star_out - r_star_in) / h - 1e-9))
    v0 = t_slice + r_star_in
    u0 = t_slice - r_star_in - n0 * h
    Nv = int(np.floor((v_max - v0) / h + 1e-9)) + 1
    Nu = int(np.floor((u_max - u0) / h + 1e-9)) + 1
    if Nu < 2 or Nv < 2 or Nu + Nv - 2 < n0 + 3:
        raise GridError("rectangle too small to evolve from the slice")
    return build_grid(bg, u0, v0, Nu, Nv, h, tol)


# --------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class BumpProfile:
    """``eps (1 - s^2)^2`` with ``s = (x - center)/half_width`` on ``|s| <= 1``.

    The profile is C^1 with compact support ``[center - w, center + w]``.
    ``x`` is the area radius ``r`` (default) or, with
    ``coordinate="r_star"``, the tortoise coordinate, which is the natural
    choice for packets hugging the horizon.  ``value``, ``d1`` and ``d2``
    take ``x``.
    """

    amplitude: float
    center: float
    half_width: float
    coordinate: str = "r"

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")
        if self.coordinate not in ("r", "r_star"):
            raise ValueError("coordinate must be 'r' or 'r_star'")

    @property
    def support(self):
        return (self.center - self.half_width, self.center + self.half_width)

    def _s(self, r):
        s = (np.asarray(r, dtype=float) - self.center) / self.half_width
        return s, np.abs(s) <= 1.0

    def value(self, r):
        s, inside = self._s(r)
        return np.where(inside, self.amplitude * (1.0 - s * s) ** 2, 0.0)

    def d1(self, r):
        s, inside = self._s(r)
        return np.where(inside, -4.0 * self.amplitude * s * (1.0 - s * s)
                        / self.half_width, 0.0)

    def d2(self, r):
        s, inside = self._s(r)
        return np.where(inside, self.amplitude * (12.0 * s * s - 4.0)
                        / self.half_width ** 2, 0.0)

    def to_dict(self):
        return {"amplitude": self.amplitude, "center": self.center,
                "half_width": self.half_width, "coordinate": self.coordinate}


VELOCITY_KINDS = ("time_symmetric", "outgoing", "ingoing")
NORMALIZATIONS = ("coordinate", "unit_normal")


@dataclass(frozen=True)
class InitialData:
    """Initial data for :func:`rnwave.evolution.evolve`.

    ``kind="cauchy_slice"``: a radial profile ``phi0`` on ``{t = t_init}``
    with normal derivative ``phi1`` chosen by ``velocity``: zero, or
    ``-+ d phi0/d r_*`` (approximately outgoing / ingoing).
    ``normalization`` says whether ``phi1`` is the coordinate ``d_t`` derivative
    or the derivative along the unit normal, in which case
    ``d_t psi = (1 - mu)^{1/2} phi1``.

    ``kind="characteristic"``: samples of ``r psi`` on the rays ``u = u0``
    (``ray_u0``, indexed by ``j``) and ``v = v0`` (``ray_v0``, indexed by ``i``).
    """

    kind: str
    profile: Optional[BumpProfile] = None
    t_init: float = 1.0
    velocity: str = "time_symmetric"
    normalization: str = "coordinate"
    ray_u0: Optional[np.ndarray] = None
    ray_v0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "cauchy_slice":
            if self.profile is None:
                raise ValueError("cauchy_slice data need a profile")
            if self.velocity not in VELOCITY_KINDS:
                raise ValueError(f"velocity must be one of {VELOCITY_KINDS}")
            if self.normalization not in NORMALIZATIONS:
                raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        elif self.kind == "characteristic":
            if self.ray_u0 is None or self.ray_v0 is None:
                raise ValueError("characteristic data need both rays")
            a, b = np.asarray(self.ray_u0), np.asarray(self.ray_v0)
            if not np.isclose(a[0], b[0], rtol=1e-12, atol=1e-300):
                raise ValueError("characteristic data disagree at the corner")
        else:
            raise ValueError(f"unknown initial data kind {self.kind!r}")

    @property
    def support_radius(self) -> float:
        return self.profile.support[1] if self.profile is not None else np.inf

    def to_dict(self) -> dict:
        if self.kind == "cauchy_slice":
            return {"kind": self.kind, "profile": self.profile.to_dict(),
                    "t_init": self.t_init, "velocity": self.velocity,
                    "normalization": self.normalization}
        return {"kind": self.kind,
                "ray_u0": np.asarray(self.ray_u0, dtype=float).tolist(),
                "ray_v0": np.asarray(self.ray_v0, dtype=float).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "InitialData":
        d = dict(d)
        kind = d.pop("kind")
        if kind == "cauchy_slice":
            prof = BumpProfile(**d.pop("profile"))
            return cls(kind, profile=prof, **d)
        return cls(kind, ray_u0=np.asarray(d["ray_u0"], dtype=float),
                   ray_v0=np.asarray(d["ray_v0"], dtype=float))


def bump_data(amplitude: float, center: float, half_width: float,
              t_init: float = 1.0, velocity: str = "time_symmetric",
              normalization: str = "coordinate",
              coordinate: str = "r") -> InitialData:
    """C^1 compactly supported bump on the slice ``{t = t_init}``."""
    prof = BumpProfile(amplitude, center, half_width, coordinate)
    return InitialData("cauchy_slice", prof, t_init=t_init, velocity=velocity,
                       normalization=normalization)


def characteristic_data(ray_u0, ray_v0) -> InitialData:
    return InitialData("characteristic", ray_u0=np.asarray(ray_u0, dtype=float),
                       ray_v0=np.asarray(ray_v0, dtype=float))


# --------------------------------------------------------------------------
# field state


def _shift(a: np.ndarray, di: int, dj: int) -> np.ndarray:
    """``out[i, j] = a[i + di, j + dj]``, NaN where the index leaves the array."""
    out = np.full_like(a, np.nan)
    Nu, Nv = a.shape
    src_i = slice(max(di, 0), Nu + min(di, 0))
    dst_i = slice(max(-di, 0), Nu + min(-di, 0))
    src_j = slice(max(dj, 0), Nv + min(dj, 0))
    dst_j = slice(max(-dj, 0), Nv + min(-dj, 0))
    out[dst_i, dst_j] = a[src_i, src_j]
    return out


def lattice_derivative(f: np.ndarray, di: int, dj: int, spacing: float) -> np.ndarray:
    """Second-order derivative of ``f`` along the lattice direction ``(di, dj)``.

    Centred where both neighbours exist, otherwise the one-sided three-point
    stencil on whichever side lies inside the domain.  Out-of-domain nodes are
    NaN, so the admissible stencil is selected by finiteness.
    """
    fp, fm = _shift(f, di, dj), _shift(f, -di, -dj)
    central = (fp - fm) / (2.0 * spacing)
    out = central
    need = ~np.isfinite(out) & np.isfinite(f)
    if need.any():
        fpp, fmm = _shift(f, 2 * di, 2 * dj), _shift(f, -2 * di, -2 * dj)
        fwd = (-3.0 * f + 4.0 * fp - fpp) / (2.0 * spacing)
        bwd = (3.0 * f - 4.0 * fm + fmm) / (2.0 * spacing)
        out = np.where(np.isfinite(central), central,
                       np.where(np.isfinite(fwd), fwd, bwd))
    return out


@dataclass(eq=False)
class FieldState:
    """Grid samples of ``r psi`` and derived quantities.

    ``rpsi`` is the only stored field; ``phi``, ``theta = r d_v psi`` and
    ``zeta = r d_u psi`` are derived on access.  States returned by
    :func:`rnwave.evolution.evolve` are frozen (``rpsi`` is read-only).

    Attributes
    ----------
    start_diagonal, end_diagonal : int
        First and last lattice diagonal ``i + j`` inside the domain.
    source : ndarray or None
        ``F`` at the nodes: ``G(phi)`` for nonlinear runs, the prescribed
        source for inhomogeneous linear runs.
    truncated : bool
        Whether the data support reached the edge of the initial slice.
    slice_theta, slice_zeta : ndarray or None
        For Cauchy-seeded states, ``theta`` and ``zeta`` on the start
        diagonal (ordered by ``i``) from the analytic data, where lattice
        stencils are not yet available.
    """

    grid: NullGrid
    rpsi: np.ndarray
    start_diagonal: int = 0
    end_diagonal: Optional[int] = None
    source: Optional[np.ndarray] = None
    truncated: bool = False
    slice_theta: Optional[np.ndarray] = field(default=None, repr=False)
    slice_zeta: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.rpsi.shape != self.grid.shape:
            raise GridError("field shape does not match grid")
        if self.end_diagonal is None:
            self.end_diagonal = self.grid.n_diagonals - 1

    def freeze(self) -> "FieldState":
        self.rpsi.setflags(write=False)
        if self.source is not None:
            self.source.setflags(write=False)
        return self

    @property
    def phi(self) -> np.ndarray:
        return self.rpsi / self.grid.r

    @property
    def valid(self) -> np.ndarray:
        n = self.grid.diagonal_index
        return (n >= self.start_diagonal) & (n <= self.end_diagonal)

    @cached_property
    def _null_derivatives(self):
        phi = self.phi
        r = self.grid.r
        h = self.grid.h
        zeta = r * lattice_derivative(phi, 1, 0, h)
        theta = r * lattice_derivative(phi, 0, 1, h)
        if self.slice_theta is not None:
            i, j = self.grid.diagonal(self.start_diagonal)
            theta[i, j] = self.slice_theta
            zeta[i, j] = self.slice_zeta
        return theta, zeta

    @property
    def theta(self) -> np.ndarray:
        """``r d_v psi``."""
        return self._null_derivatives[0]

    @property
    def zeta(self) -> np.ndarray:
        """``r d_u psi``."""
        return self._null_derivatives[1]

    @cached_property
    def static_derivatives(self):
        """``(d_t psi, d_{r_*} psi)`` from stencils along the lattice diagonals.

        Independent of ``theta``/``zeta``: ``d_t`` differences nodes
        ``(i +- 1, j +- 1)``, ``d_{r_*}`` nodes ``(i -+ 1, j +- 1)``.  At the
        two rectangle corners where a diagonal stencil leaves the lattice on
        both sides, ``d_t = d_u + d_v`` and ``d_{r_*} = d_v - d_u`` from the
        axis stencils.
        """
        phi = self.phi
        h = self.grid.h
        dt = lattice_derivative(phi, 1, 1, h)
        dr = lattice_derivative(phi, -1, 1, h)
        miss = np.isfinite(phi) & ~(np.isfinite(dt) & np.isfinite(dr))
        if miss.any():
            du = lattice_derivative(phi, 1, 0, h)
            dv = lattice_derivative(phi, 0, 1, h)
            dt = np.where(miss & ~np.isfinite(dt), du + dv, dt)
            dr = np.where(miss & ~np.isfinite(dr), dv - du, dr)
        return dt, dr

    @property
    def t_slice(self) -> float:
        return self.grid.time_of_diagonal(self.start_diagonal)


def _slice_nodes(grid: NullGrid, n: int):
    i, j = grid.diagonal(n)
    k = grid.line_index(i, j)
    return i, j, k


def seed_slice(grid: NullGrid, n0: int, value, velocity, accel=None,
               fill_rays: bool = True) -> np.ndarray:
    """Two-diagonal seed for a slice ``{t = t(n0)}``.

    ``value``, ``velocity`` and ``accel`` are callables of ``(r, r_star)``
    returning ``r psi``, ``d_t(r psi)`` and ``d_t^2(r psi)`` on the slice.
    Diagonal ``n0`` gets ``value``; diagonal ``n0 + 1``, which sits ``h/2``
    later at the interleaved ``r_*``, gets the second-order Taylor
    polynomial.  Ray nodes beyond the seed are zero when ``fill_rays``.
    """
    if not 0 <= n0 <= grid.n_diagonals - 2:
        raise GridError(f"slice diagonal {n0} outside grid")
    rpsi = np.full(grid.shape, np.nan)
    dt = 0.5 * grid.h
    i, j, k = _slice_nodes(grid, n0)
    rpsi[i, j] = value(grid.r_line[k], grid.r_star_line[k])
    i, j, k = _slice_nodes(grid, n0 + 1)
    r, rs = grid.r_line[k], grid.r_star_line[k]
    seed = value(r, rs) + dt * velocity(r, rs)
    if accel is not None:
        seed = seed + 0.5 * dt * dt * accel(r, rs)
    rpsi[i, j] = seed
    if fill_rays:
        rpsi[0, n0 + 2:] = 0.0
        rpsi[n0 + 2:, 0] = 0.0
    return rpsi


_SIMPSON_PANELS = 16


def _dalembert_seed(grid: NullGrid, r, rs, value, velocity, forcing, moving: bool):
    """``r psi(t + h/2)`` from slice data in d'Alembert form.

    ``X(x, t + d) = (X0(x - d) + X0(x + d))/2 + (1/2) int_{x-d}^{x+d} X1
    + d^2/2 forcing``, where ``forcing`` is the potential and source part of
    ``d_t^2 X``.  The velocity integral uses composite Simpson on
    ``_SIMPSON_PANELS`` panels.
    """
    bg = grid.background
    d = 0.5 * grid.h
    at = lambda x: (bg.r_plus + horizon_gap(bg, x, tol=grid.tol), x)
    rm, xm = at(rs - d)
    rp, xp = at(rs + d)
    out = 0.5 * (value(rm, xm) + value(rp, xp))
    if moving:
        m = _SIMPSON_PANELS
        s = np.linspace(-1.0, 1.0, m + 1)
        wts = np.ones(m + 1)
        wts[1:-1:2], wts[2:-1:2] = 4.0, 2.0
        xs = rs[None, :] + d * s[:, None]
        rr, _ = at(xs.ravel())
        V = np.asarray(velocity(rr, xs.ravel()), dtype=float).reshape(xs.shape)
        out = out + 0.5 * (2.0 * d / (3.0 * m)) * (wts[:, None] * V).sum(axis=0)
    return out + 0.5 * d * d * np.asarray(forcing(r, rs), dtype=float)


def cauchy_to_characteristic(data: InitialData, grid: NullGrid,
                             nonlinearity=None) -> FieldState:
    """Seed the staircase through ``{t = data.t_init}`` from Cauchy data.

    The second diagonal carries ``r psi(t + h/2)`` in d'Alembert form: the
    average of ``r phi0`` at ``r_* -+ h/2``, half the integral of
    ``r d_t psi`` over that interval, and ``h^2/8`` times the forcing
    ``-W r phi0 + (1 - mu) r G(phi0)`` with ``W = 2(M - e^2/r)(1 - mu)/r^3``.
    Rays beyond the slice carry zero; if the profile support is not strictly
    inside the slice's ``r_*`` range the state is flagged ``truncated``.
    """
    if data.kind == "characteristic":
        rpsi = np.full(grid.shape, np.nan)
        a = np.asarray(data.ray_u0, dtype=float)
        b = np.asarray(data.ray_v0, dtype=float)
        if a.shape != (grid.Nv,) or b.shape != (grid.Nu,):
            raise GridError("ray samples do not match grid")
        rpsi[0, :] = a
        rpsi[:, 0] = b
        return FieldState(grid, rpsi, start_diagonal=0)

    n0 = grid.diagonal_of_time(data.t_init)
    if n0 > grid.n_diagonals - 3:
        raise GridError("slice too close to the top corner")
    bg, prof = grid.background, data.profile
    M, e2 = bg.mass, bg.charge ** 2
    in_rstar = prof.coordinate == "r_star"

    def omm(r):
        return one_minus_mu(bg, r)

    def profile_derivs(r, rs):
        """``phi0`` and its first two ``r_*`` derivatives."""
        if in_rstar:
            return prof.value(rs), prof.d1(rs), prof.d2(rs)
        w = omm(r)
        dw = 2.0 * (M - e2 / r) / (r * r)
        d1 = prof.d1(r)
        return prof.value(r), w * d1, w * (w * prof.d2(r) + dw * d1)

    def dt_psi(r, rs):
        if data.velocity == "time_symmetric":
            return np.zeros_like(r)
        sgn = -1.0 if data.velocity == "outgoing" else 1.0
        v = sgn * profile_derivs(r, rs)[1]
        if data.normalization == "unit_normal":
            v = np.sqrt(np.maximum(omm(r), 0.0)) * v
        return v

    def value(r, rs):
        return r * profile_derivs(r, rs)[0]

    def velocity(r, rs):
        return r * dt_psi(r, rs)

    def forcing(r, rs):
        f0 = profile_derivs(r, rs)[0]
        w = omm(r)
        out = -2.0 * (M - e2 / r) * w / (r * r) * f0
        if nonlinearity is not None and not nonlinearity.is_linear:
            out = out + w * r * nonlinearity(f0)
        return out

    rpsi = seed_slice(grid, n0, value, velocity)
    # replace the Taylor seed on the second diagonal by the d'Alembert form,
    # which stays second order across the kinks of a C^1 profile
    i, j, k = _slice_nodes(grid, n0 + 1)
    rpsi[i, j] = _dalembert_seed(grid, grid.r_line[k], grid.r_star_line[k],
                                 value, velocity, forcing,
                                 data.velocity != "time_symmetric")
    i, j, k = _slice_nodes(grid, n0)
    r, rs = grid.r_line[k], grid.r_star_line[k]
    d_t, d_rs = dt_psi(r, rs), profile_derivs(r, rs)[1]
    slice_theta = 0.5 * r * (d_t + d_rs)
    slice_zeta = 0.5 * r * (d_t - d_rs)
    # rays: exterior data vanish only if the support sits inside the slice range
    # an edge of the slice that ends on a rectangle side (rather than on a
    # ray) bounds the domain of dependence and cannot truncate the data
    rs_out = grid.r_star_line[grid.line_index(0, n0)] if n0 < grid.Nv else np.inf
    rs_in = grid.r_star_line[grid.line_index(n0, 0)] if n0 < grid.Nu else -np.inf
    lo, hi = prof.support
    truncated = False
    if prof.amplitude > 0:
        if not in_rstar:
            lo = tortoise(bg, lo) if lo > bg.r_plus else -np.inf
            hi = tortoise(bg, hi)
        truncated = bool(lo <= rs_in or hi >= rs_out)
    return FieldState(grid, rpsi, start_diagonal=n0, truncated=truncated,
                      slice_theta=slice_theta, slice_zeta=slice_zeta)
