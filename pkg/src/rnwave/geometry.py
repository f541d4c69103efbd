"""Reissner-Nordstrom exterior geometry in tortoise and double-null coordinates.

All functions are pure and vectorised over numpy arrays.  Radii close to the
event horizon are represented by the *gap* ``g = r - r_plus`` rather than by
``r`` itself: for ``r_star`` below roughly ``-70`` (Schwarzschild, ``M = 1``)
the gap is smaller than the spacing of doubles near ``r_plus`` and ``r`` would
round to the horizon.  Every function taking a radius also accepts ``gap=``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DomainError, ExtremalBackgroundError, InversionError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Background:
    """Fixed black hole background with mass ``M`` and charge ``e``.

    Use :func:`make_background` to construct; the derived radii are computed
    in closed form on initialisation.

    Attributes
    ----------
    mass, charge : float
        Parameters ``M > 0`` and ``|e| < M`` in geometric units.
    r_plus, r_minus : float
        Outer and inner horizon radii ``M +- sqrt(M^2 - e^2)``.
    kappa_plus : float
        Red-shift rate ``(r_plus - r_minus) / (2 r_plus^2)``, the surface
        gravity of the event horizon.
    """

    mass: float
    charge: float = 0.0
    r_plus: float = field(init=False)
    r_minus: float = field(init=False)
    kappa_plus: float = field(init=False)

    def __post_init__(self):
        M, e = float(self.mass), float(self.charge)
        if not M > 0:
            raise ExtremalBackgroundError(f"mass must be positive, got {M!r}")
        if not abs(e) < M:
            raise ExtremalBackgroundError(
                f"|e| = {abs(e)!r} >= M = {M!r}: extremal and super-extremal "
                "backgrounds are excluded")
        root = float(np.sqrt(M * M - e * e))
        object.__setattr__(self, "mass", M)
        object.__setattr__(self, "charge", e)
        object.__setattr__(self, "r_plus", M + root)
        object.__setattr__(self, "r_minus", M - root)
        rp, rm = M + root, M - root
        object.__setattr__(self, "kappa_plus", (rp - rm) / (2.0 * rp * rp))

    # Coefficients of the closed-form tortoise coordinate.
    @property
    def horizon_separation(self) -> float:
        return self.r_plus - self.r_minus

    @property
    def _log_coefficients(self):
        d = self.r_plus - self.r_minus
        return self.r_plus ** 2 / d, self.r_minus ** 2 / d

    def to_dict(self) -> dict:
        return {"M": self.mass, "e": self.charge}


def make_background(M: float, e: float = 0.0) -> Background:
    """Build a non-extremal background; raises for ``|e| >= M`` or ``M <= 0``."""
    return Background(M, e)


def _gap(bg: Background, r, gap):
    if (r is None) == (gap is None):
        raise TypeError("pass exactly one of r or gap")
    if gap is not None:
        g = np.asarray(gap, dtype=float)
    else:
        g = np.asarray(r, dtype=float) - bg.r_plus
    return g


def radius_of(bg: Background, gap):
    """Area radius ``r_plus + gap``."""
    return bg.r_plus + np.asarray(gap, dtype=float)


def one_minus_mu(bg: Background, r=None, *, gap=None):
    """Metric factor ``1 - 2M/r + e^2/r^2``.

    With ``gap=`` the factored form ``g (g + r_plus - r_minus) / r^2`` is used,
    which keeps full relative accuracy arbitrarily close to the horizon.
    """
    if gap is not None and r is None:
        g = np.asarray(gap, dtype=float)
        rr = bg.r_plus + g
        return g * (g + bg.horizon_separation) / (rr * rr)
    if r is None:
        raise TypeError("pass r or gap")
    r = np.asarray(r, dtype=float)
    return 1.0 - 2.0 * bg.mass / r + bg.charge ** 2 / (r * r)


def hawking_mass(bg: Background, r=None, *, gap=None):
    """Hawking mass ``m = M - e^2 / (2r)``; equals ``r_plus / 2`` on the horizon."""
    rr = np.asarray(r, dtype=float) if gap is None else radius_of(bg, gap)
    return bg.mass - bg.charge ** 2 / (2.0 * rr)


def tortoise(bg: Background, r=None, *, gap=None):
    """Regge-Wheeler coordinate with the ``log|r - r_plus|`` additive convention.

    ``r_* = r + a log(r - r_plus) - b log(r - r_minus)`` with
    ``a = r_plus^2/(r_plus - r_minus)`` and ``b = r_minus^2/(r_plus - r_minus)``.

    Raises
    ------
    DomainError
        If any radius lies on or inside the event horizon.
    """
    g = _gap(bg, r, gap)
    if np.any(~(g > 0)):
        raise DomainError("tortoise coordinate requires r > r_plus")
    a, b = bg._log_coefficients
    d = bg.horizon_separation
    rs = bg.r_plus + g + a * np.log(g)
    if b != 0.0:
        rs = rs - b * (np.log(d) + np.log1p(g / d))
    return rs


def dtortoise_dr(bg: Background, r=None, *, gap=None):
    """``dr_*/dr = (1 - mu)^{-1}``."""
    return 1.0 / one_minus_mu(bg, r, gap=gap)


def _residual(bg, x, rs):
    a, b = bg._log_coefficients
    d = bg.horizon_separation
    g = np.exp(x)
    f = bg.r_plus + g + a * x - rs
    fp = g + a
    if b != 0.0:
        f = f - b * (np.log(d) + np.log1p(g / d))
        fp = fp - b * g / (g + d)
    return f, fp


def horizon_gap(bg: Background, r_star, tol: float = 1e-12, max_iter: int = 200):
    """Solve ``tortoise(gap=g) = r_star`` for the gap ``g = r - r_plus``.

    Safeguarded Newton on ``x = log g`` with a bisection fallback.  In the
    log variable the map is smooth and strictly increasing on the whole real
    line (its slope is at least ``2M``), so near-horizon flatness in ``r``
    does not slow convergence.

    Raises
    ------
    InversionError
        If some entries fail to reach ``|residual| <= tol`` (up to rounding of
        the residual evaluation) within ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rs = np.asarray(r_star, dtype=float)
    scalar = rs.ndim == 0
    rs = np.atleast_1d(rs)
    if not np.all(np.isfinite(rs)):
        raise InversionError("non-finite r_star", {"r_star": rs[~np.isfinite(rs)]})
    a, b = bg._log_coefficients
    d = bg.horizon_separation
    log_d = np.log(d)
    # f(x_lo) < 0 since exp(x_lo) <= 1 and the b-term is bounded below by b log d
    lo = np.minimum(0.0, (rs - bg.r_plus - 1.0 + b * log_d) / a - 1.0)
    hi = np.log(np.maximum(rs, 0.0) + 10.0 * bg.r_plus + 10.0)
    x = np.where(rs - bg.r_plus > 1.0,
                 np.log(np.maximum(rs - bg.r_plus, 1.0)),
                 (rs - bg.r_plus + b * log_d) / a)
    x = np.clip(x, lo, hi)
    # residual rounding floor: terms of size |r_star| + a|x| + b|log|
    floor = 16 * _EPS * (np.abs(rs) + a * np.abs(lo) + bg.r_plus + 1.0)
    thresh = np.maximum(tol, floor)
    done = np.zeros(rs.shape, dtype=bool)
    for _ in range(max_iter):
        f, fp = _residual(bg, x, rs)
        done = np.abs(f) <= thresh
        if done.all():
            break
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        xn = x - f / fp
        bad = ~((xn > lo) & (xn < hi))
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        x = np.where(done, x, xn)
    else:
        f, _ = _residual(bg, x, rs)
        done = np.abs(f) <= thresh
        if not done.all():
            raise InversionError(
                "tortoise inversion did not converge",
                {"r_star": rs[~done], "residual": f[~done], "tol": tol})
    g = np.exp(x)
    return g[0] if scalar else g


def radius_from_tortoise(bg: Background, r_star, tol: float = 1e-12, *,
                         return_gap: bool = False, max_iter: int = 200):
    """Area radius ``r > r_plus`` with ``|tortoise(r) - r_star| <= tol``.

    Returns ``r_plus + gap``.  For ``r_star`` deep in the near-horizon region
    the sum rounds to ``r_plus``; pass ``return_gap=True`` to get the gap,
    which all geometry functions accept via ``gap=``.
    """
    g = horizon_gap(bg, r_star, tol, max_iter)
    return g if return_gap else bg.r_plus + g


class HorizonBounds(NamedTuple):
    C1: float
    C2: float
    C1_hat: float
    C2_hat: float
    r_star_min: float
    r_star_cut: float
    n_samples: int


def horizon_bound_constants(bg: Background, r_star_cut: float, *,
                            r_star_min: float = -200.0, n_samples: int = 4001,
                            max_spread: float = 1e6) -> HorizonBounds:
    """Fit the two-sided near-horizon bounds on ``1 - mu``.

    Returns the tightest constants on the sample
    ``r_star in [r_star_min, r_star_cut]`` such that::

        C1h exp(2 k r_*) <= C1 (r - r_plus) <= 1 - mu <= C2 (r - r_plus) <= C2h exp(2 k r_*)

    with ``2k = (r_plus - r_minus)/r_plus^2``.

    Raises
    ------
    ValueError
        If the window is empty, or if the ratio of the exponential constants
        exceeds ``max_spread`` (the cut is too far from the horizon for the
        bounds to hold with moderate constants).
    """
    if not np.isfinite(r_star_cut) or r_star_cut <= r_star_min:
        raise ValueError("need finite r_star_cut > r_star_min")
    rs = np.linspace(r_star_min, r_star_cut, n_samples)
    g = horizon_gap(bg, rs)
    omm = one_minus_mu(bg, gap=g)
    ratio = omm / g
    C1, C2 = ratio.min(), ratio.max()
    expo = np.exp(2.0 * bg.kappa_plus * rs)
    C1h = (C1 * g / expo).min()
    C2h = (C2 * g / expo).max()
    if not (C1h > 0 and C2h / C1h <= max_spread):
        raise ValueError(
            f"near-horizon bounds degenerate on r_* <= {r_star_cut}: "
            f"C2h/C1h = {C2h / C1h if C1h > 0 else np.inf:.3g}")
    return HorizonBounds(float(C1), float(C2), float(C1h), float(C2h),
                         float(r_star_min), float(r_star_cut), n_samples)
