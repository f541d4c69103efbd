"""Run configuration: TOML documents with ``background``, ``grid``, ``data``,
``nonlinearity``, ``thresholds``, ``checkers`` and ``output`` tables.

Example::

    schema_version = 1

    [background]
    M = 1.0
    e = 0.0

    [grid]
    kind = "cauchy"          # or "rectangle" with u0, v0, Nu, Nv, h
    h = 0.4
    t_slice = 1.0
    r_star_in = -1.0
    r_star_out = 14.6
    v_max = 200.0
    u_max = 100.0

    [data]
    kind = "bump"
    amplitude = 1e-3
    center = 6.0
    half_width = 2.0

    [nonlinearity]
    kind = "power_abs"
    p = 5.0
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from ..evolution import KINDS, Nonlinearity, Thresholds
from ..exceptions import ConfigError
from ..fields import InitialData, NullGrid, bump_data, build_grid, cauchy_grid, \
    characteristic_data
from ..geometry import Background, make_background

SCHEMA_VERSION = 1

_GRID_KEYS = {
    "rectangle": {"u0": float, "v0": float, "Nu": int, "Nv": int, "h": float},
    "cauchy": {"h": float, "t_slice": float, "r_star_in": float,
               "r_star_out": float, "v_max": float, "u_max": float},
}
_BUMP_KEYS = {"amplitude": float, "center": float, "half_width": float,
              "t_init": float, "velocity": str, "normalization": str,
              "coordinate": str}
_BUMP_REQUIRED = ("amplitude", "center", "half_width")
_NL_KEYS = {"kind": str, "p": float, "sign": int, "K": float, "c": float,
            "table_x": list, "table_g": list}
_THRESHOLD_KEYS = {"phi_max": float, "growth_factor": float,
                   "growth_window": int, "growth_radius": int}
CHECKER_NAMES = ("energy", "pricelaw0", "pricelaw2", "pricelaw4", "bootstrap",
                 "redshift", "decay")


def _typed(table: dict, spec: dict, where: str, required=()) -> dict:
    unknown = set(table) - set(spec)
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError("unknown key", f"{where}.{name}")
    for k in required:
        if k not in table:
            raise ConfigError("required", f"{where}.{k}")
    out = {}
    for k, v in table.items():
        want = spec[k]
        if want is float and isinstance(v, (int, float)) and not isinstance(v, bool):
            v = float(v)
        elif want is int and isinstance(v, float) and v.is_integer():
            v = int(v)
        if not isinstance(v, want) or isinstance(v, bool) and want is not bool:
            raise ConfigError(f"expected {want.__name__}, got {v!r}",
                              f"{where}.{k}")
        out[k] = v
    return out


@dataclass
class GridSpec:
    """Lattice description; ``rectangle`` gives the node counts directly."""

    kind: str
    params: dict
    tol: float = 1e-12

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        d = dict(d)
        kind = d.pop("kind", "rectangle")
        if kind not in _GRID_KEYS:
            raise ConfigError(f"expected one of {sorted(_GRID_KEYS)}, got {kind!r}",
                              "grid.kind")
        tol = d.pop("tol", 1e-12)
        params = _typed(d, _GRID_KEYS[kind], "grid", required=tuple(_GRID_KEYS[kind]))
        spec = cls(kind, params, float(tol))
        spec.validate()
        return spec

    def validate(self):
        p = self.params
        if not (math.isfinite(p["h"]) and p["h"] > 0):
            raise ConfigError(f"must be positive, got {p['h']!r}", "grid.h")
        if self.kind == "rectangle":
            for k in ("Nu", "Nv"):
                if p[k] < 2:
                    raise ConfigError(f"must be >= 2, got {p[k]!r}", f"grid.{k}")

    def refined(self, factor: int) -> "GridSpec":
        """Same rectangle with ``h/factor``; coarse nodes stay lattice nodes."""
        if int(factor) != factor or factor < 1:
            raise ConfigError("resolution override must be a positive integer",
                              "--resolution-override")
        p = dict(self.params)
        p["h"] = p["h"] / factor
        if self.kind == "rectangle":
            p["Nu"] = (p["Nu"] - 1) * factor + 1
            p["Nv"] = (p["Nv"] - 1) * factor + 1
        return GridSpec(self.kind, p, self.tol)

    def build(self, bg: Background) -> NullGrid:
        p = self.params
        if self.kind == "rectangle":
            return build_grid(bg, p["u0"], p["v0"], p["Nu"], p["Nv"], p["h"], self.tol)
        return cauchy_grid(bg, p["h"], p["t_slice"], p["r_star_in"], p["r_star_out"],
                           p["v_max"], p["u_max"], self.tol)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params, "tol": self.tol}


def _data_from_dict(d: dict) -> InitialData:
    d = dict(d)
    kind = d.pop("kind", "bump")
    if kind == "bump":
        b = _typed(d, _BUMP_KEYS, "data", _BUMP_REQUIRED)
        try:
            return bump_data(**b)
        except ValueError as exc:
            raise ConfigError(str(exc), "data") from exc
    if kind == "characteristic":
        unknown = set(d) - {"ray_u0", "ray_v0"}
        if unknown or len(d) != 2:
            raise ConfigError("characteristic data need ray_u0 and ray_v0 only",
                              "data")
        try:
            return characteristic_data(d["ray_u0"], d["ray_v0"])
        except ValueError as exc:
            raise ConfigError(str(exc), "data") from exc
    raise ConfigError(f"expected 'bump' or 'characteristic', got {kind!r}",
                      "data.kind")


def _data_to_dict(data: InitialData) -> dict:
    if data.kind == "characteristic":
        return {"kind": "characteristic", "ray_u0": [float(x) for x in data.ray_u0],
                "ray_v0": [float(x) for x in data.ray_v0]}
    p = data.profile
    return {"kind": "bump", "amplitude": p.amplitude, "center": p.center,
            "half_width": p.half_width, "coordinate": p.coordinate,
            "t_init": data.t_init, "velocity": data.velocity,
            "normalization": data.normalization}


def _nl_from_dict(d: dict) -> Nonlinearity:
    d = _typed(d, _NL_KEYS, "nonlinearity")
    kind = d.pop("kind", "zero")
    if kind not in KINDS or kind == "prescribed_F":
        raise ConfigError(f"{kind!r} cannot be configured",
                          "nonlinearity.kind")
    tx, tg = d.pop("table_x", None), d.pop("table_g", None)
    try:
        return Nonlinearity(kind, table=None if tx is None else (tx, tg), **d)
    except ValueError as exc:
        raise ConfigError(str(exc), "nonlinearity") from exc


def _nl_to_dict(nl: Nonlinearity) -> dict:
    d = {"kind": nl.kind, "p": nl.p, "sign": nl.sign, "K": nl.K}
    if math.isfinite(nl.c):
        d["c"] = nl.c
    if nl.table is not None:
        d["table_x"] = [float(x) for x in nl.table[0]]
        d["table_g"] = [float(x) for x in nl.table[1]]
    return d


@dataclass
class RunConfig:
    """Everything needed to reproduce one run; see the module docstring."""

    background: Background
    grid: GridSpec
    data: InitialData
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    thresholds: Thresholds = field(default_factory=Thresholds)
    checkers: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    deterministic = True

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = copy.deepcopy(d)
        version = d.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported {version!r}", "schema_version")
        if d.pop("deterministic", True) is not True:
            raise ConfigError("runs are always deterministic",
                              "deterministic")
        known = {"background", "grid", "data", "nonlinearity", "thresholds",
                 "checkers", "output"}
        unknown = set(d) - known
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError("unknown section", name)
        for k in ("background", "grid", "data"):
            if k not in d:
                raise ConfigError("required section", k)
        b = _typed(d["background"], {"M": float, "e": float}, "background", ("M",))
        try:
            bg = make_background(b["M"], b.get("e", 0.0))
        except ValueError as exc:
            raise ConfigError(str(exc), "background") from exc
        th = _typed(d.get("thresholds", {}), _THRESHOLD_KEYS, "thresholds")
        checkers = d.get("checkers", {})
        for name in checkers:
            if name not in CHECKER_NAMES:
                raise ConfigError("unknown checker", f"checkers.{name}")
            if not isinstance(checkers[name], dict):
                raise ConfigError("expected a table", f"checkers.{name}")
        output = _typed(d.get("output", {}), {"out_dir": str, "snapshot": bool}, "output")
        return cls(bg, GridSpec.from_dict(d["grid"]), _data_from_dict(d["data"]),
                   _nl_from_dict(d.get("nonlinearity", {})), Thresholds(**th),
                   checkers, output)

    def to_dict(self) -> dict:
        th = {k: v for k, v in self.thresholds.to_dict().items() if v is not None}
        return {"schema_version": SCHEMA_VERSION, "deterministic": True,
                "background": self.background.to_dict(), "grid": self.grid.to_dict(),
                "data": _data_to_dict(self.data),
                "nonlinearity": _nl_to_dict(self.nonlinearity), "thresholds": th,
                "checkers": copy.deepcopy(self.checkers), "output": dict(self.output)}

    def with_resolution(self, factor: Optional[int]) -> "RunConfig":
        if not factor or factor == 1:
            return self
        out = copy.copy(self)
        out.grid = self.grid.refined(factor)
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse TOML text; syntax errors keep the parser's line and column."""
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    try:
        return RunConfig.from_dict(d)
    except ConfigError as exc:
        err = ConfigError(f"{source}: {exc}")
        err.field = exc.field
        raise err from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def reference_config_path(name: str = "reference_p5.toml") -> Path:
    """Path of a configuration shipped with the package."""
    return Path(__file__).with_name("configs") / name
