"""Artifacts on disk: field snapshots, diagnostics CSV and JSON reports.

Snapshot layout (little-endian)::

    header  64 bytes  '<8sIIIiddddd'
            magic b"RNWAVE\\0\\0", schema version, Nu, Nv, start diagonal,
            h, u0, v0, M, e
    body    Nu*Nv float64, row-major phi (NaN outside the computed domain)
    trailer UTF-8 JSON provenance block

The body starts at byte 64, so the array can be memory-mapped directly.
"""
from __future__ import annotations

import csv
import json
import math
import platform
import struct
from pathlib import Path

import numpy as np

from ..fields import FieldState, NullGrid, build_grid
from ..geometry import make_background
from .config import SCHEMA_VERSION

MAGIC = b"RNWAVE\0\0"
HEADER = struct.Struct("<8sIIIiddddd")
assert HEADER.size == 64
CSV_COLUMNS = ("diagonal", "t", "v", "max_abs_phi", "E_t", "B_observed")


def package_version() -> str:
    from .. import __version__
    return __version__


def provenance(config=None, **extra) -> dict:
    """Provenance block: software versions, the exact config, extra keys.

    Contains no timestamps or host names, so repeated runs produce
    byte-identical files.
    """
    d = {"package": "rnwave", "version": package_version(),
         "python": platform.python_version(), "numpy": np.__version__}
    if config is not None:
        d["config"] = config.to_dict()
    d.update(extra)
    return d


def _finite_or_none(x):
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, np.generic):
        return _finite_or_none(x.item())
    if isinstance(x, np.ndarray):
        return _finite_or_none(x.tolist())
    return x


def dumps_json(doc: dict) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null or strings."""
    return json.dumps(_finite_or_none(doc), sort_keys=True, indent=2) + "\n"


def write_report(path, body: dict, prov: dict) -> Path:
    path = Path(path)
    doc = {"schema_version": SCHEMA_VERSION, "provenance": prov, **body}
    path.write_text(dumps_json(doc))
    return path


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def write_snapshot(path, state: FieldState, prov: dict) -> Path:
    g = state.grid
    bg = g.background
    head = HEADER.pack(MAGIC, SCHEMA_VERSION, g.Nu, g.Nv, state.start_diagonal,
                       g.h, g.u0, g.v0, bg.mass, bg.charge)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(state.phi, dtype="<f8").tobytes())
        fh.write(dumps_json(prov).encode())
    return path


def read_snapshot(path, mmap: bool = False):
    """Return ``(header, phi, provenance)``; ``mmap`` maps the body read-only."""
    path = Path(path)
    with path.open("rb") as fh:
        raw = fh.read(HEADER.size)
    if len(raw) < HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, Nu, Nv, n0, h, u0, v0, M, e = HEADER.unpack(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    header = {"schema_version": version, "Nu": Nu, "Nv": Nv, "start_diagonal": n0,
              "h": h, "u0": u0, "v0": v0, "M": M, "e": e}
    n_bytes = 8 * Nu * Nv
    if mmap:
        phi = np.memmap(path, dtype="<f8", mode="r", offset=HEADER.size, shape=(Nu, Nv))
        with path.open("rb") as fh:
            fh.seek(HEADER.size + n_bytes)
            trailer = fh.read()
    else:
        data = path.read_bytes()
        if len(data) < HEADER.size + n_bytes:
            raise ValueError(f"{path}: truncated snapshot body")
        phi = np.frombuffer(data, dtype="<f8", count=Nu * Nv,
                            offset=HEADER.size).reshape(Nu, Nv).copy()
        trailer = data[HEADER.size + n_bytes:]
    prov = json.loads(trailer.decode()) if trailer else {}
    return header, phi, prov


def snapshot_state(path):
    """Rebuild the grid of a snapshot and wrap ``phi`` in a :class:`FieldState`."""
    header, phi, prov = read_snapshot(path)
    bg = make_background(header["M"], header["e"])
    tol = prov.get("config", {}).get("grid", {}).get("tol", 1e-12)
    grid = build_grid(bg, header["u0"], header["v0"], header["Nu"], header["Nv"],
                      header["h"], tol)
    state = FieldState(grid, phi * grid.r, start_diagonal=header["start_diagonal"])
    return state, prov


def series_rows(grid: NullGrid, report) -> list:
    """Rows of the diagnostics CSV; ``v`` is the advanced time of the node
    attaining ``max|phi|`` on the diagonal."""
    rows = []
    n_diag = len(report.diagonals)
    energy = report.energy if report.energy is not None else [float("nan")] * n_diag
    for m in range(n_diag):
        n = int(report.diagonals[m])
        i = int(report.argmax_i[m])
        v = grid.v[n - i] if i >= 0 else float("nan")
        rows.append((n, float(report.t[m]), float(v), float(report.max_abs_phi[m]),
                     float(energy[m]), float(report.bootstrap_running[m])))
    return rows


def write_series_csv(path, grid: NullGrid, report, prov: dict) -> Path:
    """Per-diagonal series with ``#`` comment lines carrying the schema
    version and the provenance block."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write("# provenance=" + json.dumps(_finite_or_none(prov), sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in series_rows(grid, report):
            w.writerow([row[0]] + [repr(x) for x in row[1:]])
    return path


def read_series_csv(path) -> dict:
    """Columns of a diagnostics CSV as numpy arrays."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head, body = rows[0], rows[1:]
    cols = {k: np.array([float(r[m]) for r in body]) for m, k in enumerate(head)}
    cols["diagonal"] = cols["diagonal"].astype(int)
    return cols
