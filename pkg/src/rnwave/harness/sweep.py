"""The (p, eps) sweep: one evolution per cell, merged into a verdict table.

Cells run in a process pool; results are sorted by ``(p, eps)`` before
anything is written, and per-cell reports omit wall times, so the outputs
are byte-identical across repeated runs and worker counts.
"""
from __future__ import annotations

import copy
import csv
import io as _io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli

from ..checkers import certify_decay, decay_curve
from ..evolution import evolve
from ..exceptions import ConfigError
from ..fields import cauchy_to_characteristic
from .config import SCHEMA_VERSION, RunConfig
from .io import dumps_json, provenance

DEFAULT_P = (2.0, 1.0 + math.sqrt(2.0), 3.0, 3.5, 4.0, 4.5, 5.0)
TABLE_COLUMNS = ("p", "epsilon", "verdict", "B_observed", "exponent",
                 "exponent_stderr", "blow_up_i", "blow_up_j", "blow_up_u",
                 "blow_up_v", "end_diagonal", "h", "Nu", "Nv", "reason")


def geometric_ladder(start: float, ratio: float, count: int) -> list:
    return [float(start * ratio ** k) for k in range(int(count))]


@dataclass
class SweepSpec:
    """Cells ``p x epsilons`` on a common base run.

    ``fit`` (optional) selects the decay fit attached to completed cells:
    ``{"curve": "fixed_r", "value": 10.0, "window": [lo, hi]}``.
    """

    base: RunConfig
    p_values: list = field(default_factory=lambda: list(DEFAULT_P))
    epsilons: list = field(default_factory=lambda: geometric_ladder(1e-3, 10.0, 4))
    fit: Optional[dict] = None

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = copy.deepcopy(d)
        sw = d.pop("sweep", {})
        unknown = set(sw) - {"p", "epsilons", "epsilon_ladder", "fit"}
        if unknown:
            raise ConfigError("unknown key", f"sweep.{sorted(unknown)[0]}")
        p = sw.get("p", list(DEFAULT_P))
        if "epsilons" in sw and "epsilon_ladder" in sw:
            raise ConfigError("give epsilons or epsilon_ladder, not both", "sweep")
        if "epsilon_ladder" in sw:
            lad = sw["epsilon_ladder"]
            try:
                eps = geometric_ladder(lad["start"], lad["ratio"], lad["count"])
            except (KeyError, TypeError) as exc:
                raise ConfigError("needs start, ratio and count",
                                  "sweep.epsilon_ladder") from exc
        else:
            eps = sw.get("epsilons", geometric_ladder(1e-3, 10.0, 4))
        if not p or not all(isinstance(x, (int, float)) and x > 1 for x in p):
            raise ConfigError("exponents must be numbers > 1", "sweep.p")
        if not eps or not all(isinstance(x, (int, float)) and x >= 0 for x in eps):
            raise ConfigError("amplitudes must be numbers >= 0", "sweep.epsilons")
        base = RunConfig.from_dict(d)
        if base.data.kind != "cauchy_slice":
            raise ConfigError("sweeps scale a bump profile", "data.kind")
        return cls(base, [float(x) for x in p], [float(x) for x in eps], sw.get("fit"))

    def cell_config(self, p: float, eps: float) -> RunConfig:
        cfg = copy.deepcopy(self.base)
        d = cfg.to_dict()
        d["nonlinearity"]["p"] = p
        if d["nonlinearity"]["kind"] == "zero":
            d["nonlinearity"]["kind"] = "power_abs"
        d["data"]["amplitude"] = eps
        return RunConfig.from_dict(d)

    def cells(self) -> list:
        return sorted((p, e) for p in self.p_values for e in self.epsilons)

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d["sweep"] = {"p": list(self.p_values), "epsilons": list(self.epsilons)}
        if self.fit is not None:
            d["sweep"]["fit"] = copy.deepcopy(self.fit)
        return d


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    try:
        d = tomli.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return SweepSpec.from_dict(d)
    except ConfigError as exc:
        err = ConfigError(f"{path}: {exc}")
        err.field = exc.field
        raise err from exc


def run_cell(cfg: RunConfig, fit: Optional[dict] = None) -> tuple:
    """Evolve one cell; returns ``(row, report_dict)``.  Failures of any
    kind become rows with verdict ``error`` instead of propagating."""
    p = cfg.nonlinearity.p
    eps = cfg.data.profile.amplitude
    row = dict.fromkeys(TABLE_COLUMNS, "")
    row.update(p=p, epsilon=eps)
    try:
        grid = cfg.grid.build(cfg.background)
        row.update(h=grid.h, Nu=grid.Nu, Nv=grid.Nv)
        init = cauchy_to_characteristic(cfg.data, grid, cfg.nonlinearity)
        state, rep = evolve(grid, init, cfg.nonlinearity, cfg.thresholds, energies=False)
    except Exception as exc:  # recorded in the table, never aborts the sweep
        row.update(verdict="error", reason=f"{type(exc).__name__}: {exc}")
        return row, {"verdict": "error", "reason": row["reason"]}
    row.update(verdict=rep.verdict, reason=rep.reason, B_observed=rep.sup_bootstrap,
               end_diagonal=rep.end_diagonal)
    if rep.blow_up_node is not None:
        i, j = rep.blow_up_node
        row.update(blow_up_i=i, blow_up_j=j, blow_up_u=float(grid.u[i]),
                   blow_up_v=float(grid.v[j]))
    body = {"run": rep.to_dict(series=False, timing=False)}
    if fit and rep.completed:
        try:
            x, y, info = decay_curve(state, fit.get("curve", "fixed_r"), fit.get("value"))
            f = certify_decay(x, y, tuple(fit["window"]), curve=info)
            row.update(exponent=f.exponent, exponent_stderr=f.stderr)
            body["decay"] = f.to_dict()
        except (ValueError, KeyError) as exc:
            body["decay"] = {"error": str(exc)}
    return row, body


def _cell_task(args):
    cfg_dict, fit = args
    return run_cell(RunConfig.from_dict(cfg_dict), fit)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Run every cell; returns ``[(row, body), ...]`` sorted by ``(p, eps)``."""
    keys = spec.cells()
    tasks = [(spec.cell_config(p, e).to_dict(), spec.fit) for p, e in keys]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = [_cell_task(t) for t in tasks]
    return sorted(results, key=lambda rb: (rb[0]["p"], rb[0]["epsilon"]))


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def table_csv(results) -> str:
    buf = _io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row, _ in results:
        w.writerow([_fmt(row[k]) for k in TABLE_COLUMNS])
    return buf.getvalue()


def cell_name(p: float, eps: float) -> str:
    return f"cell_p{p!r}_eps{eps!r}.json"


def write_sweep(out_dir, spec: SweepSpec, results) -> Path:
    """Write ``sweep.csv``, ``sweep.json`` and one report per cell."""
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    prov = provenance(sweep=spec.to_dict())
    text = table_csv(results)
    lines = text.splitlines(keepends=True)
    lines.insert(1, "# provenance=" + json.dumps(prov, sort_keys=True) + "\n")
    (out / "sweep.csv").write_text("".join(lines))
    for row, body in results:
        doc = {"schema_version": SCHEMA_VERSION,
               "provenance": provenance(spec.cell_config(row["p"], row["epsilon"])),
               "row": row, **body}
        (out / "cells" / cell_name(row["p"], row["epsilon"])).write_text(dumps_json(doc))
    summary = {"schema_version": SCHEMA_VERSION, "provenance": prov,
               "rows": [row for row, _ in results],
               "note": "finite-domain verdicts only; no critical exponent is inferred"}
    (out / "sweep.json").write_text(dumps_json(summary))
    return out / "sweep.csv"
