"""Command line interface: ``rnwave {evolve, verify-linear, sweep, fit-decay}``.

Exit codes: 0 completed, 10 blow-up, 20 numerical failure, 64 usage
(invalid configuration, violated hypothesis, unreadable artifact).
"""
from __future__ import annotations

import argparse
import copy
import logging
import sys
from pathlib import Path

import numpy as np

from ..checkers import (certify_decay, certify_pricelaw0, certify_pricelaw2,
                        certify_pricelaw4, bootstrap_closure_check, decay_curve,
                        refinement_trend, slice_constant)
from ..diagnostics import (Rect, bootstrap_sup, bulk_energy_residual,
                           characteristic_energy_residual, fit_redshift_rate)
from ..evolution import Nonlinearity, evolve, seed_prescribed
from ..exceptions import ConfigError, GridError, HypothesisError
from ..fields import cauchy_to_characteristic
from .config import RunConfig, load_config
from .io import (provenance, snapshot_state, write_report, write_series_csv,
                 write_snapshot, dumps_json)
from .sweep import load_sweep, run_sweep, write_sweep

EXIT_OK, EXIT_BLOWUP, EXIT_FAILURE, EXIT_USAGE = 0, 10, 20, 64
VERDICT_EXIT = {"completed": EXIT_OK, "blow_up": EXIT_BLOWUP,
                "numerical_failure": EXIT_FAILURE}

log = logging.getLogger("rnwave")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(args, cfg: RunConfig = None) -> Path:
    d = args.out_dir or (cfg.output.get("out_dir") if cfg else None) or "."
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def run_config(cfg: RunConfig, *, threads=None, energies=True):
    grid = cfg.grid.build(cfg.background)
    init = cauchy_to_characteristic(cfg.data, grid, cfg.nonlinearity)
    parallel = bool(threads and threads > 1)
    state, rep = evolve(grid, init, cfg.nonlinearity, cfg.thresholds,
                        parallel=parallel, threads=threads, energies=energies)
    return grid, state, rep


def evaluate_checkers(cfg: RunConfig, state, rep) -> dict:
    """Run the checkers selected in ``cfg.checkers`` on a finished run."""
    out = {}
    sel = cfg.checkers
    grid = state.grid
    if "energy" in sel:
        c = sel["energy"]
        res = {}
        if "t3" in c and "t2" in c:
            rect = None
            if "u_max" in c or "v_max" in c:
                rect = Rect.from_coords(grid, (grid.u[0], c.get("u_max", grid.u[-1])),
                                        (grid.v[0], c.get("v_max", grid.v[-1])))
            r = bulk_energy_residual(state, c["t3"], c["t2"], rect)
            res["bulk"] = {"residual": r.residual, "lhs": r.lhs, "rhs": r.rhs}
        if "u_range" in c and "v_range" in c:
            rect = Rect.from_coords(grid, tuple(c["u_range"]), tuple(c["v_range"]))
            r = characteristic_energy_residual(state, rect)
            res["characteristic"] = {"residual": r.residual, "lhs": r.lhs, "rhs": r.rhs}
        out["energy"] = res
    if "pricelaw0" in sel:
        certs = certify_pricelaw0(state, sel["pricelaw0"].get("r0", 10.0))
        out["pricelaw0"] = {k: v.to_dict() for k, v in certs.items()}
    if "pricelaw2" in sel:
        out["pricelaw2"] = certify_pricelaw2(state, sel["pricelaw2"].get("r0", 10.0)).to_dict()
    if "bootstrap" in sel:
        m = bootstrap_sup(state)
        out["bootstrap"] = {"B_observed": m.B_observed,
                            "argmax": None if m.argmax is None else list(m.argmax)}
        if sel["bootstrap"].get("closure") and cfg.nonlinearity.p > 4 \
                and not cfg.nonlinearity.is_linear and rep.completed:
            bc, _, _ = bootstrap_closure_check(grid, cfg.data, state, cfg.nonlinearity,
                                               enforce=False)
            out["bootstrap"]["closure"] = bc.to_dict()
    if "redshift" in sel:
        try:
            out["redshift"] = fit_redshift_rate(state).to_dict()
            out["redshift"]["kappa_plus"] = grid.background.kappa_plus
        except ValueError as exc:
            out["redshift"] = {"error": str(exc)}
    if "decay" in sel:
        c = sel["decay"]
        try:
            x, y, info = decay_curve(state, c.get("curve", "fixed_r"), c.get("value"))
            out["decay"] = certify_decay(x, y, tuple(c["window"]), curve=info).to_dict()
        except (ValueError, KeyError) as exc:
            out["decay"] = {"error": str(exc)}
    return out


def cmd_evolve(args) -> int:
    cfg = load_config(args.config).with_resolution(args.resolution_override)
    out = _out_dir(args, cfg)
    grid, state, rep = run_config(cfg, threads=args.threads)
    prov = provenance(cfg)
    body = {"run": rep.to_dict(), "grid": grid.to_dict(),
            "checkers": evaluate_checkers(cfg, state, rep) if rep.completed else {}}
    write_report(out / "report.json", body, prov)
    write_series_csv(out / "diagnostics.csv", grid, rep, prov)
    if cfg.output.get("snapshot", True):
        write_snapshot(out / "field.bin", state, prov)
    log.info("verdict %s (%s)", rep.verdict, rep.reason or "-")
    print(f"{rep.verdict} sup_bootstrap={rep.sup_bootstrap!r} out_dir={out}")
    return VERDICT_EXIT[rep.verdict]


def linear_certificates(cfg: RunConfig, factor: int = 1, *, threads=None) -> dict:
    """Certificates of one resolution: homogeneous run plus the frozen-source
    inhomogeneous run with ``F = |psi|^alpha`` and zero data."""
    c = cfg.checkers
    r0 = c.get("pricelaw0", {}).get("r0", 10.0)
    alpha = c.get("pricelaw4", {}).get("alpha", 5.0)
    if not alpha > 4:
        raise HypothesisError(f"alpha = {alpha!r} violates alpha > 4")
    hom = copy.copy(cfg.with_resolution(factor))
    hom.nonlinearity = Nonlinearity()
    grid, state, rep = run_config(hom, threads=threads, energies=False)
    F = np.abs(np.nan_to_num(state.phi)) ** alpha
    pnl = Nonlinearity("prescribed_F", source=F)
    Psi, _ = evolve(grid, seed_prescribed(grid, pnl, cfg.data.t_init), pnl,
                    energies=False)
    certs = {k: v for k, v in certify_pricelaw0(state, r0).items()}
    certs["pricelaw2"] = certify_pricelaw2(state, r0)
    certs["pricelaw4"] = certify_pricelaw4(Psi, F, alpha)
    return {"grid": grid.to_dict(), "verdict": rep.verdict, "certificates": certs,
            "slice_constant": slice_constant(state)}


def cmd_verify_linear(args) -> int:
    cfg = load_config(args.config).with_resolution(args.resolution_override)
    out = _out_dir(args, cfg)
    coarse = linear_certificates(cfg, 1, threads=args.threads)
    fine = linear_certificates(cfg, 2, threads=args.threads)
    trend = {k: refinement_trend(coarse["certificates"][k], fine["certificates"][k])
             for k in coarse["certificates"]}
    body = {"resolutions": [
        {**res, "certificates": {k: v.to_dict() for k, v in res["certificates"].items()}}
        for res in (coarse, fine)], "refinement_trend": trend}
    write_report(out / "certificates.json", body, provenance(cfg))
    for k, v in coarse["certificates"].items():
        print(f"{k:10s} A_min={v.A_min:.6g} fine={fine['certificates'][k].A_min:.6g} "
              f"trend={trend[k]:.3g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_sweep(args.config)
    if args.resolution_override:
        spec.base = spec.base.with_resolution(args.resolution_override)
    out = _out_dir(args, spec.base)
    results = run_sweep(spec, workers=args.threads or 1)
    path = write_sweep(out, spec, results)
    print(f"{len(results)} cells -> {path}")
    return EXIT_OK


def cmd_fit_decay(args) -> int:
    try:
        state, prov = snapshot_state(args.artifact)
    except (OSError, ValueError) as exc:
        raise UsageError(f"{args.artifact}: {exc}") from exc
    curve = {"curve": args.curve, "value": args.value, "window": args.window}
    if args.config:
        cfg = load_config(args.config)
        curve.update({k: v for k, v in cfg.checkers.get("decay", {}).items()
                      if curve.get(k) is None})
    if curve["window"] is None:
        raise UsageError("fit-decay needs --window or [checkers.decay] window")
    try:
        x, y, info = decay_curve(state, curve["curve"] or "fixed_r", curve["value"])
        fit = certify_decay(x, y, tuple(curve["window"]), curve=info)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = {"decay": fit.to_dict(), "artifact": str(args.artifact)}
    if args.out_dir:
        write_report(_out_dir(args) / "decay.json", doc,
                     {**provenance(), "artifact_provenance": prov})
    sys.stdout.write(dumps_json(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rnwave", description="Characteristic evolution of semilinear "
                "waves on Reissner-Nordstrom exteriors.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="TOML file")
        sp.add_argument("--out-dir", default=None)
        sp.add_argument("--resolution-override", type=int, default=None,
                        help="divide h by this integer factor")
        sp.add_argument("--threads", type=int, default=None)

    common(sub.add_parser("evolve", help="run one evolution"))
    common(sub.add_parser("verify-linear", help="linear estimate certificates"))
    common(sub.add_parser("sweep", help="(p, eps) verdict table"))
    fd = sub.add_parser("fit-decay", help="decay exponent of a snapshot")
    fd.add_argument("artifact", help="field snapshot (field.bin)")
    common(fd, config_required=False)
    fd.add_argument("--curve", choices=("fixed_r", "fixed_u"), default=None)
    fd.add_argument("--value", type=float, default=None)
    fd.add_argument("--window", type=float, nargs=2, default=None)
    return p


COMMANDS = {"evolve": cmd_evolve, "verify-linear": cmd_verify_linear,
            "sweep": cmd_sweep, "fit-decay": cmd_fit_decay}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, HypothesisError, GridError, UsageError) as exc:
        print(f"rnwave {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
