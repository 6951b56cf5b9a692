"""Command line front end.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure, 4 I/O failure.
Verbosity comes from ``TRANSBEAM_LOG`` (a logging level name, default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import certificates
from .assembly import assemble
from .config import RunConfig, reference_config
from .discretization import build_space, smooth_state
from .errors import OutputError, TransbeamError
from .functionals import energy
from .modal import build_basis
from .model import validate_parameters
from .output import SnapshotSink, read_snapshot, write_json, write_timeseries
from .stationary import solve_stationary
from .timestepper import simulate

log = logging.getLogger("transbeam")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (default: reference)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--t-end", type=float, dest="t_end")
    common.add_argument("--dt", type=float)
    common.add_argument("--n-left", type=int, dest="n_left")
    common.add_argument("--n-right", type=int, dest="n_right")
    common.add_argument("--modes", type=int)

    parser = argparse.ArgumentParser(prog="transbeam",
                                     description="two-segment von Karman beam toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="time integration")
    sub.add_parser("stationary", parents=[common], help="equilibrium solve")
    sub.add_parser("modal", parents=[common], help="eigenpairs to CSV")
    sub.add_parser("certify", parents=[common], help="multiplier and Carleman certificates")
    sub.add_parser("check", parents=[common], help="validate the configuration only")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else reference_config()
    if args.out is not None:
        cfg.sections["output"]["directory"] = args.out
    if args.t_end is not None:
        cfg.step["t_end"] = args.t_end
    if args.dt is not None:
        cfg.step["dt"] = args.dt
    if args.n_left is not None:
        cfg.sections["mesh"]["n_left"] = args.n_left
    if args.n_right is not None:
        cfg.sections["mesh"]["n_right"] = args.n_right
    if args.modes is not None:
        cfg.sections["modal"]["modes"] = args.modes
    return cfg


def _prepare(cfg: RunConfig):
    report = validate_parameters(cfg.params, cfg.forcing, cfg.mode)
    for w in report.warnings:
        log.warning("%s: %s", w.code, w.message)
    report.raise_if_errors()
    space = build_space(cfg.params, cfg.n_left, cfg.n_right)
    return space


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError("IO_FAILURE", f"cannot create {path}: {exc}") from exc
    return path


def _initial_state(cfg: RunConfig, space):
    init = cfg.section("initial")
    if init.get("snapshot"):
        return read_snapshot(init["snapshot"], space)
    seed = init.get("seed")
    rng = None if seed is None else np.random.default_rng(int(seed))
    return smooth_state(space, rng, amplitude=float(init["amplitude"]),
                        velocity_amplitude=float(init["velocity_amplitude"]))


def cmd_check(cfg: RunConfig) -> int:
    _prepare(cfg)
    cfg.step_config()
    print("configuration ok")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    space = _prepare(cfg)
    step = cfg.step_config()
    ops = assemble(space, cfg.params, cfg.forcing)
    state0 = _initial_state(cfg, space)
    out = _out_dir(cfg)
    sinks = [SnapshotSink(out / "snapshots", space)] if step.snapshot_every else []
    summary = simulate(ops, state0, step, sinks)
    write_timeseries(out / "timeseries.csv", summary.records)
    write_json(out / "summary.json", {
        "initial_energy": summary.initial_energy, "final_energy": summary.final_energy,
        "cumulative_balance": summary.cumulative_balance,
        "max_abs_residual": summary.max_abs_residual, "steps": summary.steps,
        "halvings": summary.halvings, "space_version": space.version})
    print(f"E(0)={summary.initial_energy:.10g} E(T)={summary.final_energy:.10g} "
          f"max|residual|={summary.max_abs_residual:.3e} steps={summary.steps}")
    return 0


def cmd_stationary(cfg: RunConfig) -> int:
    space = _prepare(cfg)
    ops = assemble(space, cfg.params, cfg.forcing)
    opts = cfg.section("stationary")
    point = solve_stationary(ops, tol=float(opts["tol"]), max_iter=int(opts["max_iter"]))
    e = energy(space, cfg.params, point.as_state(), forcing=cfg.forcing)
    out = _out_dir(cfg)
    write_json(out / "stationary.json", {
        "residual_norm": point.residual_norm, "newton_iters": point.newton_iters,
        "continuation": point.continuation, "energy": e.total, "lyapunov": e.lyapunov,
        "space_version": space.version, "z": [float(v) for v in point.z]})
    print(f"residual={point.residual_norm:.3e} iterations={point.newton_iters} "
          f"lyapunov={e.lyapunov:.10g}")
    return 0


def cmd_modal(cfg: RunConfig) -> int:
    space = _prepare(cfg)
    ops = assemble(space, cfg.params, cfg.forcing)
    k = int(cfg.section("modal")["modes"])
    basis = build_basis(ops, k, k)
    out = _out_dir(cfg)
    path = out / "modes.csv"
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("field", "index", "eigenvalue", "frequency"))
            for name, values in (("transverse", basis.transverse_values),
                                 ("longitudinal", basis.longitudinal_values)):
                for i, lam in enumerate(values, start=1):
                    w.writerow((name, i, "%.17g" % lam, "%.17g" % np.sqrt(lam)))
    except OSError as exc:
        raise OutputError("IO_FAILURE", f"cannot write {path}: {exc}") from exc
    print(f"wrote {2 * k} eigenpairs to {path}")
    return 0


def cmd_certify(cfg: RunConfig) -> int:
    p = cfg.params
    validate_parameters(p).raise_if_errors()
    c = cfg.section("certify")
    mult = certificates.build_multipliers(p, float(c["delta"]), float(c["eta_hat"]),
                                          float(c["eta_tilde"]))
    phi = certificates.phi_weight_certificate(p, float(c["T"]))
    carl = certificates.carleman_certificate(float(c["rho"]), p, float(c["L_tilde"]),
                                             budget=int(c["budget"]))
    gap_sigma1 = 2.0 * carl.sigma1
    gap = certificates.t1_gap_report(float(c["rho"]), p, float(c["L_tilde"]),
                                     certificates.t1_bound(float(c["rho"]), p.L,
                                                           float(c["L_tilde"])) + 1.0,
                                     gap_sigma1)
    out = _out_dir(cfg)
    payload = {name: certificates.jsonable(obj.as_dict())
               for name, obj in (("multipliers", mult), ("phi_weight", phi),
                                 ("carleman", carl), ("t1_gap", gap))}
    write_json(out / "certificates.json", payload)
    print(f"multipliers valid={mult.valid} phi valid={phi.valid} "
          f"carleman valid={carl.valid} (T={carl.T:.6g}, m={carl.m:.6g}, "
          f"binding={carl.binding})")
    return 0


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "stationary": cmd_stationary,
            "modal": cmd_modal, "certify": cmd_certify}


def _configure_logging():
    level = os.environ.get("TRANSBEAM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run_cli(argv=None) -> int:
    _configure_logging()
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg)
    except TransbeamError as exc:
        where = exc.details.get("t")
        suffix = f" (t={where:.6g})" if isinstance(where, float) else ""
        print(f"error: {exc}{suffix}", file=sys.stderr)
        return exc.exit_code


def main():
    sys.exit(run_cli())
