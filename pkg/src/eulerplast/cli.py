"""Command line driver: ``eulerplast run|check|scenarios|materials|audit``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant violation.
"""
from __future__ import annotations

import argparse
import copy
import logging
import os
import platform
import sys

import numpy as np

from . import __version__
from . import audit
from . import constitutive as cv
from . import fields as fd
from . import parallel, tensorkin, thermal
from .config import SolverConfig, load_config, serialize
from .errors import ConfigError, SimulationError
from .scenarios import build_model, list_scenarios
from .simulate import simulate
from .transport import StateFields

log = logging.getLogger("eulerplast")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4

SNAPSHOT_FIELDS = ("v", "xi", "Fp", "w", "theta", "Lp", "dissipation", "adiabatic", "wall_flux")

# keys that change how a run executes but not what it computes
_EXECUTION_KEYS = (("run", "threads"), ("output", "dir"))


def exit_code(exc):
    kind = getattr(exc, "kind", "solver")
    return {"config": EXIT_CONFIG, "invariant": EXIT_INVARIANT}.get(kind, EXIT_SOLVER)


def effective_config(args):
    """Load the config file (or defaults) and apply command line overrides."""
    if args.config:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    else:
        cfg = SolverConfig()
    for section, key, value in (("run", "scenario", getattr(args, "scenario", None)),
                                ("run", "steps", getattr(args, "steps", None)),
                                ("run", "dt", getattr(args, "dt", None)),
                                ("run", "threads", getattr(args, "threads", None)),
                                ("run", "seed", getattr(args, "seed", None)),
                                ("output", "dir", getattr(args, "out", None))):
        if value is not None:
            cfg.set(section, key, value)
    return cfg


def physics_config(cfg):
    """Copy of ``cfg`` without execution-only keys; its digest identifies the run."""
    out = SolverConfig(copy.deepcopy(cfg.values))
    for section, key in _EXECUTION_KEYS:
        out.values.get(section, {}).pop(key, None)
    return out


def snapshot_path(out_dir, step, name):
    return os.path.join(out_dir, "fields", f"step{step:06d}.{name}.epfld")


def write_snapshots(out_dir, grid, step, t, state, diag):
    values = {"v": state.v, "xi": state.xi, "Fp": state.Fp, "w": state.w, "theta": state.theta,
              "Lp": diag.Lp, "dissipation": diag.dissipation, "adiabatic": diag.adiabatic,
              "wall_flux": diag.wall_flux}
    for name in SNAPSHOT_FIELDS:
        fd.write_snapshot(snapshot_path(out_dir, step, name), grid, name, values[name],
                          meta={"step": step, "t": repr(float(t))})


def write_manifest(path, cfg, model, dt, steps, threads):
    tol = {
        "tensorkin.singular_floor": tensorkin.SINGULAR_FLOOR,
        "transport.cfl_cap": model.solver.cfl_cap,
        "mechanics.lin_tol": model.solver.lin_tol,
        "mechanics.lin_maxiter": model.solver.lin_maxiter,
        "mechanics.picard_flow_tol": model.solver.picard_flow_tol,
        "mechanics.picard_flow_max": model.solver.picard_flow_max,
        "thermal.soft_floor": thermal.SOFT_FLOOR,
        "thermal.hard_floor": cfg.get("audit", "theta_floor"),
        "thermal.enthalpy_tol": cfg.get("audit", "enthalpy_tol"),
        "audit.detfp_tol": cfg.get("audit", "detfp_tol"),
        "audit.hardening_in_total": cfg.get("audit", "hardening_in_total"),
    }
    lines = [
        f"version = {__version__}",
        f"config_sha256 = {physics_config(cfg).digest()}",
        f"scenario = {cfg.get('run', 'scenario')}",
        f"grid = {model.grid.nx} x {model.grid.ny} on {model.grid.lx!r} x {model.grid.ly!r}",
        f"dt = {dt!r}",
        f"steps = {steps}",
        f"threads = {threads}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
    ]
    lines += [f"tolerance.{k} = {v!r}" for k, v in tol.items()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run(cfg, out_dir=None, progress_every=0):
    """Execute a configured run and write all artifacts.  Returns an exit code."""
    out_dir = out_dir or cfg.get("output", "dir")
    threads = cfg.get("run", "threads")
    parallel.set_threads(threads)
    model, state, dt, steps = build_model(cfg)
    os.makedirs(os.path.join(out_dir, "fields"), exist_ok=True)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(serialize(physics_config(cfg)))
    write_manifest(os.path.join(out_dir, "manifest.txt"), cfg, model, dt, steps, threads)
    every = cfg.get("output", "snapshot_every")
    snaps = cfg.get("output", "snapshots")
    tolerances = {k: cfg.get("audit", k) for k in ("theta_floor", "detfp_tol", "enthalpy_tol")}
    log.info("scenario %s: %d x %d grid, dt = %.6g, %d steps",
             cfg.get("run", "scenario"), model.grid.nx, model.grid.ny, dt, steps)
    last = None
    with parallel.blas_threads(1), open(os.path.join(out_dir, "energies.csv"), "w") as csv:
        csv.write(audit.csv_header() + "\n")
        try:
            for n, t, st, rep, diag, extras in simulate(model, state, dt, steps, tolerances):
                csv.write(audit.csv_row(n, rep, extras) + "\n")
                if snaps and (n % every == 0 or n == steps):
                    write_snapshots(out_dir, model.grid, n, t, st, diag)
                if progress_every and n % progress_every == 0:
                    log.info("step %d t=%.4g E_mech=%.6g min_theta=%.3g drift=%.2e",
                             n, t, rep.mechanical(), extras["min_theta"], extras["total_drift_rel"])
                last = (n, t, rep, extras)
        except SimulationError as exc:
            csv.flush()
            report = [f"run aborted: {type(exc).__name__}: {exc}"]
            if last is not None:
                n, t, rep, extras = last
                report.append(f"last completed step {n} at t = {t!r}")
                report.append(f"mechanical energy {rep.mechanical()!r}, heat {rep.heat!r}")
                report.append(f"min theta {extras['min_theta']!r}, "
                              f"max |det Fp - 1| {extras['max_det_fp_dev']!r}")
            text = "\n".join(report) + "\n"
            with open(os.path.join(out_dir, "diagnostic.txt"), "w") as fh:
                fh.write(text)
            sys.stderr.write(text)
            return exit_code(exc)
    n, t, rep, extras = last
    log.info("done: %d steps, drift %.3e, mass %.12g, min theta %.3e",
             n, extras["total_drift_rel"], extras["mass"], extras["min_theta"])
    return EXIT_OK


def audit_run(out_dir, rtol=1e-12):
    """Recompute energy reports from snapshots and compare with energies.csv."""
    cfg = load_config(os.path.join(out_dir, "config.txt"))
    model, _, _, _ = build_model(cfg)
    table = audit.read_csv(os.path.join(out_dir, "energies.csv"))
    steps = [int(s) for s in table["step"]]
    names = ("kinetic", "stored", "hardening", "heat", "dissipation_rate", "gravity_power",
             "boundary_heat_in", "adiabatic_exchange")
    worst = 0.0
    checked = 0
    print("step  " + "  ".join(f"{n:>18s}" for n in names[:4]) + "  max_rel_diff")
    for row, step in enumerate(steps):
        if not os.path.exists(snapshot_path(out_dir, step, "v")):
            continue
        snap = {name: fd.read_snapshot(snapshot_path(out_dir, step, name))[3]
                for name in SNAPSHOT_FIELDS}
        state = StateFields(v=snap["v"], xi=snap["xi"], Fp=snap["Fp"], w=snap["w"],
                            theta=snap["theta"])
        rep = audit.compute_report(model, state, snap["dissipation"], snap["adiabatic"],
                                   snap["wall_flux"], float(table["t"][row]))
        diff = 0.0
        for name in names:
            a, b = getattr(rep, name), float(table[name][row])
            diff = max(diff, abs(a - b) / max(abs(a), abs(b), 1e-300) if a != b else 0.0)
        worst = max(worst, diff)
        checked += 1
        print(f"{step:5d} " + "  ".join(f"{getattr(rep, n):18.10e}" for n in names[:4])
              + f"  {diff:.2e}")
    print(f"{checked} snapshot steps audited, max relative difference {worst:.3e}")
    if checked == 0:
        print("no snapshots found", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if worst <= rtol else EXIT_INVARIANT


def build_parser():
    p = argparse.ArgumentParser(prog="eulerplast", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"eulerplast {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a scenario and write artifacts")
    r.add_argument("--config", help="configuration file")
    r.add_argument("--scenario", help="scenario name (overrides [run] scenario)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--steps", type=int, help="number of steps")
    r.add_argument("--dt", type=float, help="time step (default: from CFL)")
    r.add_argument("--threads", type=int, help="worker threads for per-node kernels")
    r.add_argument("--seed", type=int, help="seed for initial perturbations")
    r.add_argument("--progress", type=int, default=0, metavar="N",
                   help="log a progress line every N steps")

    c = sub.add_parser("check", help="validate a configuration file")
    c.add_argument("--config", required=True)

    sub.add_parser("scenarios", help="list scenario presets")

    m = sub.add_parser("materials", help="list material presets or describe one")
    m.add_argument("name", nargs="?")

    a = sub.add_parser("audit", help="recompute energy reports from a run's snapshots")
    a.add_argument("out", help="run output directory")
    a.add_argument("--rtol", type=float, default=1e-12)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "run":
            return run(effective_config(args), progress_every=args.progress)
        if args.verb == "check":
            cfg = effective_config(args)
            build_model(cfg)
            print(f"ok {physics_config(cfg).digest()}")
            return EXIT_OK
        if args.verb == "scenarios":
            print("\n".join(list_scenarios()))
            return EXIT_OK
        if args.verb == "materials":
            if args.name:
                print(cv.describe_material(args.name))
            else:
                print("\n".join(cv.MATERIALS))
            return EXIT_OK
        if args.verb == "audit":
            return audit_run(args.out, args.rtol)
    except ConfigError as exc:
        for line in getattr(exc, "errors", [str(exc)]):
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
