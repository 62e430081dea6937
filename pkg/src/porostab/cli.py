"""Command-line driver.

Subcommands: ``run``, ``sweep-dt``, ``vn-sweep``, ``certify-nullspace`` and
``index``.  Exit codes: 0 success, 2 configuration error, 3 solver error,
4 certification failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import io
from .analysis import (VonNeumannParams, interior_dofs, nullspace_residual, oscillation_index,
                       stability_sweep, write_sweep_csv)
from .cases import build_scenario
from .errors import CertificationError, ConfigError, SolverError
from .mesh import checkerboard_vector
from .steppers import run_simulation

log = logging.getLogger("porostab")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4
NULLSPACE_TOL = 1e-12
OUTPUT_ENV = "POROSTAB_OUTPUT"


def default_output(cfg: io.RunConfig, label=None):
    if cfg.output.dir:
        return Path(cfg.output.dir)
    root = Path(os.environ.get(OUTPUT_ENV, "porostab_out"))
    return root / (label or f"{cfg.scenario}_{cfg.scheme.scheme}")


def execute(cfg: io.RunConfig, out_dir, write_vtk=None):
    """Run ``cfg`` and write snapshots, diagnostics.csv and manifest.json into ``out_dir``."""
    if not cfg.schedule:
        raise ConfigError("schedule is empty; give one in the config or pass --dt and --steps")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("%s/%s -> %s", cfg.scenario, cfg.scheme.scheme, out_dir)
    scenario = build_scenario(cfg.scenario, **cfg.override_dict)
    write_vtk = cfg.output.vtk if write_vtk is None else write_vtk
    files = []

    def snapshot(step, state):
        if write_vtk and step > 0 and step % cfg.output.snapshot_stride == 0:
            path = out_dir / f"snapshot_{step:05d}.vtk"
            io.write_vtk_snapshot(state, scenario.mesh, path,
                                  f"porostab {cfg.scenario} step={step} time_s={io.fmt(state.time)}")
            files.append(path)

    traj = run_simulation(scenario, cfg.scheme, cfg.schedule, callback=snapshot)
    files.append(io.write_diagnostics(traj, out_dir / "diagnostics.csv"))
    io.write_manifest(cfg, files, out_dir / "manifest.json")
    return traj


def _apply_run_flags(cfg: io.RunConfig, args) -> io.RunConfig:
    scheme = cfg.scheme
    if args.scheme:
        if args.scheme not in io.SCHEME_ALIASES:
            raise ConfigError(f"--scheme: unknown scheme {args.scheme!r}")
        scheme = replace(scheme, scheme=io.SCHEME_ALIASES[args.scheme])
    if args.fs_iterations is not None:
        scheme = replace(scheme, fs_iterations=args.fs_iterations)
    stab = scheme.stabilization
    if args.stab is not None:
        stab = replace(stab, enabled=args.stab == "on")
    if args.c is not None:
        stab = replace(stab, c=args.c)
    scheme = replace(scheme, stabilization=stab)
    schedule = cfg.schedule
    if args.dt is not None:
        if cfg.schedule:
            raise ConfigError("ambiguous schedule: --dt given but the config already has a schedule")
        if args.steps is None:
            raise ConfigError("--dt needs --steps")
        schedule = ((io.parse_duration(args.dt, "--dt"), args.steps),)
    elif args.steps is not None:
        raise ConfigError("--steps needs --dt")
    out = cfg.output if args.out is None else replace(cfg.output, dir=str(args.out))
    return replace(cfg, scheme=scheme, schedule=schedule, output=out)


def cmd_run(args):
    cfg = _apply_run_flags(io.load_config(args.config), args)
    out_dir = default_output(cfg)
    traj = execute(cfg, out_dir)
    last = traj.diagnostics[-1]
    print(f"run: {len(traj.states) - 1} steps, t={last.time_s:.6g} s, "
          f"index={last.oscillation_index_masked:.4f} -> {out_dir}")
    return EXIT_OK


def cmd_sweep_dt(args):
    cfg = io.load_config(args.config)
    if args.scheme:
        if args.scheme not in io.SCHEME_ALIASES:
            raise ConfigError(f"--scheme: unknown scheme {args.scheme!r}")
        cfg = replace(cfg, scheme=replace(cfg.scheme, scheme=io.SCHEME_ALIASES[args.scheme]))
    if args.stab is not None:
        stab = replace(cfg.scheme.stabilization, enabled=args.stab == "on")
        cfg = replace(cfg, scheme=replace(cfg.scheme, stabilization=stab))
    dts = io.parse_duration_list(args.dts, "--dts")
    t_end = io.parse_duration(args.t_end, "--t-end") if args.t_end else cfg.total_time
    if not t_end > 0:
        raise ConfigError("sweep-dt needs a final time: a config schedule or --t-end")
    times = io.parse_duration_list(args.times, "--times") if args.times else []
    out_root = Path(args.out) if args.out else default_output(cfg, f"sweep_{cfg.scenario}")
    rows = []
    for dt in dts:
        n = round(t_end / dt)
        if n < 1 or not math.isclose(n * dt, t_end, rel_tol=1e-9):
            raise ConfigError(f"dt={dt} s does not divide the final time {t_end} s")
        sub = replace(cfg, schedule=((dt, n),),
                      output=replace(cfg.output, dir=None, vtk=args.vtk))
        traj = execute(sub, out_root / f"dt_{dt:g}s")
        idx = [d.oscillation_index_masked for d in traj.diagnostics]
        at = []
        for t in times:
            k = round(t / dt)
            if not math.isclose(k * dt, t, rel_tol=1e-9) or k > n:
                raise ConfigError(f"--times: {t} s is not a step time for dt={dt} s")
            at.append(idx[k])
        rows.append([dt, n, traj.states[-1].time, idx[-1], max(idx[1:]), min(idx[1:])] + at)
        print(f"dt={dt:g} s: steps={n} final index={idx[-1]:.4f}")
    cols = ["dt_s", "steps", "final_time_s", "index_final", "index_max", "index_min"]
    cols += [f"index_at_{t:g}s" for t in times]
    io.write_csv(rows, cols, out_root / "summary.csv")
    print(f"summary -> {out_root / 'summary.csv'}")
    return EXIT_OK


def _grid_values(spec, key, duration=False):
    if isinstance(spec, dict):
        io._check_keys(spec, {"linspace", "logspace"}, key)
        if len(spec) != 1:
            raise ConfigError(f"{key}: give exactly one of linspace/logspace")
        kind, args = next(iter(spec.items()))
        if not isinstance(args, list) or len(args) != 3:
            raise ConfigError(f"{key}.{kind}: expected [start, stop, count]")
        conv = (lambda v: io.parse_duration(v, key)) if duration and kind == "linspace" else \
            (lambda v: io._as_float(v, key))
        lo, hi = conv(args[0]), conv(args[1])
        n = io._as_int(args[2], key)
        return list(np.linspace(lo, hi, n) if kind == "linspace" else np.logspace(lo, hi, n))
    items = spec if isinstance(spec, list) else [spec]
    if duration:
        return [io.parse_duration(v, key) for v in items]
    return [io._as_float(v, key) for v in items]


def load_vn_grid(path):
    """Parse a Von Neumann grid file: ``base`` parameters plus theta/dt/tau value lists."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read grid {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"grid parse error: {exc}") from None
    io._check_keys(data or {}, {"base", "theta", "dt", "tau"}, "grid")
    base = data.get("base") or {}
    io._check_keys(base, {"M_biot", "b", "K_dr", "k", "mu", "dx"}, "grid.base")
    missing = {"b", "K_dr", "k", "mu", "dx"} - set(base)
    if missing:
        raise ConfigError(f"grid.base: missing {sorted(missing)}")
    for key in ("theta", "dt", "tau"):
        if key not in data:
            raise ConfigError(f"grid: missing {key}")
    params = {k: io._as_float(v, f"grid.base.{k}") for k, v in base.items()}
    params.setdefault("M_biot", math.inf)
    proto = VonNeumannParams(dt=1.0, tau=0.0, theta=0.0, **params)
    return (proto, _grid_values(data["theta"], "grid.theta"),
            _grid_values(data["dt"], "grid.dt", duration=True), _grid_values(data["tau"], "grid.tau"))


def cmd_vn_sweep(args):
    base, thetas, dts, taus = load_vn_grid(args.grid)
    try:
        rows = stability_sweep(base, thetas, dts, taus)
    except AssertionError as exc:
        raise CertificationError(str(exc)) from None
    write_sweep_csv(rows, args.out)
    print(f"vn-sweep: {len(rows)} points, max gamma={max(r[3] for r in rows):.17g} -> {args.out}")
    return EXIT_OK


def cmd_certify(args):
    cfg = io.load_config(args.config)
    scenario = build_scenario(cfg.scenario, **cfg.override_dict)
    problem = scenario.build_problem(cfg.scheme.stabilization)
    mesh = scenario.mesh
    dofs = interior_dofs(mesh)
    res = nullspace_residual(problem.system.B, checkerboard_vector(mesh), dofs)
    print(f"certify-nullspace: {cfg.scenario} {mesh.shape}, {len(dofs)} interior dofs, "
          f"max |B^T p_cb| = {res:.3e}")
    if not res <= NULLSPACE_TOL:
        raise CertificationError(f"checkerboard residual {res:.3e} exceeds {NULLSPACE_TOL:g}")
    return EXIT_OK


def cmd_index(args):
    snap = io.read_vtk_snapshot(args.vtk)
    if "pressure" not in snap.cell_data:
        raise ConfigError(f"{args.vtk} has no pressure cell array")
    regions = None if not args.mask else [int(r) for r in args.mask.split(",")]
    value = oscillation_index(snap.cell_data["pressure"], snap.mesh(), regions)
    print(io.fmt(value))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="porostab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("--config", required=True)
    r.add_argument("--scheme", help="fim | fs (or fully_implicit | fixed_stress)")
    r.add_argument("--fs-iterations", type=int)
    r.add_argument("--dt", help="time step with unit suffix, e.g. 1d")
    r.add_argument("--steps", type=int)
    r.add_argument("--stab", choices=["on", "off"])
    r.add_argument("--c", type=float, help="stabilization constant")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep-dt", help="repeat a run over several time steps")
    s.add_argument("--config", required=True)
    s.add_argument("--scheme")
    s.add_argument("--dts", required=True, help="comma-separated, e.g. 1d,0.1d,0.01d")
    s.add_argument("--t-end", help="final time (default: the config schedule's)")
    s.add_argument("--times", help="also report the index at these times")
    s.add_argument("--stab", choices=["on", "off"])
    s.add_argument("--vtk", action="store_true", help="write snapshots for every run")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep_dt)

    v = sub.add_parser("vn-sweep", help="amplification factor over a parameter grid")
    v.add_argument("--grid", required=True)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_vn_sweep)

    c = sub.add_parser("certify-nullspace", help="check B^T p = 0 for the checkerboard")
    c.add_argument("--config", required=True)
    c.set_defaults(func=cmd_certify)

    i = sub.add_parser("index", help="oscillation index of a VTK snapshot")
    i.add_argument("--vtk", required=True)
    i.add_argument("--mask", help="comma-separated region ids (default: all cells)")
    i.set_defaults(func=cmd_index)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
