"""Command-line orchestration: simulate, microscope, validate, sweep.

Exit codes: 0 ok, 1 usage/config error, 2 numerical failure, 3 invariant
violation.  Emitted CSVs are byte-stable for identical config and seed.
"""
from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from .checks import run_invariant_suite
from .config import ConfigError, RunConfig, apply_override, parse_config, serialize_config
from .fields import SnapshotHistory, make_grid, read_snapshot, write_snapshot
from .initial import check_n0_bounds, generate
from .microscope import microscope_report, write_cube
from .solver import AxisymSolver, PoissonError, UnstableError
from .validation import lamb_oseen_convergence

DIAG_COLUMNS = (
    "step", "t", "Q", "argmax_r", "argmax_z", "R", "max_rvtheta",
    "energy", "max_divergence", "boundary_max",
)
MICRO_COLUMNS = (
    "mode", "t0", "r0", "z0", "Q", "alpha", "beta", "ratio", "L",
    "sup_dist", "grad_sup", "hess_sup", "dt_sup", "holder", "total",
    "swirl_ratio", "masked_fraction", "capped",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _load_config(path: str) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _snapshot_paths(directory: Path) -> list[Path]:
    return sorted(directory.glob("snap_*.bin"))


def run_simulate(cfg: RunConfig, resume: bool = False) -> int:
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = make_grid(cfg.grid.nr, cfg.grid.nz, cfg.grid.r_max, cfg.grid.z_min, cfg.grid.z_max)

    history = SnapshotHistory(capacity=cfg.output.history_capacity)
    existing = _snapshot_paths(outdir) if resume else []
    step_offset = 0
    if existing:
        t0, fld, pressure = read_snapshot(existing[-1])
        solver = AxisymSolver(fld, cfg.solver, history=history, t0=t0)
        step_offset = int(existing[-1].stem.split("_")[1])
        diag_mode = "a"
    else:
        initial = generate(cfg.data, grid)
        solver = AxisymSolver(initial, cfg.solver, history=history)
        diag_mode = "w"
        (outdir / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8")

    diag_path = outdir / "diagnostics.csv"
    with open(diag_path, diag_mode, encoding="utf-8", newline="\n") as fh:
        if diag_mode == "w":
            fh.write(",".join(DIAG_COLUMNS) + "\n")

        def emit() -> None:
            rec = solver.record_diagnostics()
            row = (rec.step + step_offset, rec.t, rec.q, rec.argmax_r, rec.argmax_z,
                   rec.r_speed, rec.max_rvtheta, rec.energy, rec.max_divergence,
                   rec.boundary_max)
            fh.write(",".join(_fmt(x) for x in row) + "\n")

        def dump_snapshot() -> None:
            path = outdir / f"snap_{step_offset + solver.step_count:08d}.bin"
            write_snapshot(path, solver.t, solver.state, solver.pressure)

        if not existing:
            emit()
            dump_snapshot()
        while solver.t < cfg.solver.t_end - 1e-14:
            solver.step()
            if solver.step_count % cfg.output.diagnostics_every == 0:
                emit()
            if solver.step_count % cfg.solver.snapshot_every == 0:
                dump_snapshot()
    return 0


def run_microscope(cfg: RunConfig, snapshot_dir: str, out_path: str | None = None,
                   dump_cubes: bool = False) -> int:
    directory = Path(snapshot_dir)
    paths = _snapshot_paths(directory)
    if not paths:
        raise ConfigError(f"no snapshots found in {directory}")
    history = SnapshotHistory()
    for p in paths:
        t, fld, pressure = read_snapshot(p)
        history.push(t, fld, pressure)
    rows = microscope_report(history, cfg.microscope)
    out = Path(out_path) if out_path else directory / "microscope.csv"
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(MICRO_COLUMNS) + "\n")
        for k, (zoom, sample, rep) in enumerate(rows):
            row = (
                zoom.mode, zoom.t0, zoom.r0, zoom.z0, zoom.q, zoom.alpha, zoom.beta,
                zoom.ratio, sample.length, rep.sup_dist, rep.grad_sup, rep.hess_sup,
                rep.dt_sup, rep.holder_seminorm, rep.total, rep.swirl_ratio,
                sample.masked_fraction, int(sample.capped),
            )
            fh.write(",".join(_fmt(x) for x in row) + "\n")
            if dump_cubes:
                write_cube(directory / f"cube_{k:04d}.bin", sample)
    return 0


def run_validate(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid.nr, cfg.grid.nz, cfg.grid.r_max, cfg.grid.z_min, cfg.grid.z_max)
    initial = generate(cfg.data, grid)
    bounds = check_n0_bounds(initial, cfg.data.n0)
    print(f"n0_bounds: sup={bounds['sup']:.6g} l2={bounds['l2']:.6g} "
          f"rsup={bounds['rsup']:.6g} n0={bounds['n0']:.6g} "
          f"{'PASS' if bounds['pass'] else 'FAIL'}")
    ok = bounds["pass"]

    history = SnapshotHistory(capacity=cfg.output.history_capacity)
    solver = AxisymSolver(initial, cfg.solver, history=history)
    solver.run(cfg.solver.t_end)
    reports = run_invariant_suite(history, cfg.data.n0, cfg.invariants)
    for rep in reports:
        print(f"{rep['name']}: measured={rep['measured']:.6g} bound={rep['bound']:.6g} "
              f"margin={rep['margin']:.3g} {'PASS' if rep['pass'] else 'FAIL'}")
        ok = ok and rep["pass"]
        if rep["name"] == "short_time_bound":
            print(f"  empirical_h0={rep['empirical_h0']:.6g}")

    conv = lamb_oseen_convergence((32, 64), t_end=0.1)
    ratio = conv["ratios"][0]
    conv_ok = 3.0 <= ratio <= 5.0
    print(f"lamb_oseen_convergence: errors={['%.3e' % e for e in conv['errors']]} "
          f"ratio={ratio:.3f} {'PASS' if conv_ok else 'FAIL'}")
    ok = ok and conv_ok
    return 0 if ok else 3


def run_sweep(cfg: RunConfig) -> int:
    if not cfg.sweep:
        raise ConfigError("sweep: no sweep section in config")
    keys = sorted(cfg.sweep)
    combos = list(itertools.product(*(cfg.sweep[k] for k in keys)))
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = outdir / "sweep_summary.csv"
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["run"] + keys + list(DIAG_COLUMNS)) + "\n")
        for k, combo in enumerate(combos):
            sub = cfg
            for key, value in zip(keys, combo):
                sub = apply_override(sub, key, value)
            subdir = outdir / f"sweep_{k:04d}"
            import dataclasses

            sub = dataclasses.replace(
                sub, output=dataclasses.replace(sub.output, directory=str(subdir))
            )
            run_simulate(sub)
            last = Path(subdir, "diagnostics.csv").read_text(encoding="utf-8").strip()
            last_row = last.splitlines()[-1]
            fh.write(",".join([str(k)] + [_fmt(v) for v in combo]) + "," + last_row + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="axiswirl")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="time-step a run and write snapshots")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--resume", action="store_true")

    p_mic = sub.add_parser("microscope", help="zoom diagnostics on stored snapshots")
    p_mic.add_argument("--config", required=True)
    p_mic.add_argument("--snapshots", required=True)
    p_mic.add_argument("--out")
    p_mic.add_argument("--dump-cubes", action="store_true")

    p_val = sub.add_parser("validate", help="invariant suite plus convergence study")
    p_val.add_argument("--config", required=True)

    p_swp = sub.add_parser("sweep", help="cartesian parameter sweep of simulate runs")
    p_swp.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.command == "simulate":
            return run_simulate(cfg, resume=args.resume)
        if args.command == "microscope":
            return run_microscope(cfg, args.snapshots, args.out, args.dump_cubes)
        if args.command == "validate":
            return run_validate(cfg)
        return run_sweep(cfg)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UnstableError, PoissonError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
