"""Command line front end.

Subcommands:
  sweep CONFIG       convergence sweep over the particle-number ladder
  effective CONFIG   integrate one effective system, write trajectory CSV
  scattering CONFIG  shell calibration sweep, one CSV row per (N, beta)
  check              run the quick invariant battery

Common flags: --out DIR (overrides [output] dir), --seed N (overrides
the config seed), --threads N (ladder concurrency).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_config, _parse_expr
from .effective import CouplingSpec, OrbitalState, evolve
from .grids import Field
from .harness import emit_report, run_convergence_sweep
from .scattering import (
    calibrate_shell,
    g_norms,
    modified_potential,
    scale_potential,
    scattering_length,
    square_barrier,
    RadialPotential,
)

__all__ = ["main"]


def _load_config(path: str, args) -> ExperimentConfig:
    cfg = parse_config(Path(path).read_text())
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.echo.setdefault("system", {})["seed"] = str(args.seed)
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args)
    report = run_convergence_sweep(cfg, threads=args.threads)
    paths = emit_report(report, cfg.out_dir)
    for entry in report.entries:
        if entry.error is None:
            print(f"({entry.n1},{entry.n2}) dim={entry.dim} "
                  f"alpha(t*)={entry.alpha_probe:.6e} energy_gap={entry.energy_gap:.6e}")
        else:
            print(f"({entry.n1},{entry.n2}) FAILED: {entry.error}")
    if report.fitted_exponent is not None:
        print(f"fitted exponent of alpha(t*) vs N1+N2: {report.fitted_exponent:.3f}")
    print(f"wrote {len(paths)} files to {cfg.out_dir}")
    return 1 if any(e.error for e in report.entries) else 0


def _build_coupling(cfg: ExperimentConfig) -> tuple[CouplingSpec, OrbitalState]:
    grid = cfg.build_grid()
    u0, v0 = cfg.orbital_field("u0"), cfg.orbital_field("v0")
    if cfg.mode == "hartree":
        spec = CouplingSpec.hartree(cfg.potential_field("v1"), cfg.potential_field("v2"),
                                    cfg.potential_field("v12"), c1=cfg.c1,
                                    kinetic=cfg.kinetic)
        state = OrbitalState((u0, v0), 0.0)
    elif cfg.mode == "gross_pitaevskii":
        spec = CouplingSpec.gross_pitaevskii(grid, cfg.a1, cfg.a2, cfg.a12,
                                             c1=cfg.c1, kinetic=cfg.kinetic)
        state = OrbitalState((u0, v0), 0.0)
    elif cfg.mode == "rabi":
        spec = CouplingSpec.rabi(grid, cfg.a, cfg.b_field, kinetic=cfg.kinetic)
        state = OrbitalState((u0, v0), 0.0)
    elif cfg.mode == "spin1":
        spec = CouplingSpec.spin1(grid, cfg.a, kinetic=cfg.kinetic)
        w0 = cfg.orbital_field("w0")
        # split the unit total mass between the occupied components
        occupied = 2 if np.all(w0.values == 0) else 3
        comps = [Field(grid, u0.values / np.sqrt(occupied)),
                 Field(grid, v0.values / np.sqrt(occupied))]
        comps.append(w0 if occupied == 2 else Field(grid, w0.values / np.sqrt(3)))
        state = OrbitalState(tuple(comps), 0.0)
    else:
        raise ConfigError(f"mode {cfg.mode!r} is not an effective system")
    return spec, state


def _cmd_effective(args) -> int:
    cfg = _load_config(args.config, args)
    spec, state = _build_coupling(cfg)
    traj = evolve(state, spec, cfg.T, cfg.dt, cfg.sample_every)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = None
    if cfg.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
    traj.write_csv(out / "trajectory.csv", snapshot_dir=snap_dir)
    m0, mT = traj.masses[0], traj.masses[-1]
    print(f"{cfg.mode}: {len(traj.times)} samples to t={traj.times[-1]:g}")
    print(f"mass {tuple(round(x, 6) for x in m0)} -> {tuple(round(x, 6) for x in mT)}")
    drift = abs(traj.energies[-1] - traj.energies[0]) / max(1.0, abs(traj.energies[0]))
    print(f"energy drift {drift:.3e}; wrote {out / 'trajectory.csv'}")
    return 0


def _radial_from_expr(expr: str) -> RadialPotential:
    name, kw = _parse_expr(expr, "[system] potential", [])
    if name == "box":
        return square_barrier(kw.get("amp", 2.0), kw.get("radius", 1.0))
    if name == "gaussian":
        sigma = kw.get("sigma", 0.5)
        amp = kw.get("amp", 1.0)
        radius = 6.0 * sigma
        return RadialPotential(
            profile=lambda r: amp * np.exp(-np.asarray(r) ** 2 / (2.0 * sigma**2)),
            support_radius=radius, positive=amp >= 0, breakpoints=(radius,))
    raise ConfigError(f"unsupported radial potential {name!r} (use box or gaussian)")


def _cmd_scattering(args) -> int:
    cfg = _load_config(args.config, args)
    V = _radial_from_expr(cfg.scatter_potential)
    base = scattering_length(V, 2.5 * V.support_radius)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "scattering.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "beta", "C", "a_residual", "g_L1", "g_L2", "g_Linf"])
        for beta in cfg.beta_values:
            for N in cfg.n_values:
                shell = calibrate_shell(V, N, beta, a=base.scattering_length)
                mod = modified_potential(scale_potential(V, N, beta), shell)
                res = scattering_length(
                    mod, 2.5 * mod.support_radius,
                    allow_crossing_window=(shell.inner_radius, shell.outer_radius))
                l1, l2, linf = g_norms(res)
                writer.writerow([N, format(beta, ".17g"), format(shell.C, ".17g"),
                                 format(res.scattering_length, ".17g"),
                                 format(l1, ".17g"), format(l2, ".17g"),
                                 format(linf, ".17g")])
                print(f"N={N} beta={beta}: C={shell.C:.9f} "
                      f"residual={res.scattering_length:.3e} L1={l1:.4e}")
    print(f"a(V) = {base.scattering_length:.9f}; wrote {path}")
    return 0


def _cmd_check(args) -> int:
    from .checks import run_invariant_suite
    results = run_invariant_suite(seed=args.seed if args.seed is not None else 0)
    width = max(len(name) for name, _, _ in results)
    failures = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name:<{width}}  {detail}")
        failures += 0 if ok else 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="becmix", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--threads", type=int, default=1, help="ladder concurrency")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (("sweep", _cmd_sweep, True),
                                   ("effective", _cmd_effective, True),
                                   ("scattering", _cmd_scattering, True),
                                   ("check", _cmd_check, False)):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("config")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
