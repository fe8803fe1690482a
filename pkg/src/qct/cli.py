"""Experiment runner.

Subcommands: reproduce-fig1, reproduce-fig2, classify, weak-demo,
lyapunov, simulate-quantum, simulate-classical. Every run writes its
outputs atomically into the output directory together with a metadata
JSON embedding the resolved configuration; the QCT_THREADS environment
variable (or --threads) sets the worker count, which never changes
results, only wall time.

Exit codes: 0 success, 2 configuration error, 3 numerical-domain error,
4 runtime invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .compare import (ComparisonSeries, density_distance, negativity,
                      overall_noise_metric)
from .config import RunConfig, default_config, load_config
from .criteria import (accessible_area, action_scales, classify,
                       phase_space_averages, weak_times)
from .cdyn import (density_histogram, edges_like, evolve_ensemble,
                   lyapunov_benettin, sample_coherent_matched)
from .errors import ConfigError, DomainError, QctError, RuntimeInvariantError
from .gridio import atomic_write_text, format_float, write_grid_csv, write_qctw
from .qdyn import MeasurementSpec, average_ensemble, run_trajectory
from .qstate import coherent_state, moments, wigner
from .rng import NoisePath


def _resolve_threads(args) -> int:
    env = os.environ.get("QCT_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QCT_THREADS must be an integer, got {env!r}") from exc
    return max(1, args.threads)


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg.values["run.seed"] = args.seed
    if args.margin_factor is not None:
        cfg.values["criteria.margin_factor"] = args.margin_factor
    if args.out is not None:
        cfg.values["output.directory"] = args.out
    return cfg


def _outdir(cfg: RunConfig) -> str:
    directory = cfg["output.directory"]
    os.makedirs(directory, exist_ok=True)
    return directory


def _write_metadata(cfg: RunConfig, directory: str, name: str, extra: dict) -> str:
    payload = {
        "tool": {"name": "qct", "version": __version__},
        "command": name,
        "config": cfg.flat(),
        **extra,
    }
    path = os.path.join(directory, f"{name}-metadata.json")
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _initial_state(cfg: RunConfig):
    grid = cfg.grid()
    hbar = cfg["quantum.hbar"]
    return coherent_state(grid, cfg["criteria.x0"], cfg["criteria.p0"], hbar)


def _measured_lambda(cfg: RunConfig):
    return lyapunov_benettin(
        cfg.hamiltonian(), cfg["criteria.x0"], cfg["criteria.p0"],
        t_span=cfg["criteria.lyapunov_t_span"], dt=cfg["criteria.lyapunov_dt"],
        renorm_every=cfg["criteria.lyapunov_renorm_every"],
        n_orbits=cfg["criteria.lyapunov_n_orbits"],
        ic_spread=np.sqrt(cfg["quantum.hbar"] / 2.0), seed=cfg["run.seed"],
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_reproduce_fig1(cfg: RunConfig, threads: int) -> int:
    """One conditioned trajectory to t_final; dump the final Wigner grid
    and the position density."""
    directory = _outdir(cfg)
    psi0 = _initial_state(cfg)
    spec = cfg.hamiltonian()
    meas = cfg.measurement()
    dt = cfg["quantum.dt"]
    t_final = cfg["run.t_final"]
    noise = NoisePath.generate(cfg["run.seed"], 0, dt, int(round(t_final / dt)))
    rec = run_trajectory(psi0, spec, meas, t_final, dt, noise,
                         record_every=cfg["run.record_every"],
                         snapshot_times=(t_final,))
    _, snap = rec.snapshots[-1]
    grid_w = wigner(snap, cfg.n_p())
    dump = os.path.join(directory, "fig1_wigner.qctw")
    write_qctw(dump, grid_w)
    dens_lines = ["x,density"]
    for xi, di in zip(snap.grid.x, snap.density()):
        dens_lines.append(f"{format_float(xi)},{format_float(di)}")
    dens_lines.append("")
    dens_path = os.path.join(directory, "fig1_position_density.csv")
    atomic_write_text(dens_path, "\n".join(dens_lines))
    if "csv" in cfg["output.formats"]:
        write_grid_csv(os.path.join(directory, "fig1_wigner.csv"), grid_w)
    final = moments(snap)
    _write_metadata(cfg, directory, "fig1", {
        "outputs": {"wigner": dump, "position_density": dens_path},
        "final_moments": {"mean_x": final.mean_x, "mean_p": final.mean_p,
                          "var_x": final.var_x, "var_p": final.var_p},
        "clip_events": rec.clip_events,
    })
    print(f"wrote {dump} (V_x at t={t_final:g}: {final.var_x:.4f})")
    return 0


def cmd_reproduce_fig2(cfg: RunConfig, threads: int) -> int:
    """Mean-position time series of one conditioned trajectory."""
    directory = _outdir(cfg)
    psi0 = _initial_state(cfg)
    spec = cfg.hamiltonian()
    meas = cfg.measurement()
    dt = cfg["quantum.dt"]
    t_final = cfg["run.t_final"]
    noise = NoisePath.generate(cfg["run.seed"], 0, dt, int(round(t_final / dt)))
    rec = run_trajectory(psi0, spec, meas, t_final, dt, noise,
                         record_every=cfg["run.record_every"])
    csv_path = os.path.join(directory, "fig2_trajectory.csv")
    rec.write_csv(csv_path)
    metric = overall_noise_metric(rec, spec)
    _write_metadata(cfg, directory, "fig2", {
        "outputs": {"trajectory": csv_path},
        "noise_metric": metric,
        "clip_events": rec.clip_events,
    })
    print(f"wrote {csv_path} (noise metric {metric:.4f})")
    return 0


def cmd_lyapunov(cfg: RunConfig, threads: int) -> int:
    est = _measured_lambda(cfg)
    directory = _outdir(cfg)
    path = os.path.join(directory, "lyapunov.json")
    atomic_write_text(path, json.dumps(est.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"lambda_bar = {est.lambda_bar:.4f} +- {est.std_err:.4f} "
          f"(n_orbits={est.n_orbits}, t_span={est.t_span:g})")
    print(f"wrote {path}")
    return 0


def cmd_classify(cfg: RunConfig, threads: int) -> int:
    """Lyapunov estimate, phase-space averages, then the full inequality
    report."""
    directory = _outdir(cfg)
    spec = cfg.hamiltonian()
    meas = cfg.measurement()
    est = _measured_lambda(cfg)
    averages = phase_space_averages(spec, (cfg["criteria.x0"], cfg["criteria.p0"]),
                                    t_span=cfg["criteria.average_t_span"])
    A = accessible_area(cfg["criteria.x_bound"], cfg["criteria.p_bound"])
    scales = action_scales(spec.m, meas.hbar, averages, A, est.lambda_bar)
    report = classify(spec, meas, averages, scales, est.lambda_bar,
                      margin_factor=cfg["criteria.margin_factor"])
    report.inputs["lambda_std_err"] = est.std_err
    path = os.path.join(directory, "regime_report.json")
    atomic_write_text(path, report.to_json() + "\n")
    print(report.table())
    print(f"\nregime: {report.label}  (branch: {report.branch_taken})")
    print(f"wrote {path}")
    return 0


def cmd_weak_demo(cfg: RunConfig, threads: int) -> int:
    """Ensemble-averaged Wigner function against the matched classical
    Langevin density: half-L1 distance and negativity over time."""
    directory = _outdir(cfg)
    spec = cfg.hamiltonian()
    meas = cfg.measurement()
    psi0 = _initial_state(cfg)
    dt = cfg["quantum.dt"]
    times = sorted(float(t) for t in cfg["run.wigner_times"])
    t_final = max(times)
    avg = average_ensemble(psi0, spec, meas, t_final, dt, cfg["run.n_traj"],
                           cfg["run.seed"], times, n_p=cfg.n_p(),
                           workers=threads)

    ens0 = sample_coherent_matched(cfg["criteria.x0"], cfg["criteria.p0"],
                                   meas.hbar, cfg["classical.n_samples"],
                                   cfg["run.seed"], stream_index=10_000)
    snapshots = evolve_ensemble(ens0, spec, meas.D, 0.0, t_final,
                                cfg["classical.dt"], seed=cfg["run.seed"],
                                stream_index=10_001, record_times=times)
    snap_map = {round(t, 9): e for t, e in snapshots}

    est = _measured_lambda(cfg)
    A = accessible_area(cfg["criteria.x_bound"], cfg["criteria.p_bound"])
    xi = 1.0 if cfg["criteria.xi_mode"] == "min" else A / meas.hbar
    try:
        scales_w = weak_times(meas.D, spec.m, est.lambda_bar, meas.hbar, xi, A)
        cell = scales_w.l  # target coarse cell scale
    except DomainError:
        scales_w = None
        cell = None
    coarse = _pick_coarse_cells(avg.grids[0], cell, spec.m, est.lambda_bar)

    l1 = np.empty(len(times))
    negs = np.empty(len(times))
    for i, (t, W) in enumerate(zip(avg.times, avg.grids)):
        ens = snap_map.get(round(cfg["classical.dt"] * round(t / cfg["classical.dt"]), 9))
        if ens is None:
            ens = snapshots[i][1]
        hist = density_histogram(ens, *edges_like(W))
        l1[i] = density_distance(W, hist, coarse_cells=coarse)
        negs[i] = negativity(W)
    series = ComparisonSeries(times=np.asarray(avg.times), l1_distance=l1,
                              negativity=negs,
                              noise_metric=np.full(len(times), np.nan))
    csv_path = os.path.join(directory, "weak_demo.csv")
    series.write_csv(csv_path)
    extra = {
        "outputs": {"series": csv_path},
        "coarse_cells": coarse,
        "lambda_bar": est.lambda_bar,
        "clip_events": avg.clip_events,
    }
    if scales_w is not None:
        extra["t_qc"] = scales_w.t_qc
        extra["smearing_length"] = scales_w.l
    _write_metadata(cfg, directory, "weak_demo", extra)
    print(f"wrote {csv_path}")
    return 0


def _pick_coarse_cells(W, cell_scale, m, lambda_bar) -> int:
    """Largest power-of-two cell count whose cell area is at least the
    smearing area l^2 (falls back to 64 when the scale is unavailable)."""
    if cell_scale is None:
        return min(64, W.n_x)
    scale = np.sqrt(m * lambda_bar)
    dx_target = cell_scale / scale
    dp_target = cell_scale * scale
    n = min(W.n_x, W.n_p)
    best = 2
    c = 2
    while c <= n:
        if W.n_x % c == 0 and W.n_p % c == 0:
            if (W.n_x * W.dx / c) >= dx_target or (W.n_p * W.dp / c) >= dp_target:
                best = c
        c *= 2
    return best


def cmd_simulate_quantum(cfg: RunConfig, threads: int) -> int:
    directory = _outdir(cfg)
    psi0 = _initial_state(cfg)
    spec = cfg.hamiltonian()
    meas = cfg.measurement()
    dt = cfg["quantum.dt"]
    t_final = cfg["run.t_final"]
    times = tuple(float(t) for t in cfg["run.wigner_times"] if 0 <= float(t) <= t_final)
    noise = NoisePath.generate(cfg["run.seed"], 0, dt, int(round(t_final / dt)))
    rec = run_trajectory(psi0, spec, meas, t_final, dt, noise,
                         record_every=cfg["run.record_every"],
                         snapshot_times=times)
    csv_path = os.path.join(directory, "quantum_trajectory.csv")
    rec.write_csv(csv_path)
    dumps = []
    for t, snap in rec.snapshots:
        path = os.path.join(directory, f"wigner_t{t:g}.qctw")
        write_qctw(path, wigner(snap, cfg.n_p()))
        dumps.append(path)
    _write_metadata(cfg, directory, "simulate_quantum", {
        "outputs": {"trajectory": csv_path, "wigner_dumps": dumps},
        "clip_events": rec.clip_events,
    })
    print(f"wrote {csv_path} and {len(dumps)} dump(s)")
    return 0


def cmd_simulate_classical(cfg: RunConfig, threads: int) -> int:
    directory = _outdir(cfg)
    spec = cfg.hamiltonian()
    meas = cfg.measurement()
    ens0 = sample_coherent_matched(cfg["criteria.x0"], cfg["criteria.p0"],
                                   meas.hbar, cfg["classical.n_samples"],
                                   cfg["run.seed"], stream_index=10_000)
    snaps = evolve_ensemble(ens0, spec, meas.D, 0.0, cfg["run.t_final"],
                            cfg["classical.dt"], seed=cfg["run.seed"],
                            stream_index=10_001)
    t, ens = snaps[-1]
    # histogram axes mirror the quantum grid so densities are comparable
    psi0 = _initial_state(cfg)
    template = wigner(psi0, cfg.n_p())
    hist = density_histogram(ens, *edges_like(template))
    path = os.path.join(directory, "classical_density.qctw")
    write_qctw(path, hist)
    mom = ens.moments()
    _write_metadata(cfg, directory, "simulate_classical", {
        "outputs": {"density": path},
        "final_moments": {"mean_x": mom.mean_x, "mean_p": mom.mean_p,
                          "var_x": mom.var_x, "var_p": mom.var_p},
    })
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "reproduce-fig1": cmd_reproduce_fig1,
    "reproduce-fig2": cmd_reproduce_fig2,
    "classify": cmd_classify,
    "weak-demo": cmd_weak_demo,
    "lyapunov": cmd_lyapunov,
    "simulate-quantum": cmd_simulate_quantum,
    "simulate-classical": cmd_simulate_classical,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qct",
        description="Continuously measured particle dynamics and "
                    "quantum-to-classical transition criteria.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0]
                           if fn.__doc__ else None)
        p.add_argument("--config", help="TOML config file (or a metadata JSON "
                                        "from a previous run)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", help="override output.directory")
        p.add_argument("--margin-factor", type=float,
                       help="override criteria.margin_factor")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes (wall time only, never results)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        threads = _resolve_threads(args)
        return COMMANDS[args.command](cfg, threads)
    except ConfigError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: numerical domain: {exc}", file=sys.stderr)
        return 3
    except RuntimeInvariantError as exc:
        print(f"error: runtime invariant: {exc}", file=sys.stderr)
        return 4
    except QctError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
