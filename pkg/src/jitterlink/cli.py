"""Command-line interface: simulate, validate, sweep.

Outputs are plot-ready data only: a per-slot CSV with a fixed column order
plus a JSON manifest echoing the resolved configuration. Exit codes:
0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config, parse_mapping, to_mapping
from .resilience import classify_phase
from .simulator import EnsembleStats, estimate_crossing, run_ensemble, run_trial
from .validate import run_all_checks

CSV_COLUMNS = ("slot", "p_ji_minus", "p_ji_plus", "C", "D", "G", "E_r",
               "phase", "power", "antennas")

SWEEPABLE = {
    "antennas": int,
    "p_interference": float,
    "p_distance": float,
    "single_event_prob": float,
    "tx_power": float,
    "trials": int,
    "seed": int,
}


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    updates = {}
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "stressors", None) is not None:
        updates["stressors"] = args.stressors
    if getattr(args, "allocator", None) is not None:
        updates["allocator"] = args.allocator
    if getattr(args, "parallelism", None) is not None:
        updates["parallelism"] = args.parallelism
    if getattr(args, "antennas", None) is not None:
        updates["antennas"] = args.antennas
    return replace(cfg, **updates) if updates else cfg


def _load(args) -> ScenarioConfig:
    if args.config is None:
        cfg = ScenarioConfig()
    else:
        cfg = load_config(args.config)
    return _apply_overrides(cfg, args)


def _phase_column(stats: EnsembleStats, cfg: ScenarioConfig) -> list[str]:
    active = [cfg.allocator != "off" and bool(np.any(stats.mean["limit_state"][: t + 1] <= 0.0))
              for t in range(len(stats.slots))]
    return classify_phase(stats.mean["limit_state"], active,
                          normal_threshold=cfg.normal_threshold,
                          restore_target=cfg.restore_target)


def _write_ensemble_csv(path: Path, stats: EnsembleStats, cfg: ScenarioConfig) -> None:
    phases = _phase_column(stats, cfg)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for t in range(len(stats.slots)):
            writer.writerow([
                int(stats.slots[t]),
                f"{stats.mean['p_ji_minus'][t]:.10g}",
                f"{stats.mean['p_ji_plus'][t]:.10g}",
                f"{stats.mean['capacity'][t]:.10g}",
                f"{stats.mean['load'][t]:.10g}",
                f"{stats.mean['limit_state'][t]:.10g}",
                f"{stats.mean['arer'][t]:.10g}",
                phases[t],
                f"{stats.mean['power'][t]:.10g}",
                f"{stats.mean['antennas'][t]:.10g}",
            ])


def _write_trial_csv(path: Path, cfg: ScenarioConfig) -> None:
    traj = run_trial(cfg, cfg.seed, trial_index=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in traj.samples:
            writer.writerow([
                s.slot, f"{s.p_ji_minus:.10g}", f"{s.p_ji_plus:.10g}",
                f"{s.capacity:.10g}", f"{s.load:.10g}", f"{s.limit_state:.10g}",
                f"{s.arer:.10g}", s.phase, f"{s.power:.10g}", s.antennas,
            ])


def _phase_slopes(stats: EnsembleStats, cfg: ScenarioConfig) -> dict:
    """Mean risk-exposure rate over the alarming and recovery phases."""
    g = stats.mean["limit_state"]
    pji = stats.mean["p_ji_plus"]
    cross = np.flatnonzero(g <= 0.0)
    out = {"alarming": None, "recovery": None, "ratio": None}
    if len(cross) == 0:
        if len(pji) > 1:
            out["alarming"] = float((pji[-1] - pji[0]) / (len(pji) - 1))
        return out
    t_f = int(cross[0])
    if t_f > 0:
        out["alarming"] = float((pji[t_f] - pji[0]) / t_f)
    cap = stats.mean["capacity"]
    rec = np.flatnonzero(cap[t_f:] >= 0.99)
    if len(rec) > 0 and rec[0] > 0:
        t_r = int(rec[0])
        out["recovery"] = float((pji[t_f + t_r] - pji[t_f]) / t_r)
        if out["alarming"]:
            out["ratio"] = abs(out["recovery"]) / abs(out["alarming"])
    return out


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    stats = run_ensemble(cfg)
    runtime = time.perf_counter() - start
    _write_ensemble_csv(out_dir / "ensemble.csv", stats, cfg)
    _write_trial_csv(out_dir / "trial0.csv", cfg)
    manifest = {
        "config": to_mapping(cfg),
        "seed": cfg.seed,
        "trials": stats.n_trials,
        "crossing": estimate_crossing(stats),
        "arer_slopes": _phase_slopes(stats, cfg),
        "restored": {
            "count": int(len(stats.restored_slots)),
            "median_slot": float(np.median(stats.restored_slots))
            if len(stats.restored_slots) else None,
        },
        "runtime_s": runtime,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {out_dir / 'ensemble.csv'}, {out_dir / 'trial0.csv'}, "
          f"{out_dir / 'manifest.json'} ({runtime:.1f}s)")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    results = run_all_checks(cfg)
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        if r.informational:
            status = "INFO"
        elif r.passed:
            status = "PASS"
        else:
            status = "FAIL"
            failures += 1
        tol = "-" if r.tolerance == float("inf") else f"{r.tolerance:.3g}"
        line = f"{status}  {r.name:<{width}}  measured={r.measured:.3g}  tol={tol}"
        if r.note:
            line += f"  ({r.note})"
        print(line)
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.parameter not in SWEEPABLE:
        print(f"error: unknown sweep parameter {args.parameter!r}; "
              f"choose from {sorted(SWEEPABLE)}", file=sys.stderr)
        return 2
    if not args.values:
        print("warning: empty sweep value list; nothing to do", file=sys.stderr)
        return 0
    cast = SWEEPABLE[args.parameter]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for raw in args.values:
        value = cast(raw)
        if args.parameter == "tx_power":
            cfg_v = replace(cfg, tx_power_w=value)
        else:
            cfg_v = replace(cfg, **{args.parameter: value})
        stats = run_ensemble(cfg_v)
        phases = _phase_column(stats, cfg_v)
        for t in range(len(stats.slots)):
            rows.append([
                args.parameter, value, int(stats.slots[t]),
                f"{stats.mean['p_ji_minus'][t]:.10g}",
                f"{stats.mean['p_ji_plus'][t]:.10g}",
                f"{stats.mean['capacity'][t]:.10g}",
                f"{stats.mean['load'][t]:.10g}",
                f"{stats.mean['limit_state'][t]:.10g}",
                f"{stats.mean['arer'][t]:.10g}",
                phases[t],
                f"{stats.mean['power'][t]:.10g}",
                f"{stats.mean['antennas'][t]:.10g}",
            ])
    path = out_dir / "sweep.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("parameter", "value") + CSV_COLUMNS)
        writer.writerows(rows)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jitterlink",
        description="V2V link jitter-resilience simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario file (flat key-value text or JSON echo)")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--stressors", choices=("both", "interference", "distance"))
        p.add_argument("--allocator", choices=("off", "power", "antennas"))
        p.add_argument("--parallelism", type=int)
        p.add_argument("--antennas", type=int)

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo ensemble")
    common(p_sim)
    p_sim.add_argument("--out", default="out", help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_val = sub.add_parser("validate", help="run the oracle cross-check suite")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_swp = sub.add_parser("sweep", help="repeat the simulation over a parameter grid")
    common(p_swp)
    p_swp.add_argument("--out", default="out", help="output directory")
    p_swp.add_argument("--parameter", required=True)
    p_swp.add_argument("--values", nargs="*", default=[])
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
