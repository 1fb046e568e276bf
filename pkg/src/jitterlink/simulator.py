"""Trial orchestration: single trajectories, Monte Carlo ensembles, and the
empirical oracles used by the validation suite."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ScenarioConfig
from .engine import BlockResult, simulate_block
from .resilience import ResilienceSample, classify_phase

__all__ = [
    "Trajectory",
    "EnsembleStats",
    "run_trial",
    "run_ensemble",
    "estimate_crossing",
    "oracle_empirical_pdf",
]

BLOCK_SIZE = 2048  # trials per block; fixed so results never depend on parallelism


@dataclass(frozen=True)
class Trajectory:
    """One trial: per-slot resilience samples plus the stressor and
    allocation traces."""

    samples: tuple[ResilienceSample, ...]
    interference_trace: tuple[float, ...]
    distance_trace: tuple[float, ...]
    power_trace: tuple[float, ...]
    antenna_trace: tuple[int, ...]
    seed: int
    trial_index: int
    t_f: int | None


@dataclass
class EnsembleStats:
    """Per-slot ensemble means and standard errors plus the crossing-slot
    distribution."""

    slots: np.ndarray
    mean: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)
    crossing_slots: np.ndarray = None     # first G<=0 slot per crossed trial
    restored_slots: np.ndarray = None     # first post-failure C>=0.99 slot
    alarm_slopes: np.ndarray = None       # per-trial mean intolerance rise per slot
    recovery_slopes: np.ndarray = None    # per-trial mean intolerance drop per slot
    restore_latency: np.ndarray = None    # slots from failure to C>=0.99 per trial
    n_trials: int = 0

    @property
    def crossed_fraction(self) -> float:
        if self.n_trials == 0:
            return 0.0
        return len(self.crossing_slots) / self.n_trials

    def recovery_summary(self) -> dict:
        """Trial-aligned phase slopes: the mean per-slot intolerance change
        over the alarming phase and over the recovery ramp, and their ratio."""
        out = {"alarm_slope": None, "recovery_slope": None, "ratio": None,
               "restore_latency_median": None}
        if self.alarm_slopes is not None and len(self.alarm_slopes):
            out["alarm_slope"] = float(np.median(self.alarm_slopes))
        if self.recovery_slopes is not None and len(self.recovery_slopes):
            out["recovery_slope"] = float(np.median(self.recovery_slopes))
            out["restore_latency_median"] = float(np.median(self.restore_latency))
        if out["alarm_slope"] and out["recovery_slope"]:
            out["ratio"] = abs(out["recovery_slope"]) / abs(out["alarm_slope"])
        return out


def _trajectory_from_block(cfg: ScenarioConfig, block: BlockResult, row: int,
                           trial_index: int) -> Trajectory:
    k = block.trajectories[row]
    phases = classify_phase(k["limit_state"], k["alloc_active"],
                            normal_threshold=cfg.normal_threshold,
                            restore_target=cfg.restore_target)
    samples = tuple(
        ResilienceSample(
            slot=k["slot"][i],
            p_ji_minus=k["p_ji_minus"][i],
            p_ji_plus=k["p_ji_plus"][i],
            capacity=k["capacity"][i],
            load=k["load"][i],
            limit_state=k["limit_state"][i],
            arer=k["arer"][i],
            phase=phases[i],
            power=k["power"][i],
            antennas=k["antennas"][i],
            delta=cfg.delta,
        )
        for i in range(len(k["slot"]))
    )
    t_f = int(block.crossing_slot[row]) if block.crossing_slot[row] >= 0 else None
    return Trajectory(
        samples=samples,
        interference_trace=tuple(k["interference"]),
        distance_trace=tuple(k["distance"]),
        power_trace=tuple(k["power"]),
        antenna_trace=tuple(k["antennas"]),
        seed=cfg.seed,
        trial_index=trial_index,
        t_f=t_f,
    )


def run_trial(config: ScenarioConfig, seed: int, trial_index: int = 0) -> Trajectory:
    """Simulate one trial; deterministic in (config, seed, trial_index)."""
    cfg = config if config.seed == seed else replace(config, seed=seed)
    block = simulate_block(cfg, [trial_index], keep=1)
    return _trajectory_from_block(cfg, block, 0, trial_index)


def run_ensemble(config: ScenarioConfig, n_trials: int | None = None,
                 parallelism: int | None = None) -> EnsembleStats:
    """Aggregate independent trials into per-slot means and standard errors.

    Trials are partitioned into fixed-size blocks with per-trial random
    streams keyed by (seed, trial index); block results are reduced in block
    order, so the output is identical for any parallelism degree.
    """
    n = n_trials if n_trials is not None else config.trials
    if n < 1:
        raise ValueError("n_trials must be >= 1")
    workers = parallelism if parallelism is not None else config.parallelism
    starts = list(range(0, n, BLOCK_SIZE))
    blocks_idx = [np.arange(s, min(s + BLOCK_SIZE, n)) for s in starts]

    if workers > 1 and len(blocks_idx) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda ix: simulate_block(config, ix), blocks_idx))
    else:
        blocks = [simulate_block(config, ix) for ix in blocks_idx]

    slots = blocks[0].slots
    metrics = list(blocks[0].sums)
    stats = EnsembleStats(slots=slots, n_trials=n)
    for m in metrics:
        total = np.zeros(len(slots))
        total_sq = np.zeros(len(slots))
        for b in blocks:  # fixed block order for bit-stable reductions
            total += b.sums[m]
            total_sq += b.sumsq[m]
        mean = total / n
        var = np.maximum(total_sq / n - mean * mean, 0.0)
        stats.mean[m] = mean
        stats.stderr[m] = np.sqrt(var / n)
    crossing = np.concatenate([b.crossing_slot for b in blocks])
    restored = np.concatenate([b.restored_slot for b in blocks])
    pji0 = np.concatenate([b.pji_initial for b in blocks])
    pji_cross = np.concatenate([b.pji_at_cross for b in blocks])
    pji_rest = np.concatenate([b.pji_at_restore for b in blocks])
    stats.crossing_slots = crossing[crossing >= 0]
    stats.restored_slots = restored[restored >= 0]
    has_cross = (crossing > 0)
    stats.alarm_slopes = ((pji_cross - pji0)[has_cross] / crossing[has_cross])
    recovered = has_cross & (restored > crossing)
    latency = (restored - crossing)[recovered]
    stats.restore_latency = latency
    stats.recovery_slopes = ((pji_rest - pji_cross)[recovered] / latency)
    return stats


def estimate_crossing(stats: EnsembleStats) -> dict:
    """Median and interquartile range of the per-trial first slot with a
    non-positive limit state; reports no-crossing when no trial failed."""
    if stats.crossing_slots is None or len(stats.crossing_slots) == 0:
        return {"status": "no-crossing", "median": None, "iqr": None, "count": 0}
    q1, med, q3 = np.percentile(stats.crossing_slots, [25, 50, 75])
    return {
        "status": "ok",
        "median": float(med),
        "iqr": float(q3 - q1),
        "count": int(len(stats.crossing_slots)),
        "fraction": stats.crossed_fraction,
    }


def oracle_empirical_pdf(sampler, n: int, bins: int, rng: np.random.Generator):
    """Normalized histogram oracle: draws ``n`` samples from
    ``sampler(size, rng)`` and returns (densities, edges)."""
    if n < 10_000:
        raise ValueError("empirical pdf oracle needs n >= 1e4")
    samples = np.asarray(sampler(n, rng), dtype=float)
    dens, edges = np.histogram(samples, bins=bins, density=True)
    return dens, edges


def l1_distance(dens: np.ndarray, edges: np.ndarray, pdf) -> float:
    """L1 distance between an empirical histogram and a density evaluated at
    the bin midpoints."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    model = np.asarray([pdf(x) for x in mids])
    return float(np.sum(np.abs(dens - model) * widths))
