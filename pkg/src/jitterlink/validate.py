"""Cross-validation oracle suite.

Every analytic quantity with an independent check lives here: quadrature
normalization of the stressor densities, Monte Carlo moment agreement, the
one-step jitter-moment oracle, the grid-convolution check of the Gaussian
intolerance approximation, finite-difference sensitivity checks, and the
grid oracle for the allocator. The CLI ``validate`` command runs the whole
table; the acceptance tests reuse the individual checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from . import intolerance, link, stressors
from .allocator import AllocationConstraints, reduced_objective, solve_power
from .config import ScenarioConfig
from .states import snapshot_at_slot

__all__ = ["CheckResult", "run_all_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""
    informational: bool = False


def _result(name, measured, tolerance, note="", informational=False):
    return CheckResult(name, float(measured), float(tolerance),
                       bool(measured <= tolerance) or informational, note, informational)


def check_interference_normalization(cfg: ScenarioConfig, rng, n_sets: int = 10) -> CheckResult:
    worst = 0.0
    for _ in range(n_sets):
        m = int(rng.integers(1, 8))
        dists = rng.uniform(cfg.dist_min, cfg.dist_max, m)
        betas = cfg.interferer_power_w * dists ** (-cfg.path_loss_exp)
        span = 60.0 * float(np.sum(2.0 * betas))
        total, _ = integrate.quad(lambda l: stressors.interference_pdf(betas, l),
                                  0.0, span, limit=200)
        worst = max(worst, abs(total - 1.0))
    return _result("interference density normalization", worst, 1e-6)


def check_distance_normalization(cfg: ScenarioConfig, rng, n_sets: int = 10) -> CheckResult:
    worst = 0.0
    for _ in range(n_sets):
        proc = stressors.new_distance_process(
            initial_distance=float(rng.uniform(5.0, 50.0)),
            drift=float(rng.uniform(0.0, 1.0)),
            variance0=float(rng.uniform(0.05, 1.0)),
            variance_growth=float(rng.uniform(0.1, 0.8)),
        )
        slot = int(rng.integers(1, 20))
        mean_path = proc.initial_distance + proc.drift * slot
        env = stressors.variance_envelope(proc.variance0, proc.variance_growth, slot)
        hi = mean_path + 12.0 * math.sqrt(env)
        total, _ = integrate.quad(lambda d: stressors.distance_pdf(proc, d, slot),
                                  mean_path, hi, limit=200)
        worst = max(worst, abs(total - 1.0))
    return _result("distance density normalization", worst, 1e-6)


def check_interference_moments_mc(cfg: ScenarioConfig, rng, n: int = 1_000_000) -> CheckResult:
    dists = rng.uniform(cfg.dist_min, cfg.dist_max, 5)
    betas = cfg.interferer_power_w * dists ** (-cfg.path_loss_exp)
    mean, var = stressors.interference_moments(betas, mode="exact")
    draws = np.sum(rng.exponential(2.0 * betas, size=(n, len(betas))), axis=1)
    err = max(abs(draws.mean() - mean) / mean, abs(draws.var() - var) / var)
    return _result("interference moments vs Monte Carlo", err, 0.01)


def check_distance_moments_mc(cfg: ScenarioConfig, rng, n: int = 1_000_000) -> CheckResult:
    proc = stressors.new_distance_process(cfg.initial_distance, cfg.drift,
                                          cfg.variance0, cfg.variance_growth)
    slot = 5
    mean, var = stressors.distance_moments(proc, slot)
    env = stressors.variance_envelope(cfg.variance0, cfg.variance_growth, slot)
    draws = cfg.initial_distance + cfg.drift * slot \
        + math.sqrt(env) * np.abs(rng.standard_normal(n))
    err = max(abs(draws.mean() - mean) / mean, abs(draws.var() - var) / var)
    return _result("distance moments vs Monte Carlo", err, 0.01)


def _one_step_oracle(cfg: ScenarioConfig, slot: int, eps_i: int, eps_d: int,
                     rng, n: int = 400_000):
    """Brute-force one-step jitter transition at the mean state of ``slot``."""
    snap = snapshot_at_slot(cfg, slot)
    p_i, p_d = cfg.event_probs()
    lnk = link.LinkParams(cfg.tx_power_w, cfg.wavelength, cfg.noise_power_w,
                          cfg.bandwidth_hz, cfg.packet_bits, 1.0, cfg.antennas)
    zeta = snap.interference_raw
    s_d = link.sensitivity_distance(lnk, zeta, snap.distance, p_i, p_d)
    s_i = link.sensitivity_interference(lnk, zeta, snap.distance, p_i, p_d)
    lam = snap.lam_next
    counts = rng.poisson(lam, n)
    total = int(counts.sum())
    dists = rng.uniform(cfg.dist_min, cfg.dist_max, total)
    betas = cfg.interferer_power_w * dists ** (-cfg.path_loss_exp)
    values = rng.exponential(2.0 * betas)
    d_zeta = np.zeros(n)
    np.add.at(d_zeta, np.repeat(np.arange(n), counts), values)
    d_dist = cfg.drift + snap.sigma_now * np.abs(rng.standard_normal(n))
    tau_prev = 0.0
    if eps_i and eps_d:
        tau_next = tau_prev + s_i * d_zeta + s_d * d_dist
    elif eps_d:
        tau_next = tau_prev + s_d * d_dist
    elif eps_i:
        tau_next = tau_prev + s_i * d_zeta
    else:
        tau_next = np.full(n, tau_prev)
    moments = intolerance.StressorMoments(
        mean_distance=cfg.drift + math.sqrt(2.0 / math.pi) * snap.sigma_now,
        var_distance=(1.0 - 2.0 / math.pi) * snap.sigma_now ** 2,
        mean_interference=lam * 2.0 * cfg.mean_beta,
        var_interference=lam * 8.0 * cfg.mean_beta_sq,
    )
    analytic = intolerance.jitter_moments(s_d, s_i, moments, eps_i, eps_d, tau_prev)
    return analytic, float(tau_next.mean()), float(tau_next.var())


def check_delta_method(cfg: ScenarioConfig, rng) -> CheckResult:
    worst = 0.0
    for slot, eps_i, eps_d in ((5, 1, 1), (15, 1, 0), (25, 0, 1), (30, 1, 1)):
        analytic, mc_mean, mc_var = _one_step_oracle(cfg, slot, eps_i, eps_d, rng)
        scale = max(abs(analytic.mean), 1e-30)
        worst = max(worst, abs(analytic.mean - mc_mean) / scale)
        if analytic.variance > 0.0:
            worst = max(worst, abs(analytic.variance - mc_var) / analytic.variance)
    return _result("delta-method jitter moments vs one-step oracle", worst, 0.05)


def _branch_exact_density(y_grid: np.ndarray, x0: float, weight: float) -> np.ndarray:
    """Exact density of w/2*(1+erf(x)) for x ~ N(x0, 1/2) on the y grid."""
    from scipy.special import erfinv
    dens = np.zeros_like(y_grid)
    inside = (y_grid > 0.0) & (y_grid < weight)
    x = erfinv(2.0 * y_grid[inside] / weight - 1.0)
    fx = np.exp(-((x - x0) ** 2)) / math.sqrt(math.pi)  # N(x0, 1/2) density
    dens[inside] = fx * math.sqrt(math.pi) / weight * np.exp(x ** 2)
    return dens


def check_laplace_vs_convolution(cfg: ScenarioConfig, rng, n_states: int = 20,
                                 grid: int = 4096) -> CheckResult:
    """Peak of the numerically convolved three-branch density vs the
    closed-form Gaussian mean, as a fraction of the support width."""
    p_i = p_d = 0.5
    support = p_i + p_d - p_i * p_d
    weights = (p_i * p_d, (1.0 - p_i) * p_d, (1.0 - p_d) * p_i)
    worst = 0.0
    for _ in range(n_states):
        x0s = rng.uniform(-1.5, 1.5, 3)
        y = np.linspace(0.0, support, grid)
        dy = y[1] - y[0]
        conv = None
        mean_total, var_total = 0.0, 0.0
        for w, x0 in zip(weights, x0s):
            dens = _branch_exact_density(y, float(x0), w)
            y0, sig = intolerance.component_laplace(float(x0), 2.0, w)
            mean_total += y0
            var_total += sig * sig
            conv = dens if conv is None else np.convolve(conv, dens)[:len(y) * 3] * dy
        peak = float(np.argmax(conv)) * dy
        worst = max(worst, abs(peak - mean_total) / support)
    return _result("closed-form peak vs grid convolution", worst, 0.02)


def check_sensitivity_fd(cfg: ScenarioConfig, rng, n_points: int = 100) -> CheckResult:
    lnk = link.LinkParams(cfg.tx_power_w, cfg.wavelength, cfg.noise_power_w,
                          cfg.bandwidth_hz, cfg.packet_bits, 1.0, 1)
    worst = 0.0
    for _ in range(n_points):
        d = float(rng.uniform(5.0, 200.0))
        zeta = float(rng.uniform(1e-9, 5e-7))
        f1 = link.delay_slope_distance(lnk, zeta, d)
        h = 1e-4 * d
        fd = (link.transmission_delay(lnk, link.sinr(lnk, zeta, d + h))
              - link.transmission_delay(lnk, link.sinr(lnk, zeta, d - h))) / (2 * h)
        worst = max(worst, abs(f1 - fd) / abs(fd))
        f1p = link.delay_slope_interference(lnk, zeta, d)
        hz = 1e-4 * (cfg.noise_power_w + zeta)
        fdz = (link.transmission_delay(lnk, link.sinr(lnk, zeta + hz, d))
               - link.transmission_delay(lnk, link.sinr(lnk, zeta - hz, d))) / (2 * hz)
        worst = max(worst, abs(f1p - fdz) / abs(fdz))
    return _result("analytic sensitivities vs finite differences", worst, 1e-5)


def _regression_snapshots(cfg: ScenarioConfig):
    snaps = []
    for mode, slot, tau_scale in (("distance", 48, 1.0), ("distance", 55, 1.2),
                                  ("interference", 30, 1.0), ("interference", 40, 1.1),
                                  ("both", 45, 1.0)):
        c = replace(cfg, stressors=mode)
        tol = c.tol_distance_s if mode == "distance" else c.tol_interference_s
        snaps.append(snapshot_at_slot(c, slot, tau=tau_scale * tol, p_ji_minus=0.5))
    return snaps


def check_power_solver_grid(cfg: ScenarioConfig, rng, grid_points: int = 10_000) -> CheckResult:
    cons = AllocationConstraints(
        p_max_per_level=cfg.power_step_max_w, p_total=cfg.power_budget_w,
        n_max=cfg.antenna_max, alpha=cfg.risk_alpha, tol=cfg.kkt_tol,
        levels=cfg.levels, steps_per_level=cfg.steps_per_level,
    )
    worst_steps = 0.0
    for snap in _regression_snapshots(cfg):
        decision = solve_power(snap, cons, antennas=cfg.antennas)
        box = min(cons.p_max_per_level, cons.p_total)
        grid = np.linspace(0.0, box, grid_points)
        f_vals = [reduced_objective(p, cfg.antennas, snap, cons.alpha) for p in grid]
        best = grid[int(np.argmin(f_vals))]
        step = box / (grid_points - 1)
        worst_steps = max(worst_steps, abs(decision.power - best) / step)
    return _result("power bisection vs grid argmin [grid steps]", worst_steps, 2.0)


def check_chance_constraint(cfg: ScenarioConfig, rng) -> CheckResult:
    worst = 0.0
    alpha = cfg.risk_alpha
    for snap in _regression_snapshots(cfg):
        gauss = snap.gaussian(0.0, cfg.antennas)
        psi = gauss.mean + intolerance.normal_quantile(1.0 - alpha) * gauss.std \
            + snap.p_ji_minus - 1.0
        if gauss.std == 0.0:
            continue
        prob = intolerance.normal_cdf(
            (psi + 1.0 - snap.p_ji_minus - gauss.mean) / gauss.std)
        worst = max(worst, abs(prob - (1.0 - alpha)))
    return _result("chance-constraint feasibility at the optimum", worst, 1e-9)


def check_degenerate_betas(cfg: ScenarioConfig, rng) -> CheckResult:
    beta = cfg.interferer_power_w * 50.0 ** (-cfg.path_loss_exp)
    betas = np.array([beta, beta * (1.0 + 1e-12), beta * 2.0])
    span = 60.0 * float(np.sum(2.0 * betas))
    total, _ = integrate.quad(lambda l: stressors.interference_pdf(betas, l),
                              0.0, span, limit=200)
    return _result("degenerate-rate fallback normalization", abs(total - 1.0), 1e-3)


def check_literal_moments(cfg: ScenarioConfig, rng) -> CheckResult:
    beta = cfg.interferer_power_w * 40.0 ** (-cfg.path_loss_exp)
    exact_mean, _ = stressors.interference_moments([beta], mode="exact")
    literal_mean, _ = stressors.interference_moments([beta], mode="paper-literal")
    gap = abs(literal_mean - exact_mean) / exact_mean
    return _result("published-form moment divergence (expected)", gap, math.inf,
                   note=f"single-interferer literal mean {literal_mean:.3g} vs exact {exact_mean:.3g}",
                   informational=True)


ALL_CHECKS = (
    check_interference_normalization,
    check_distance_normalization,
    check_interference_moments_mc,
    check_distance_moments_mc,
    check_delta_method,
    check_laplace_vs_convolution,
    check_sensitivity_fd,
    check_power_solver_grid,
    check_chance_constraint,
    check_degenerate_betas,
    check_literal_moments,
)


def run_all_checks(cfg: ScenarioConfig, seed: int | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return [check(cfg, rng) for check in ALL_CHECKS]
