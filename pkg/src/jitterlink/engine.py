"""Vectorized Monte Carlo engine.

A block of trials advances through the slot loop together as NumPy arrays.
Every random draw comes from a per-trial generator seeded by
``(base_seed, trial_index)`` in a fixed layout, so results do not depend on
block boundaries, thread count, or whether the allocator branch runs; the
recovery controller is deterministic and consumes no randomness.

Per slot the engine evaluates the delay sensitivities at the realized state
(including the slot's fading draw), forms the per-transition stressor
increment moments, and composes the three-branch intolerance probability
with the carried jitter state and the per-stressor jitter tolerances. Event
indicators gate the jitter-state recursion; a geometric sojourn holds the
state between transitions. After the first non-positive limit state the
staged allocator ramps power (or re-selects the antenna count) whenever the
risk exposure rate worsens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .config import ScenarioConfig

__all__ = ["BlockResult", "simulate_block", "trial_generator"]

LN2 = math.log(2.0)
HALF_NORMAL_MEAN = math.sqrt(2.0 / math.pi)   # E|Z| for Z ~ N(0, 1)
HALF_NORMAL_VAR = 1.0 - 2.0 / math.pi
_U_EPS = 1e-12


@dataclass
class BlockResult:
    """Per-slot metric sums over one trial block plus per-trial crossing data."""

    n_trials: int
    slots: np.ndarray
    sums: dict = field(default_factory=dict)      # metric -> (T+1,) sum over trials
    sumsq: dict = field(default_factory=dict)
    crossing_slot: np.ndarray = None              # (n,) first slot with G <= 0, -1 if none
    restored_slot: np.ndarray = None              # (n,) first post-failure slot with C >= 0.99
    pji_initial: np.ndarray = None                # (n,) intolerance at slot 0
    pji_at_cross: np.ndarray = None               # (n,) intolerance at the failure slot
    pji_at_restore: np.ndarray = None             # (n,) intolerance at the restored slot
    trajectories: list = field(default_factory=list)


def trial_generator(base_seed: int, trial_index: int) -> np.random.Generator:
    """Independent per-trial stream; the spawn key makes draws invariant to
    scheduling."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((base_seed, trial_index))))


def _draw_trial(cfg: ScenarioConfig, trial_index: int, horizon: int, lam: np.ndarray):
    """Fixed-layout draws for one trial.

    Order: initial interferer gains/distances, arrival counts, arrival
    gains/distances, spacing fluctuations, link-gain uniforms, event
    uniforms, sojourn uniforms.
    """
    gen = trial_generator(cfg.seed, trial_index)
    n0 = cfg.initial_interferers
    init_gain = gen.exponential(1.0, n0)
    init_dist = gen.uniform(cfg.dist_min, cfg.dist_max, n0)
    counts = gen.poisson(lam) if lam.size else np.zeros(0, dtype=np.int64)
    total = int(counts.sum())
    arr_gain = gen.exponential(1.0, total)
    arr_dist = gen.uniform(cfg.dist_min, cfg.dist_max, total)
    zabs = np.abs(gen.standard_normal(horizon))
    u_gain = gen.random(horizon + 1)
    u_eps_i = gen.random(horizon)
    u_eps_d = gen.random(horizon)
    u_soj = gen.random(horizon)

    alpha = cfg.path_loss_exp
    zeta0 = float(np.sum(cfg.interferer_power_w * init_dist ** (-alpha) * init_gain))
    dz = np.zeros(horizon)
    if total:
        contrib = cfg.interferer_power_w * arr_dist ** (-alpha) * arr_gain
        idx = np.repeat(np.arange(horizon), counts)
        np.add.at(dz, idx, contrib)
    return zeta0, counts.astype(np.int64), dz, zabs, u_gain, u_eps_i, u_eps_d, u_soj


def _aggregate_gain(n_ant: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Antenna-averaged squared gain via the ICDF of a Gamma(n, 1) sum."""
    u = np.clip(u, _U_EPS, 1.0 - _U_EPS)
    out = np.empty_like(u)
    single = n_ant == 1
    if np.any(single):
        out[single] = -np.log1p(-u[single])
    multi = ~single
    if np.any(multi):
        n = n_ant[multi].astype(float)
        out[multi] = sp.gammaincinv(n, u[multi]) / n
    return out


def _geometric_from_uniform(u: np.ndarray, p: float) -> np.ndarray:
    if p >= 1.0:
        return np.ones_like(u, dtype=np.int64)
    u = np.clip(u, _U_EPS, 1.0 - _U_EPS)
    return np.ceil(np.log1p(-u) / math.log1p(-p)).astype(np.int64)


def _delay_terms(p_tot, gain, dist, zeta, cfg: ScenarioConfig):
    """SINR, delay [s], and the two raw delay slopes [s/m], [s/W]."""
    spread_sq = (cfg.wavelength / (4.0 * math.pi)) ** 2 / (dist * dist)
    noise_plus = cfg.noise_power_w + zeta
    gamma = p_tot * gain * spread_sq / noise_plus
    log_term = np.log1p(gamma) / LN2
    delay = cfg.packet_bits / (cfg.bandwidth_hz * log_term)
    denom = LN2 * (1.0 + gamma) * log_term * log_term
    lp_b = cfg.packet_bits / cfg.bandwidth_hz
    slope_d = lp_b * (2.0 * gamma / dist) / denom
    slope_i = lp_b * (gamma / noise_plus - 1.0) / denom
    return gamma, delay, slope_d, slope_i


def _erf_terms(means, variances):
    """erf of the standardized branch arguments with the zero-variance step
    limit."""
    out = np.sign(means)
    ok = variances > 0.0
    if np.any(ok):
        out = np.where(ok, sp.erf(means / np.sqrt(2.0 * np.where(ok, variances, 1.0))), out)
    return out


def _branch_stats(tau, s_i, s_d, mu_z, var_z, mu_d, var_d, tol_i, tol_d):
    m_joint = tau + s_i * mu_z + s_d * mu_d - (tol_i + tol_d)
    v_joint = s_i * s_i * var_z + s_d * s_d * var_d
    m_dist = tau + s_d * mu_d - tol_d
    v_dist = s_d * s_d * var_d
    m_intf = tau + s_i * mu_z - tol_i
    v_intf = s_i * s_i * var_z
    return (m_joint, m_dist, m_intf), (v_joint, v_dist, v_intf)


def _pji(weights, means, variances):
    total = 0.0
    for w, m, v in zip(weights, means, variances):
        if w == 0.0:
            continue
        total = total + 0.5 * w * (1.0 + _erf_terms(m, v))
    return total if isinstance(total, np.ndarray) else np.zeros_like(means[0])


def _gaussian_fg(weights, means, variances):
    """Mean and std of the intolerance approximation (branch-wise local
    Gaussians; variances add)."""
    f = 0.0
    gvar = 0.0
    for w, m, v in zip(weights, means, variances):
        if w == 0.0:
            continue
        erf_t = _erf_terms(m, v)
        f = f + 0.5 * w * (1.0 + erf_t)
        x0_sq = np.where(v > 0.0, m * m / (2.0 * np.maximum(v, 1e-300)), np.inf)
        gvar = gvar + w * w * np.exp(-2.0 * x0_sq) / (2.0 * math.pi)
    return f, np.sqrt(gvar)


class _SlotPhysics:
    """Branch statistics of the upcoming transition as a function of the
    candidate allocation, at the current realized stressor state."""

    def __init__(self, cfg: ScenarioConfig, dist, zeta_raw, tau, mu_z_raw, var_z_raw,
                 mu_d, var_d, p_i, p_d, intf_on, dist_on):
        self.cfg = cfg
        self.dist = dist
        self.zeta_raw = zeta_raw
        self.tau = tau
        self.mu_z_raw = mu_z_raw
        self.var_z_raw = var_z_raw
        self.mu_d = mu_d
        self.var_d = var_d
        self.p_i = p_i
        self.p_d = p_d
        self.intf_on = intf_on
        self.dist_on = dist_on
        self.weights = (p_i * p_d, (1.0 - p_i) * p_d, (1.0 - p_d) * p_i)

    def coupling(self, n_ant):
        # the interferer network mirrors the antenna policy only while the
        # interference stressor is active; otherwise the field is a static
        # unit-coupling background
        if not self.intf_on:
            return np.ones_like(np.asarray(n_ant, dtype=float))
        return np.asarray(n_ant, dtype=float) ** self.cfg.interferer_antenna_exponent

    def sensitivities(self, p_tot, gain, n_ant):
        c = self.coupling(n_ant)
        zeta_eff = c * self.zeta_raw
        _, delay, slope_d, slope_i = _delay_terms(p_tot, gain, self.dist, zeta_eff, self.cfg)
        hard = np.asarray(n_ant, dtype=float) ** (-self.cfg.diversity_hardening)
        s_d = self.p_d * slope_d * hard
        s_i = self.p_i * slope_i
        return delay, s_d, s_i, c

    def branch_stats(self, p_tot, gain, n_ant, tau):
        delay, s_d, s_i, c = self.sensitivities(p_tot, gain, n_ant)
        mu_z = self.mu_z_raw * c if self.intf_on else 0.0
        var_z = self.var_z_raw * c * c if self.intf_on else 0.0
        mu_d = self.mu_d if self.dist_on else 0.0
        var_d = self.var_d if self.dist_on else 0.0
        means, variances = _branch_stats(tau, s_i, s_d, mu_z, var_z, mu_d, var_d,
                                         self.cfg.tol_interference_s, self.cfg.tol_distance_s)
        return delay, means, variances

    def mean_gain_delay(self, p_tot, n_ant):
        c = self.coupling(n_ant)
        _, delay, _, _ = _delay_terms(p_tot, np.ones_like(self.dist), self.dist,
                                      c * self.zeta_raw, self.cfg)
        return delay

    def objective(self, p_tot, n_ant, tau):
        """Reduced chance-constrained objective F = f + z*g at mean gain."""
        _, means, variances = self.branch_stats(p_tot, np.ones_like(self.dist), n_ant, tau)
        f, g = _gaussian_fg(self.weights, means, variances)
        z = sp.ndtri(1.0 - max(self.cfg.risk_alpha, 1e-6))
        return f + z * g


def _solve_power_vector(phys: _SlotPhysics, idx, p_now, n_ant, tau, box_hi, cfg):
    """Bisection on the finite-difference slope of F over [0, box] for the
    triggered subset; monotone-decreasing objectives land on the box top."""
    sub = lambda arr: arr[idx]
    phys_sub = _SlotPhysics(cfg, sub(phys.dist), sub(phys.zeta_raw), sub(phys.tau),
                            phys.mu_z_raw, phys.var_z_raw, phys.mu_d, phys.var_d,
                            phys.p_i, phys.p_d, phys.intf_on, phys.dist_on)
    p_base = p_now[idx]
    n_sub = n_ant[idx]
    tau_base = tau[idx]
    delay_base = phys_sub.mean_gain_delay(p_base, n_sub)

    def F(dp):
        p_new = p_base + dp
        tau_new = tau_base + (phys_sub.mean_gain_delay(p_new, n_sub) - delay_base)
        return phys_sub.objective(p_new, n_sub, tau_new)

    h = 1e-3 * cfg.power_step_max_w

    def dF(dp):
        lo = np.maximum(dp - h, 0.0)
        hi = dp + h
        return (F(hi) - F(lo)) / (hi - lo)

    lo = np.zeros_like(box_hi)
    hi = box_hi.copy()
    at_zero = dF(lo) >= 0.0
    at_top = dF(hi) <= 0.0
    interior = ~(at_zero | at_top)
    if np.any(interior):
        llo, lhi = lo.copy(), hi.copy()
        for _ in range(45):
            mid = 0.5 * (llo + lhi)
            neg = dF(mid) < 0.0
            llo = np.where(neg, mid, llo)
            lhi = np.where(neg, lhi, mid)
        sol = 0.5 * (llo + lhi)
    else:
        sol = np.zeros_like(box_hi)
    out = np.where(at_zero, 0.0, np.where(at_top, box_hi, sol))
    tau_shift = phys_sub.mean_gain_delay(p_base + out, n_sub) - delay_base
    return out, tau_shift


def _solve_antennas_vector(phys: _SlotPhysics, idx, p_now, n_ant, tau, cfg):
    """Enumerate the antenna count for the triggered subset and return the
    objective minimizer together with the hardening rescale of the carried
    jitter state."""
    sub = lambda arr: arr[idx]
    phys_sub = _SlotPhysics(cfg, sub(phys.dist), sub(phys.zeta_raw), sub(phys.tau),
                            phys.mu_z_raw, phys.var_z_raw, phys.mu_d, phys.var_d,
                            phys.p_i, phys.p_d, phys.intf_on, phys.dist_on)
    p_sub = p_now[idx]
    n_old = n_ant[idx].astype(float)
    tau_base = tau[idx]
    best_f = None
    best_n = np.ones(idx.sum() if idx.dtype == bool else len(idx), dtype=np.int64)
    for n in range(1, cfg.antenna_max + 1):
        scale = (n_old / n) ** cfg.diversity_hardening
        f_n = phys_sub.objective(p_sub, np.full_like(p_sub, n), tau_base * scale)
        if best_f is None:
            best_f = f_n
            best_n[:] = n
        else:
            better = f_n < best_f
            best_f = np.where(better, f_n, best_f)
            best_n = np.where(better, n, best_n)
    scale = (n_old / best_n) ** cfg.diversity_hardening
    return best_n, tau_base * (scale - 1.0)


def simulate_block(cfg: ScenarioConfig, trial_indices, keep: int = 0) -> BlockResult:
    """Run a block of trials and return per-slot metric sums plus per-trial
    crossing/restoration slots. ``keep`` retains full per-slot traces for
    the first trials of the block."""
    trial_indices = np.asarray(trial_indices, dtype=np.int64)
    n = len(trial_indices)
    T = cfg.horizon
    p_i, p_d = cfg.event_probs()
    intf_on = cfg.stressors in ("both", "interference")
    dist_on = cfg.stressors in ("both", "distance")

    # deterministic schedules
    slots = np.arange(T + 1)
    lam = cfg.growth_linear * cfg.arrival_rate0 * np.arange(1, T + 1, dtype=float) ** cfg.growth_exponent
    env = np.where(
        slots > 0,
        cfg.variance0 / cfg.variance_growth * np.expm1(cfg.variance_growth * slots.astype(float)),
        0.0,
    ) if dist_on else np.zeros(T + 1)
    sigma = np.sqrt(env)
    mean_path = cfg.initial_distance + (cfg.drift * slots if dist_on else 0.0)

    # per-trial fixed-layout draws
    zeta0 = np.empty(n)
    dz_arr = np.empty((n, T))
    zabs = np.empty((n, T))
    u_gain = np.empty((n, T + 1))
    u_eps_i = np.empty((n, T))
    u_eps_d = np.empty((n, T))
    u_soj = np.empty((n, T))
    counts = np.empty((n, T), dtype=np.int64)
    for row, trial in enumerate(trial_indices):
        z0, cnt, dz, za, ug, ui, ud, us = _draw_trial(cfg, int(trial), T, lam)
        zeta0[row] = z0
        counts[row] = cnt
        dz_arr[row] = dz
        zabs[row] = za
        u_gain[row] = ug
        u_eps_i[row] = ui
        u_eps_d[row] = ud
        u_soj[row] = us

    # mutable state
    zeta_raw = zeta0.copy()
    pop_count = np.full(n, cfg.initial_interferers, dtype=np.int64)
    dist = np.full(n, cfg.initial_distance)
    tau = np.zeros(n)
    pend_z = np.zeros(n)
    pend_d = np.zeros(n)
    sojourn_left = np.zeros(n, dtype=np.int64)
    p_alloc = np.zeros(n)
    n_ant = np.full(n, cfg.antennas, dtype=np.int64)
    levels_used = np.zeros(n, dtype=np.int64)
    since_level = np.full(n, cfg.steps_per_level, dtype=np.int64)
    crossed = np.zeros(n, dtype=bool)
    crossing_slot = np.full(n, -1, dtype=np.int64)
    restored_slot = np.full(n, -1, dtype=np.int64)
    pji_initial = np.zeros(n)
    pji_at_cross = np.zeros(n)
    pji_at_restore = np.zeros(n)
    prev_pji = None
    prev_arer = np.full(n, -np.inf)

    weights = (p_i * p_d, (1.0 - p_i) * p_d, (1.0 - p_d) * p_i)
    metrics = ("p_ji_minus", "p_ji_plus", "capacity", "load", "limit_state",
               "arer", "power", "antennas", "interferers", "distance")
    sums = {m: np.zeros(T + 1) for m in metrics}
    sumsq = {m: np.zeros(T + 1) for m in metrics}
    kept = [dict(slot=[], p_ji_minus=[], p_ji_plus=[], capacity=[], load=[],
                 limit_state=[], arer=[], power=[], antennas=[],
                 interference=[], distance=[], alloc_active=[])
            for _ in range(min(keep, n))]

    allocator_on = cfg.allocator in ("power", "antennas")

    for t in range(T + 1):
        gain = _aggregate_gain(n_ant, u_gain[:, t])
        p_tot = cfg.tx_power_w + p_alloc

        lam_next = lam[t] if t < T else (
            cfg.growth_linear * cfg.arrival_rate0 * float(T + 1) ** cfg.growth_exponent)
        sig_now = sigma[t] if dist_on else 0.0
        mu_z_raw = lam_next * 2.0 * cfg.mean_beta
        var_z_raw = lam_next * 8.0 * cfg.mean_beta_sq
        mu_d = cfg.drift + HALF_NORMAL_MEAN * sig_now
        var_d = HALF_NORMAL_VAR * sig_now * sig_now

        phys = _SlotPhysics(cfg, dist, zeta_raw, tau, mu_z_raw, var_z_raw,
                            mu_d, var_d, p_i, p_d, intf_on, dist_on)
        delay, s_d, s_i, coup = phys.sensitivities(p_tot, gain, n_ant)
        _, means, variances = phys.branch_stats(p_tot, gain, n_ant, tau)
        pji = _pji(weights, means, variances)

        if prev_pji is None:
            prev_pji = pji.copy()
        p_minus = prev_pji
        cap = 1.0 - 0.5 * (pji + p_minus)
        ld = 0.5 * (pji + p_minus)
        g_lim = 1.0 - (pji + p_minus)
        e_r = (pji - p_minus) / (2.0 * cfg.delta)

        if t == 0:
            pji_initial[:] = pji
        newly = (~crossed) & (g_lim <= 0.0)
        crossing_slot[newly] = t
        pji_at_cross[newly] = pji[newly]
        crossed |= newly

        if allocator_on:
            newly_restored = (restored_slot < 0) & crossed & (cap >= 0.99)
            restored_slot[newly_restored] = t
            pji_at_restore[newly_restored] = pji[newly_restored]
            budget_ok = (cfg.power_budget_w - p_alloc > cfg.kkt_tol) if cfg.allocator == "power" \
                else np.ones(n, dtype=bool)
            # act while the exposure rate worsened or stagnated; hold only
            # while it is strictly improving
            trigger = (crossed & (g_lim < cfg.restore_target) & (e_r >= prev_arer)
                       & (levels_used < cfg.levels) & (since_level >= cfg.steps_per_level)
                       & budget_ok)
            if np.any(trigger):
                idx = np.flatnonzero(trigger)
                if cfg.allocator == "power":
                    box = np.minimum(cfg.power_step_max_w, cfg.power_budget_w - p_alloc[idx])
                    step, tau_shift = _solve_power_vector(phys, idx, p_tot, n_ant, tau, box, cfg)
                    p_alloc[idx] += step
                    tau[idx] += tau_shift
                else:
                    new_n, tau_shift = _solve_antennas_vector(phys, idx, p_tot, n_ant, tau, cfg)
                    n_ant[idx] = new_n
                    tau[idx] += tau_shift
                levels_used[idx] += 1
                since_level[idx] = 0
            since_level[~trigger] += 1

        for metric, arr in (("p_ji_minus", p_minus), ("p_ji_plus", pji),
                            ("capacity", cap), ("load", ld), ("limit_state", g_lim),
                            ("arer", e_r), ("power", cfg.tx_power_w + p_alloc),
                            ("antennas", n_ant.astype(float)),
                            ("interferers", pop_count.astype(float)),
                            ("distance", dist)):
            sums[metric][t] += arr.sum()
            sumsq[metric][t] += np.square(arr).sum()
        for row in range(len(kept)):
            k = kept[row]
            k["slot"].append(t)
            k["p_ji_minus"].append(float(p_minus[row]))
            k["p_ji_plus"].append(float(pji[row]))
            k["capacity"].append(float(cap[row]))
            k["load"].append(float(ld[row]))
            k["limit_state"].append(float(g_lim[row]))
            k["arer"].append(float(e_r[row]))
            k["power"].append(float(cfg.tx_power_w + p_alloc[row]))
            k["antennas"].append(int(n_ant[row]))
            k["interference"].append(float(coup[row] * zeta_raw[row]))
            k["distance"].append(float(dist[row]))
            k["alloc_active"].append(bool(allocator_on and crossed[row]))

        prev_pji = pji
        prev_arer = e_r
        if t == T:
            break

        # stressor transition into slot t+1
        if intf_on:
            pend_z += dz_arr[:, t]
            zeta_raw += dz_arr[:, t]
            pop_count += counts[:, t]
        if dist_on:
            fluct = sigma[t] * zabs[:, t]
            pend_d += cfg.drift + fluct
            dist = mean_path[t + 1] + fluct

        # event-gated jitter recursion with sojourn holding
        holding = sojourn_left > 0
        sojourn_left[holding] -= 1
        free = ~holding
        eps_i = free & (u_eps_i[:, t] < p_i)
        eps_d = free & (u_eps_d[:, t] < p_d)
        any_event = eps_i | eps_d
        if np.any(any_event):
            dz_eff = s_i * (coup * pend_z)
            dd_eff = s_d * pend_d
            delta = np.where(eps_i & eps_d, dz_eff + dd_eff,
                             np.where(eps_d, dd_eff, dz_eff))
            tau = np.where(any_event, tau + delta, tau)
            pend_z = np.where(any_event, 0.0, pend_z)
            pend_d = np.where(any_event, 0.0, pend_d)
            new_soj = _geometric_from_uniform(u_soj[:, t], cfg.sojourn_rate) - 1
            sojourn_left = np.where(any_event, new_soj, sojourn_left)

    return BlockResult(
        n_trials=n,
        slots=slots,
        sums=sums,
        sumsq=sumsq,
        crossing_slot=crossing_slot,
        restored_slot=restored_slot,
        pji_initial=pji_initial,
        pji_at_cross=pji_at_cross,
        pji_at_restore=pji_at_restore,
        trajectories=kept,
    )
