"""Scalar snapshot of the link state used by the allocator and the
validation oracles; mirrors the engine's per-slot physics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import ScenarioConfig
from .intolerance import IntoleranceGaussian, StressorMoments, intolerance_pdf
from .link import (LinkParams, delay_slope_distance, delay_slope_interference,
                   sinr, transmission_delay)

__all__ = ["LinkSnapshot", "snapshot_at_slot"]

HALF_NORMAL_MEAN = math.sqrt(2.0 / math.pi)
HALF_NORMAL_VAR = 1.0 - 2.0 / math.pi


@dataclass(frozen=True)
class LinkSnapshot:
    """Frozen slot state: everything the reduced objective needs to evaluate
    a candidate (power, antennas) allocation."""

    cfg: ScenarioConfig
    distance: float          # realized spacing [m]
    interference_raw: float  # aggregate received interferer power at unit coupling [W]
    tau: float               # carried jitter state [s]
    p_ji_minus: float
    lam_next: float          # expected arrivals over the next transition
    sigma_now: float         # spacing fluctuation scale [m]
    ref_power: float         # power the carried jitter state was accumulated at [W]

    def _link(self, total_power: float, antennas: int) -> LinkParams:
        return LinkParams(
            tx_power=total_power,
            wavelength=self.cfg.wavelength,
            noise_power=self.cfg.noise_power_w,
            bandwidth=self.cfg.bandwidth_hz,
            packet_bits=self.cfg.packet_bits,
            gain_sq=1.0,
            n_antennas=antennas,
        )

    def _coupling(self, antennas: int) -> float:
        if self.cfg.stressors not in ("both", "interference"):
            return 1.0
        return antennas ** self.cfg.interferer_antenna_exponent

    def _zeta_eff(self, antennas: int) -> float:
        return self._coupling(antennas) * self.interference_raw

    def delay_at(self, total_power: float, antennas: int) -> float:
        link = self._link(total_power, antennas)
        return transmission_delay(link, sinr(link, self._zeta_eff(antennas), self.distance))

    def gaussian(self, power: float, antennas: int) -> IntoleranceGaussian:
        """Intolerance approximation at the candidate allocation. ``power``
        is the incremental allocation on top of the reference power."""
        cfg = self.cfg
        p_i, p_d = cfg.event_probs()
        total = self.ref_power + power
        link = self._link(total, antennas)
        zeta = self._zeta_eff(antennas)
        coupling = self._coupling(antennas)
        s_d = p_d * delay_slope_distance(link, zeta, self.distance) \
            * antennas ** (-cfg.diversity_hardening)
        s_i = p_i * delay_slope_interference(link, zeta, self.distance)
        intf_on = cfg.stressors in ("both", "interference")
        dist_on = cfg.stressors in ("both", "distance")
        moments = StressorMoments(
            mean_distance=(cfg.drift + HALF_NORMAL_MEAN * self.sigma_now) if dist_on else 0.0,
            var_distance=HALF_NORMAL_VAR * self.sigma_now ** 2 if dist_on else 0.0,
            mean_interference=self.lam_next * 2.0 * cfg.mean_beta * coupling if intf_on else 0.0,
            var_interference=self.lam_next * 8.0 * cfg.mean_beta_sq * coupling ** 2 if intf_on else 0.0,
        )
        tau_eff = self.tau + self.delay_at(total, antennas) - self.delay_at(self.ref_power, antennas)
        tol = (cfg.tol_interference_s + cfg.tol_distance_s,
               cfg.tol_distance_s, cfg.tol_interference_s)
        return intolerance_pdf(s_d, s_i, moments, p_i, p_d,
                               tolerance=tol, tau_prev=tau_eff)


def snapshot_at_slot(cfg: ScenarioConfig, slot: int, *, tau: float = 0.0,
                     p_ji_minus: float = 0.5) -> LinkSnapshot:
    """Deterministic mean-state snapshot at a slot: spacing on its expected
    path, interference at the expected population power."""
    dist_on = cfg.stressors in ("both", "distance")
    intf_on = cfg.stressors in ("both", "interference")
    if dist_on:
        env = cfg.variance0 / cfg.variance_growth * math.expm1(cfg.variance_growth * slot)
        sigma = math.sqrt(env)
        distance = cfg.initial_distance + cfg.drift * slot + HALF_NORMAL_MEAN * sigma
    else:
        sigma = 0.0
        distance = cfg.initial_distance
    expected_pop = cfg.initial_interferers
    if intf_on and slot >= 1:
        expected_pop += sum(
            cfg.growth_linear * cfg.arrival_rate0 * s ** cfg.growth_exponent
            for s in range(1, slot + 1)
        )
    lam_next = cfg.growth_linear * cfg.arrival_rate0 * float(slot + 1) ** cfg.growth_exponent \
        if intf_on else 0.0
    return LinkSnapshot(
        cfg=cfg,
        distance=distance,
        interference_raw=expected_pop * cfg.mean_beta,
        tau=tau,
        p_ji_minus=p_ji_minus,
        lam_next=lam_next,
        sigma_now=sigma,
        ref_power=cfg.tx_power_w,
    )
