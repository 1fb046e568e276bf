"""SINR, transmission delay, delay sensitivities, and the jitter-state
recursion for a single V2V link."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "LinkParams",
    "JitterState",
    "sinr",
    "sinr_miso",
    "transmission_delay",
    "jitter_increment",
    "delay_slope_distance",
    "delay_slope_interference",
    "sensitivity_distance",
    "sensitivity_interference",
    "step_jitter_state",
    "sample_sojourn",
]

LN2 = math.log(2.0)


@dataclass(frozen=True)
class LinkParams:
    """Physical parameters of the link. ``noise_power`` is the total noise
    power over the bandwidth [W], not a spectral density."""

    tx_power: float        # [W]
    wavelength: float      # [m]
    noise_power: float     # [W]
    bandwidth: float       # [Hz]
    packet_bits: float     # [bit]
    gain_sq: float = 1.0   # squared fading gain of the desired link
    n_antennas: int = 1

    def __post_init__(self):
        for name in ("tx_power", "wavelength", "noise_power", "bandwidth", "packet_bits"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")


def sinr(link: LinkParams, interference: float, distance: float) -> float:
    """Instantaneous SINR: free-space quadratic range loss over noise plus
    aggregate interference power."""
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    spread = link.wavelength / (4.0 * math.pi * distance)
    return link.tx_power * link.gain_sq * spread * spread / (link.noise_power + interference)


def sinr_miso(link: LinkParams, interference: float, distance: float, gains) -> float:
    """SINR with the squared gain replaced by the antenna-averaged sum of the
    per-antenna squared gains. Reduces exactly to :func:`sinr` for one
    antenna."""
    gains = np.asarray(list(gains), dtype=float)
    if gains.size == 0:
        raise ValueError("gains must be non-empty")
    if gains.size != link.n_antennas:
        raise ValueError("gains length must equal n_antennas")
    aggregate = float(np.sum(gains)) / link.n_antennas
    eff = replace(link, gain_sq=aggregate)
    return sinr(eff, interference, distance)


def transmission_delay(link: LinkParams, sinr_value: float) -> float:
    """Packet transmission delay [s] at the given SINR; strictly decreasing
    in SINR."""
    if sinr_value <= 0.0:
        raise ValueError("sinr must be positive")
    return link.packet_bits / (link.bandwidth * math.log2(1.0 + sinr_value))


def jitter_increment(delay_prev: float, delay_next: float) -> float:
    """Signed slot-to-slot delay change [s]."""
    if delay_prev <= 0.0 or delay_next <= 0.0:
        raise ValueError("delays must be positive")
    return delay_next - delay_prev


def _delay_core(link: LinkParams, interference: float, distance: float):
    g = sinr(link, interference, distance)
    l2 = math.log2(1.0 + g)
    return g, LN2 * (1.0 + g) * l2 * l2


def delay_slope_distance(link: LinkParams, interference: float, distance: float) -> float:
    """d(delay)/d(distance) [s/m] at the given operating point (always > 0:
    a wider gap always slows the link)."""
    g, denom = _delay_core(link, interference, distance)
    spread_sq = (link.wavelength / (4.0 * math.pi * distance)) ** 2
    num = 2.0 * link.tx_power * link.gain_sq * spread_sq / (
        distance * (link.noise_power + interference))
    return link.packet_bits / link.bandwidth * num / denom


def delay_slope_interference(link: LinkParams, interference: float, distance: float) -> float:
    """d(delay)/d(interference) [s/W] at the given operating point.

    The bracket carries a constant -1 offset; at any realistic SINR it is
    dominated by the leading term and the expression agrees with a finite
    difference of the delay map.
    """
    g, denom = _delay_core(link, interference, distance)
    spread = link.wavelength / (4.0 * math.pi * distance)
    num = link.tx_power * (math.sqrt(link.gain_sq) * spread / (link.noise_power + interference)) ** 2 - 1.0
    return link.packet_bits / link.bandwidth * num / denom


def sensitivity_distance(link: LinkParams, interference: float, distance: float,
                         p_i: float, p_d: float,
                         interference_baseline: float | None = None) -> float:
    """Distance sensitivity of the jitter state [s/m]: the joint-event slope
    weighted by ``p_i*p_d`` plus the distance-only slope (evaluated at the
    pre-transition interference level) weighted by ``(1-p_i)*p_d``."""
    if interference_baseline is None:
        interference_baseline = interference
    f1 = delay_slope_distance(link, interference, distance)
    f2 = delay_slope_distance(link, interference_baseline, distance)
    return p_i * p_d * f1 + (1.0 - p_i) * p_d * f2


def sensitivity_interference(link: LinkParams, interference: float, distance: float,
                             p_i: float, p_d: float,
                             distance_baseline: float | None = None) -> float:
    """Interference sensitivity of the jitter state [s/W]: joint-event slope
    weighted by ``p_i*p_d`` plus the interference-only slope (evaluated at the
    pre-transition spacing) weighted by ``(1-p_d)*p_i``."""
    if distance_baseline is None:
        distance_baseline = distance
    f1p = delay_slope_interference(link, interference, distance)
    f2p = delay_slope_interference(link, interference, distance_baseline)
    return p_i * p_d * f1p + (1.0 - p_d) * p_i * f2p


@dataclass(frozen=True)
class JitterState:
    """Markov jitter state threaded through the slot loop."""

    delay_prev: float          # last transmission delay [s]
    jitter: float              # accumulated jitter state [s]
    sens_distance: float       # [s/m]
    sens_interference: float   # [s/W]
    prob_i: float              # per-transition interference event probability
    prob_d: float              # per-transition distance event probability
    event_i: int = 0
    event_d: int = 0
    sojourn_left: int = 0

    def __post_init__(self):
        if self.delay_prev <= 0.0:
            raise ValueError("delay_prev must be positive")
        if self.sojourn_left < 0:
            raise ValueError("sojourn_left cannot be negative")
        for p in (self.prob_i, self.prob_d):
            if not 0.0 <= p <= 1.0:
                raise ValueError("event probabilities must lie in [0, 1]")


def sample_sojourn(p_hold: float, rng: np.random.Generator) -> int:
    """Geometric sojourn length in slots, support {1, 2, ...}, mean 1/p_hold."""
    if not 0.0 < p_hold <= 1.0:
        raise ValueError("p_hold must lie in (0, 1]")
    return int(rng.geometric(p_hold))


def step_jitter_state(state: JitterState, d_zeta: float, d_dist: float,
                      rng: np.random.Generator, p_hold: float = 0.5) -> JitterState:
    """One transition of the jitter recursion.

    While a sojourn is pending the state is held unchanged. Otherwise the
    two event indicators are drawn and the jitter is advanced by the
    indicator-selected sensitivity terms times the stressor increments; a
    state change resamples the sojourn counter. Event probabilities gate the
    branches only through the drawn indicators, never as extra multipliers.
    """
    if state.sojourn_left > 0:
        return replace(state, sojourn_left=state.sojourn_left - 1,
                       event_i=0, event_d=0)
    eps_i = int(rng.random() < state.prob_i)
    eps_d = int(rng.random() < state.prob_d)
    if eps_i == 0 and eps_d == 0:
        return replace(state, event_i=0, event_d=0)
    if eps_i and eps_d:
        delta = state.sens_interference * d_zeta + state.sens_distance * d_dist
    elif eps_d:
        delta = state.sens_distance * d_dist
    else:
        delta = state.sens_interference * d_zeta
    return replace(
        state,
        jitter=state.jitter + delta,
        event_i=eps_i,
        event_d=eps_d,
        sojourn_left=sample_sojourn(p_hold, rng) - 1,
    )
