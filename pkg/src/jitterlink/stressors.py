"""Deterioration processes driving the link: interferer population growth and
inter-vehicle spacing drift-diffusion.

Both processes are value-in/value-out; callers thread state explicitly, so
trials can run in parallel with independent random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "InterfererRecord",
    "InterferencePopulation",
    "DistanceProcess",
    "step_interference",
    "interference_pdf",
    "interference_moments",
    "step_distance",
    "distance_pdf",
    "distance_moments",
    "variance_envelope",
]

# Relative spacing below which two hypoexponential rates are treated as equal
# and the partial-fraction form is abandoned for a numeric convolution.
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class InterfererRecord:
    """One interfering vehicle: transmit power [W], squared channel gain,
    distance to the victim receiver [m], and mean received power beta [W]."""

    tx_power: float
    gain_sq: float
    distance: float
    beta: float

    def __post_init__(self):
        if self.tx_power <= 0.0:
            raise ValueError("interferer tx_power must be positive")
        if self.distance <= 0.0:
            raise ValueError("interferer distance must be positive")
        if self.beta <= 0.0:
            raise ValueError("interferer beta must be positive")


def make_interferer(tx_power: float, gain_sq: float, distance: float,
                    path_loss_exp: float) -> InterfererRecord:
    return InterfererRecord(
        tx_power=tx_power,
        gain_sq=gain_sq,
        distance=distance,
        beta=tx_power * distance ** (-path_loss_exp),
    )


@dataclass(frozen=True)
class InterferencePopulation:
    """Pure-birth interferer population.

    Arrivals per transition into slot ``t`` are Poisson with mean
    ``growth_linear * arrival_rate0 * t**growth_exponent``; records are never
    removed. ``total_power`` is the aggregate received interference power [W].
    """

    initial_count: int
    arrival_rate0: float          # vehicles per slot
    growth_linear: float          # dimensionless growth prefactor
    growth_exponent: float        # time exponent of the arrival rate
    tx_power: float               # per-interferer transmit power [W]
    dist_min: float               # uniform distance draw bounds [m]
    dist_max: float
    path_loss_exp: float
    records: tuple[InterfererRecord, ...] = field(default_factory=tuple)

    @property
    def total_power(self) -> float:
        return sum(r.tx_power * r.gain_sq * r.distance ** (-self.path_loss_exp)
                   for r in self.records)

    @property
    def betas(self) -> list[float]:
        return [r.beta for r in self.records]

    def arrival_rate(self, slot: int) -> float:
        """Expected arrivals during the transition into ``slot`` (slot >= 1)."""
        if slot < 1:
            raise ValueError("arrival rate is defined for slot >= 1")
        return self.growth_linear * self.arrival_rate0 * float(slot) ** self.growth_exponent


def seed_population(pop: InterferencePopulation, rng: np.random.Generator) -> InterferencePopulation:
    """Draw the initial interferer records (unit-mean exponential gains,
    uniform distances)."""
    records = tuple(
        make_interferer(
            pop.tx_power,
            rng.exponential(1.0),
            rng.uniform(pop.dist_min, pop.dist_max),
            pop.path_loss_exp,
        )
        for _ in range(pop.initial_count)
    )
    return replace(pop, records=records)


def step_interference(pop: InterferencePopulation, slot: int,
                      rng: np.random.Generator) -> InterferencePopulation:
    """Append the Poisson batch of new interferers arriving during the
    transition into ``slot``. Existing records are kept untouched
    (quasi-static interferer channels)."""
    if slot < 1:
        raise ValueError("step_interference requires slot >= 1")
    n_new = rng.poisson(pop.arrival_rate(slot))
    if n_new == 0:
        return pop
    new = tuple(
        make_interferer(
            pop.tx_power,
            rng.exponential(1.0),
            rng.uniform(pop.dist_min, pop.dist_max),
            pop.path_loss_exp,
        )
        for _ in range(n_new)
    )
    return replace(pop, records=pop.records + new)


def _hypoexp_weights(betas: np.ndarray) -> np.ndarray:
    """Partial-fraction coefficients of the sum of independent exponentials
    with means 2*beta_j (all rates distinct)."""
    rates = 1.0 / (2.0 * betas)
    n = len(rates)
    log_num = np.sum(np.log(rates))
    weights = np.empty(n)
    for j in range(n):
        diff = rates[np.arange(n) != j] - rates[j]
        weights[j] = math.copysign(1.0, np.prod(np.sign(diff))) * math.exp(
            log_num - np.sum(np.log(np.abs(diff)))) if n > 1 else rates[j]
    return weights


def _rates_degenerate(betas: np.ndarray) -> bool:
    if len(betas) < 2:
        return False
    s = np.sort(betas)
    return bool(np.any(np.diff(s) <= DEGENERATE_RTOL * s[1:]))


def _convolved_pdf(betas: np.ndarray, l: float) -> float:
    # Trapezoid-grid convolution of the exponential components; used only
    # when two rates coincide and the partial fractions blow up.
    span = 20.0 * float(np.sum(2.0 * betas))
    n = 4096
    grid = np.linspace(0.0, span, n)
    dx = grid[1] - grid[0]
    dens = np.exp(-grid / (2.0 * betas[0])) / (2.0 * betas[0])
    for b in betas[1:]:
        comp = np.exp(-grid / (2.0 * b)) / (2.0 * b)
        dens = np.convolve(dens, comp)[:n] * dx
    if l >= span:
        return 0.0
    return float(np.interp(l, grid, dens))


def interference_pdf(betas, l: float) -> float:
    """Density [1/W] of the aggregate interference power at ``l`` >= 0.

    The aggregate is a sum of independent exponentials with means
    ``2*beta_j``; with distinct betas the density is the hypoexponential
    partial-fraction form. Coinciding betas fall back to a numeric
    convolution of the exponential components.
    """
    if l < 0.0:
        raise ValueError("interference power must be non-negative")
    b = np.asarray(list(betas), dtype=float)
    if len(b) == 0:
        raise ValueError("at least one interferer beta required")
    if np.any(b <= 0.0):
        raise ValueError("betas must be positive")
    if len(b) == 1:
        return float(math.exp(-l / (2.0 * b[0])) / (2.0 * b[0]))
    if _rates_degenerate(b):
        return _convolved_pdf(b, l)
    w = _hypoexp_weights(b)
    dens = float(np.sum(w * np.exp(-l / (2.0 * b))))
    return max(dens, 0.0)


def interference_moments(betas, mode: str = "exact") -> tuple[float, float]:
    """Mean and variance [W, W^2] of the aggregate interference power.

    ``exact`` uses the moments of the underlying exponential sum
    (mean ``sum 2*beta``, variance ``sum (2*beta)^2``). ``paper-literal``
    evaluates the weighted forms as published; they disagree with the
    exponential-sum moments (a single interferer yields mean 1 regardless of
    beta) and are kept only for reproducibility comparisons.
    """
    b = np.asarray(list(betas), dtype=float)
    if len(b) == 0:
        raise ValueError("at least one interferer beta required")
    if mode == "exact":
        return float(np.sum(2.0 * b)), float(np.sum((2.0 * b) ** 2))
    if mode == "paper-literal":
        if len(b) == 1:
            w = np.asarray([1.0 / (2.0 * b[0])])
        else:
            w = _hypoexp_weights(b)
        mean = float(np.sum(2.0 * w * b))
        var = float(np.sum(8.0 * w * b ** 2) - mean ** 2)
        return mean, var
    raise ValueError(f"unknown moments mode: {mode!r}")


@dataclass(frozen=True)
class DistanceProcess:
    """Inter-vehicle spacing with linear drift and an exponentially growing
    fluctuation envelope.

    The fluctuation at slot ``t`` is a fresh half-normal draw scaled by
    ``sqrt(variance_envelope(t))`` on top of the deterministic mean path.
    ``variance_volatility`` does not enter the envelope; it only drives the
    Euler-Maruyama cross-check of the variance process.
    """

    initial_distance: float      # d(0) [m]
    drift: float                 # mean closing/opening speed [m/slot]
    variance0: float             # initial fluctuation variance [m^2]
    variance_growth: float       # envelope growth rate [1/slot]
    variance_volatility: float   # volatility of the variance process [1/sqrt(slot)]
    current_distance: float
    mean_path: float
    envelope: float              # current variance envelope [m^2]

    def __post_init__(self):
        if self.initial_distance <= 0.0:
            raise ValueError("initial distance must be positive")
        if self.envelope < 0.0:
            raise ValueError("variance envelope cannot be negative")


def new_distance_process(initial_distance: float, drift: float, variance0: float,
                         variance_growth: float, variance_volatility: float = 0.0) -> DistanceProcess:
    return DistanceProcess(
        initial_distance=initial_distance,
        drift=drift,
        variance0=variance0,
        variance_growth=variance_growth,
        variance_volatility=variance_volatility,
        current_distance=initial_distance,
        mean_path=initial_distance,
        envelope=0.0,
    )


def variance_envelope(variance0: float, variance_growth: float, slot: float) -> float:
    """Integrated fluctuation variance up to ``slot`` [m^2]."""
    if slot < 0:
        raise ValueError("slot must be non-negative")
    if variance_growth == 0.0:
        return variance0 * slot
    return variance0 / variance_growth * math.expm1(variance_growth * slot)


def step_distance(proc: DistanceProcess, slot: int, rng: np.random.Generator) -> DistanceProcess:
    """Advance the spacing from ``slot`` to ``slot + 1``.

    The new distance is ``d0 + drift*(slot+1)`` plus a half-normal
    fluctuation with the envelope evaluated at ``slot``; at slot 0 the
    envelope is zero and the distance sits on the mean path.
    """
    if slot < 0:
        raise ValueError("slot must be non-negative")
    env = variance_envelope(proc.variance0, proc.variance_growth, slot)
    mean_path = proc.initial_distance + proc.drift * (slot + 1)
    fluct = math.sqrt(env) * abs(rng.standard_normal())
    return replace(
        proc,
        current_distance=mean_path + fluct,
        mean_path=mean_path,
        envelope=env,
    )


def distance_pdf(proc: DistanceProcess, d: float, slot: int) -> float:
    """Shifted half-normal density [1/m] of the spacing at ``slot`` >= 1.

    Support is ``d > mean_path(slot)``; the density vanishes at and below the
    mean path.
    """
    if slot < 1:
        raise ValueError("distance_pdf is defined for slot >= 1")
    env = variance_envelope(proc.variance0, proc.variance_growth, slot)
    mean_path = proc.initial_distance + proc.drift * slot
    if d <= mean_path:
        return 0.0
    sigma = math.sqrt(env)
    z = (d - mean_path) / sigma
    return math.sqrt(2.0 / math.pi) / sigma * math.exp(-0.5 * z * z)


def distance_moments(proc: DistanceProcess, slot: int) -> tuple[float, float]:
    """Mean [m] and variance [m^2] of the spacing at ``slot``.

    mean = mean_path + sqrt(2*envelope/pi), variance = envelope*(1 - 2/pi).
    """
    if slot < 0:
        raise ValueError("slot must be non-negative")
    env = variance_envelope(proc.variance0, proc.variance_growth, slot)
    mean_path = proc.initial_distance + proc.drift * slot
    mean = mean_path + math.sqrt(2.0 * env / math.pi)
    var = env * (1.0 - 2.0 / math.pi)
    return mean, var
