"""Per-transition resilience metrics and the phase state machine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "ResilienceSample",
    "arer",
    "capacity",
    "load",
    "limit_state",
    "classify_phase",
    "PHASES",
]

PHASES = ("normal", "alarming", "failure", "restoration")


@dataclass(frozen=True)
class ResilienceSample:
    """One slot of the resilience record (the CSV row type)."""

    slot: int
    p_ji_minus: float
    p_ji_plus: float
    capacity: float
    load: float
    limit_state: float
    arer: float
    phase: str
    power: float        # applied transmit power [W]
    antennas: int
    delta: float = 0.5  # transition half-period [slot]


def arer(p_plus: float, p_minus: float, delta: float) -> float:
    """Average risk exposure rate: intolerance change per transition over the
    2*delta span."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    return (p_plus - p_minus) / (2.0 * delta)


def capacity(p_plus: float, p_minus: float) -> float:
    """Jitter-withstanding capacity: one minus the averaged intolerance."""
    return 1.0 - 0.5 * (p_plus + p_minus)


def load(p_plus: float, p_minus: float) -> float:
    """Jitter-induced load: the averaged intolerance."""
    return 0.5 * (p_plus + p_minus)


def limit_state(p_plus: float, p_minus: float) -> float:
    """Safety margin capacity - load = 1 - (p_plus + p_minus)."""
    return 1.0 - (p_plus + p_minus)


def classify_phase(limit_states: Sequence[float],
                   allocator_active: Sequence[bool] | None = None, *,
                   normal_threshold: float = 0.999,
                   restore_target: float = 0.999) -> list[str]:
    """Label every slot of a limit-state history.

    normal while G >= normal_threshold before any failure; alarming below
    that while the allocator is idle; the first G <= 0 slot is the failure
    instant; afterwards the run is in restoration while the allocator is
    active, until G recovers to the restore target.
    """
    if len(limit_states) == 0:
        raise ValueError("history must be non-empty")
    if allocator_active is None:
        allocator_active = [False] * len(limit_states)
    phases: list[str] = []
    failed = False
    restoring = False
    for g, active in zip(limit_states, allocator_active):
        if not failed:
            if g <= 0.0:
                failed = True
                restoring = bool(active)
                phases.append("failure")
            elif g >= normal_threshold:
                phases.append("normal")
            else:
                phases.append("alarming")
            continue
        if active:
            restoring = True
        if restoring:
            if g >= restore_target:
                restoring = False
                phases.append("normal")
            else:
                phases.append("restoration")
        else:
            phases.append("failure" if g <= 0.0 else "alarming")
    return phases
