"""Chance-constrained power and antenna allocation for post-failure recovery.

The chance constraint on next-transition intolerance reduces, for Gaussian
uncertainty, to minimizing ``F(P) = f(P) + z * g(P)`` with ``z`` the normal
quantile at the required confidence and ``f``, ``g`` the mean and standard
deviation of the intolerance approximation at the candidate allocation. The
power subproblem is solved by bisection on the first-order stationarity
residual over the box, with grid restarts because ``f`` and ``g`` are
black-box compositions with no convexity certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

from .intolerance import IntoleranceGaussian, normal_quantile
from .resilience import ResilienceSample

__all__ = [
    "AllocationConstraints",
    "AllocationDecision",
    "AllocationState",
    "reduced_objective",
    "solve_power",
    "solve_antennas",
    "restoration_step",
]

N_RESTARTS = 8  # equispaced bisection restart points over the power box


class AllocationState(Protocol):
    """Snapshot of the link state the allocator optimizes against."""

    p_ji_minus: float

    def gaussian(self, power: float, antennas: int) -> IntoleranceGaussian: ...


@dataclass(frozen=True)
class AllocationConstraints:
    p_max_per_level: float   # per-level power cap [W]
    p_total: float           # budget across levels within one episode [W]
    n_max: int               # antenna enumeration bound
    alpha: float             # allowed violation probability
    tol: float = 1e-6        # bisection tolerance [W]
    levels: int = 10         # threshold levels of the staged recovery
    steps_per_level: int = 1 # slots granted to each level

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not 0.0 < self.p_max_per_level <= self.p_total:
            raise ValueError("need 0 < p_max_per_level <= p_total")


@dataclass(frozen=True)
class AllocationDecision:
    power: float
    antennas: int
    margin: float           # optimal slack above the feasibility floor
    objective: float        # F at the decision
    kkt_residual: float
    active_constraint: str  # interior | at_zero | at_pmax | at_budget
    converged: bool = True
    flat_objective: bool = False


def reduced_objective(power: float, antennas: int, state: AllocationState,
                      alpha: float) -> float:
    """Deterministic equivalent of the chance constraint: mean plus
    quantile-scaled standard deviation of the intolerance approximation."""
    if power < 0.0:
        raise ValueError("power must be non-negative")
    alpha = max(alpha, 1e-6)  # quantile diverges as alpha -> 0
    gauss = state.gaussian(power, antennas)
    return gauss.mean + normal_quantile(1.0 - alpha) * gauss.std


def _margin(f_value: float, power: float, antennas: int, state: AllocationState,
            alpha: float) -> float:
    # the chance constraint is active at the optimum, so the margin equals
    # F(P*) + p_minus - 1
    return f_value + state.p_ji_minus - 1.0


def solve_power(state: AllocationState, constraints: AllocationConstraints,
                antennas: int, budget_left: float | None = None) -> AllocationDecision:
    """Minimize the reduced objective over the admissible power box.

    The stationarity residual (central finite difference of F) is bisected
    to a sign change; restarts on an equispaced grid guard against
    non-monotone residuals. Box optima are classified by the sign of the
    residual at the boundary.
    """
    if budget_left is None:
        budget_left = constraints.p_total
    box_hi = min(constraints.p_max_per_level, budget_left)
    if box_hi <= 0.0:
        raise ValueError("no power budget left")
    h = 1e-3 * constraints.p_max_per_level

    def F(p: float) -> float:
        return reduced_objective(p, antennas, state, constraints.alpha)

    def dF(p: float) -> float:
        lo = max(p - h, 0.0)
        hi = p + h
        return (F(hi) - F(lo)) / (hi - lo)

    grid = [box_hi * k / (N_RESTARTS - 1) for k in range(N_RESTARTS)]
    resid = [dF(p) for p in grid]
    f_grid = [F(p) for p in grid]

    flat = all(abs(r) <= constraints.tol for r in resid) and (
        max(f_grid) - min(f_grid) <= constraints.tol)

    budget_binding = box_hi < constraints.p_max_per_level

    def finish(p_star: float, tag: str, residual: float, converged: bool = True):
        f_star = F(p_star)
        if tag == "at_pmax" and budget_binding:
            tag = "at_budget"
        return AllocationDecision(
            power=p_star,
            antennas=antennas,
            margin=_margin(f_star, p_star, antennas, state, constraints.alpha),
            objective=f_star,
            kkt_residual=abs(residual),
            active_constraint=tag,
            converged=converged,
            flat_objective=flat,
        )

    # boundary optima: residual one-signed across the box
    if resid[0] >= 0.0 and all(r >= -constraints.tol for r in resid):
        return finish(0.0, "at_zero", 0.0)
    if resid[-1] <= 0.0 and all(r <= constraints.tol for r in resid):
        return finish(box_hi, "at_pmax", 0.0)

    # first sign-change bracket on the restart grid
    bracket = None
    for k in range(N_RESTARTS - 1):
        if resid[k] < 0.0 <= resid[k + 1]:
            bracket = (grid[k], grid[k + 1])
            break
    if bracket is None:
        # no interior stationary point found; fall back to the best grid point
        k_best = min(range(N_RESTARTS), key=f_grid.__getitem__)
        p_star = grid[k_best]
        tag = "at_zero" if p_star == 0.0 else ("at_pmax" if p_star == box_hi else "interior")
        return finish(p_star, tag, dF(p_star), converged=False)

    lo, hi = bracket
    max_iter = math.ceil(math.log2(max(box_hi / constraints.tol, 2.0))) + 8
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if dF(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= constraints.tol:
            break
    p_star = 0.5 * (lo + hi)
    return finish(p_star, "interior", dF(p_star), converged=(hi - lo) <= constraints.tol)


def solve_antennas(state: AllocationState, constraints: AllocationConstraints,
                   power: float) -> AllocationDecision:
    """Enumerate the antenna count and return the minimizer of the reduced
    objective; O(n_max) evaluations."""
    best_n, best_f = 1, math.inf
    for n in range(1, constraints.n_max + 1):
        f_n = reduced_objective(power, n, state, constraints.alpha)
        if f_n < best_f:
            best_n, best_f = n, f_n
    return AllocationDecision(
        power=power,
        antennas=best_n,
        margin=_margin(best_f, power, best_n, state, constraints.alpha),
        objective=best_f,
        kkt_residual=0.0,
        active_constraint="interior",
    )


def restoration_step(history: Sequence[ResilienceSample], state: AllocationState,
                     constraints: AllocationConstraints, mode: str, *,
                     levels_used: int, power_used: float,
                     restore_target: float = 0.999):
    """One slot of the staged recovery loop.

    Returns ``(action, decision)`` where action is ``done`` once the limit
    state has recovered, ``allocate`` when the risk exposure rate worsened
    and a threshold level is still available, ``exhausted`` when all levels
    or the power budget are spent, and ``hold`` otherwise.
    """
    if mode not in ("power", "antennas"):
        raise ValueError("mode must be 'power' or 'antennas'")
    if not history:
        raise ValueError("restoration requires at least one recorded slot")
    latest = history[-1]
    if latest.limit_state >= restore_target:
        return "done", None
    prev_arer = history[-2].arer if len(history) >= 2 else -math.inf
    if latest.arer < prev_arer:  # strictly improving: hold the current state
        return "hold", None
    budget_left = constraints.p_total - power_used
    if levels_used >= constraints.levels or (mode == "power" and budget_left <= 0.0):
        return "exhausted", None
    if mode == "power":
        decision = solve_power(state, constraints, latest.antennas, budget_left)
    else:
        decision = solve_antennas(state, constraints, latest.power)
    return "allocate", decision
