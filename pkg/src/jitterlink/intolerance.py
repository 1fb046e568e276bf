"""Jitter-state moments, the intolerance probability, and its closed-form
Gaussian approximation.

The intolerance probability decomposes into three event branches (joint,
distance-only, interference-only). Each branch contributes a weighted
``(1 + erf(x))/2`` term where ``x`` standardizes the branch jitter mean by
the branch standard deviation. An optional tolerance offset and a previous
jitter state shift the branch means; with both at zero the expressions
reduce to the bare first-order forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

__all__ = [
    "StressorMoments",
    "JitterMoments",
    "IntoleranceGaussian",
    "jitter_moments",
    "intolerance_probability",
    "component_laplace",
    "intolerance_pdf",
    "exceedance_probability",
    "normal_cdf",
    "normal_quantile",
]

_STD_NORMAL = NormalDist()

# Curvature of the standardized branch argument: the branch mean is divided
# by sqrt(2 * var), so the argument itself has variance 1/2 and the local
# Gaussian model has curvature 1/(1/2) = 2.
STANDARDIZED_CURVATURE = 2.0


def normal_cdf(x: float) -> float:
    return _STD_NORMAL.cdf(x)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF; clamps away from {0, 1}."""
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return _STD_NORMAL.inv_cdf(p)


@dataclass(frozen=True)
class StressorMoments:
    """Per-transition stressor increment moments (SI units)."""

    mean_distance: float       # [m]
    var_distance: float        # [m^2]
    mean_interference: float   # [W]
    var_interference: float    # [W^2]


@dataclass(frozen=True)
class JitterMoments:
    mean: float      # [s]
    variance: float  # [s^2]

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValueError("variance cannot be negative")


def jitter_moments(sens_d: float, sens_i: float, moments: StressorMoments,
                   eps_i: int, eps_d: int, tau_prev: float) -> JitterMoments:
    """First-order (delta-method) moments of the next jitter state given the
    realized event indicators."""
    mi = sens_i * moments.mean_interference
    md = sens_d * moments.mean_distance
    vi = sens_i * sens_i * moments.var_interference
    vd = sens_d * sens_d * moments.var_distance
    joint = eps_i * eps_d
    d_only = eps_d * (1 - eps_i)
    i_only = eps_i * (1 - eps_d)
    mean = tau_prev + joint * (mi + md) + d_only * md + i_only * mi
    var = joint * (vi + vd) + d_only * vd + i_only * vi
    return JitterMoments(mean=mean, variance=var)


def _as_branch_tolerances(tolerance) -> tuple[float, float, float]:
    # scalar -> same offset on all branches; triple -> (joint, distance, interference)
    if isinstance(tolerance, (int, float)):
        t = float(tolerance)
        return t, t, t
    t_joint, t_d, t_i = (float(v) for v in tolerance)
    return t_joint, t_d, t_i


def _branch_terms(sens_d: float, sens_i: float, moments: StressorMoments,
                  p_i: float, p_d: float, tolerance, tau_prev: float):
    """Weights, means, and standard deviations of the three event branches."""
    t_joint, t_d, t_i = _as_branch_tolerances(tolerance)
    mi = sens_i * moments.mean_interference
    md = sens_d * moments.mean_distance
    vi = sens_i * sens_i * moments.var_interference
    vd = sens_d * sens_d * moments.var_distance
    weights = (p_i * p_d, (1.0 - p_i) * p_d, (1.0 - p_d) * p_i)
    means = (tau_prev + mi + md - t_joint,
             tau_prev + md - t_d,
             tau_prev + mi - t_i)
    stds = (math.sqrt(vi + vd), math.sqrt(vd), math.sqrt(vi))
    return weights, means, stds


def _erf_term(mean: float, std: float) -> float:
    """erf of the standardized branch argument; a zero-variance branch takes
    the step limit sign(mean)."""
    if std == 0.0:
        return math.copysign(1.0, mean) if mean != 0.0 else 0.0
    return math.erf(mean / (math.sqrt(2.0) * std))


def intolerance_probability(sens_d: float, sens_i: float, moments: StressorMoments,
                            p_i: float, p_d: float, *,
                            tolerance=0.0, tau_prev: float = 0.0) -> float:
    """Probability that the next transition degrades the jitter state.

    Sum of the three branch contributions, bounded by
    ``p_i + p_d - p_i*p_d``. ``tolerance`` (scalar, or a
    (joint, distance, interference) triple) offsets the branch means;
    ``tau_prev`` adds the carried jitter state.
    """
    weights, means, stds = _branch_terms(sens_d, sens_i, moments, p_i, p_d,
                                         tolerance, tau_prev)
    total = 0.0
    for w, m, s in zip(weights, means, stds):
        if w == 0.0:
            continue
        total += 0.5 * w * (1.0 + _erf_term(m, s))
    return total


def component_laplace(x0: float, curvature: float, weight: float) -> tuple[float, float]:
    """Local Gaussian model of one branch contribution.

    Returns the branch mean ``(weight/2)*(1 + erf(x0))`` and the standard
    deviation from the curvature of the log-density at the mode:
    ``var = weight^2 * exp(-2*x0^2) / (curvature * pi)``.
    """
    if curvature <= 0.0:
        raise ValueError("curvature must be positive (mode must be a maximum)")
    mean = 0.5 * weight * (1.0 + math.erf(x0))
    var = weight * weight * math.exp(-2.0 * x0 * x0) / (curvature * math.pi)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class IntoleranceGaussian:
    """Gaussian approximation of the next-transition intolerance probability.

    ``components`` records the per-branch (mode, curvature, weight) triples
    that produced the approximation. The true quantity lives on
    ``[support_lo, support_hi]``; the Gaussian is reported unclipped and
    ``mean_outside_support`` flags a mean beyond the bounds.
    """

    mean: float
    std: float
    support_lo: float
    support_hi: float
    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if not 0.0 < self.support_hi <= 1.0:
            raise ValueError("support_hi must lie in (0, 1]")

    @property
    def mean_outside_support(self) -> bool:
        return not (self.support_lo <= self.mean <= self.support_hi)


def intolerance_pdf(sens_d: float, sens_i: float, moments: StressorMoments,
                    p_i: float, p_d: float, *,
                    tolerance=0.0, tau_prev: float = 0.0) -> IntoleranceGaussian:
    """Closed-form Gaussian for the next-transition intolerance probability:
    branch-wise local Gaussians combined by convolution (means and variances
    add)."""
    weights, means, stds = _branch_terms(sens_d, sens_i, moments, p_i, p_d,
                                         tolerance, tau_prev)
    total_mean = 0.0
    total_var = 0.0
    comps = []
    for w, m, s in zip(weights, means, stds):
        if w == 0.0:
            comps.append((0.0, STANDARDIZED_CURVATURE, 0.0))
            continue
        if s == 0.0:
            # degenerate branch: saturated step contribution, no spread
            y0 = 0.5 * w * (1.0 + _erf_term(m, s))
            total_mean += y0
            comps.append((math.copysign(math.inf, m) if m else 0.0,
                          STANDARDIZED_CURVATURE, w))
            continue
        x0 = m / (math.sqrt(2.0) * s)
        y0, sigma = component_laplace(x0, STANDARDIZED_CURVATURE, w)
        total_mean += y0
        total_var += sigma * sigma
        comps.append((x0, STANDARDIZED_CURVATURE, w))
    support_hi = p_i + p_d - p_i * p_d
    return IntoleranceGaussian(
        mean=total_mean,
        std=math.sqrt(total_var),
        support_lo=0.0,
        support_hi=support_hi,
        components=tuple(comps),
    )


def exceedance_probability(pdf: IntoleranceGaussian, p_ji_minus: float) -> float:
    """Probability that the limit state stays positive is the complement of
    the Gaussian mass on ``[1 - p_ji_minus, support_hi]``; an empty interval
    yields 1."""
    if not 0.0 <= p_ji_minus <= 1.0:
        raise ValueError("p_ji_minus must lie in [0, 1]")
    a = 1.0 - p_ji_minus
    if a >= pdf.support_hi:
        return 1.0
    if pdf.std == 0.0:
        return 0.0 if a <= pdf.mean <= pdf.support_hi else 1.0
    upper = normal_cdf((pdf.support_hi - pdf.mean) / pdf.std)
    lower = normal_cdf((a - pdf.mean) / pdf.std)
    return 1.0 - (upper - lower)
