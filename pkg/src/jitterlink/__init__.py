"""jitterlink: transmission-delay jitter and resilience of a V2V wireless
link under growing interference and inter-vehicle spacing drift."""

from .config import ScenarioConfig, load_config
from .intolerance import (IntoleranceGaussian, StressorMoments, exceedance_probability,
                          intolerance_pdf, intolerance_probability, jitter_moments)
from .link import LinkParams, sinr, sinr_miso, transmission_delay
from .resilience import ResilienceSample, arer, capacity, limit_state, load
from .simulator import EnsembleStats, Trajectory, estimate_crossing, run_ensemble, run_trial

__all__ = [
    "ScenarioConfig",
    "load_config",
    "LinkParams",
    "sinr",
    "sinr_miso",
    "transmission_delay",
    "StressorMoments",
    "IntoleranceGaussian",
    "intolerance_probability",
    "intolerance_pdf",
    "exceedance_probability",
    "jitter_moments",
    "ResilienceSample",
    "arer",
    "capacity",
    "load",
    "limit_state",
    "Trajectory",
    "EnsembleStats",
    "run_trial",
    "run_ensemble",
    "estimate_crossing",
]

__version__ = "0.1.0"
