"""Secret-key rates for post-selected continuous-variable QKD over Gaussian channels."""

from .channel import (ChannelParams, ProtocolParams, RecordCovariance, full_eb_cm,
                      record_covariance)
from .keyrate import KeyRateReport, holevo_dr, keyrate, mutual_information_sign
from .optimize import OptimizationSpec, optimize_thresholds, sweep
from .postselection import (BACKEND, EffectiveParams, PostSelectedStats, PostSelectionRegion,
                            build_gamma_ab, effective_params, postselected_stats)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChannelParams", "EffectiveParams", "KeyRateReport", "OptimizationSpec",
    "PostSelectedStats", "PostSelectionRegion", "ProtocolParams", "RecordCovariance",
    "build_gamma_ab", "effective_params", "full_eb_cm", "holevo_dr", "keyrate",
    "mutual_information_sign", "optimize_thresholds", "postselected_stats",
    "record_covariance", "sweep",
]
