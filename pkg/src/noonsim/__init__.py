"""Post-selected linear-optics simulator for three-photon polarization NOON states."""

from .construction import ChainConfig, NoonSpec, build_noon_target, run_paper_chain
from .detection import AnalyzerConfig, DetectionPattern, coincidence_rate
from .experiment import PRESETS, PhaseScan, reproduce, scan
from .fock import StateVector, noon_state
from .fringes import FringeData, fit_fringe, fourier_decompose

__version__ = "0.1.0"

__all__ = [
    "AnalyzerConfig",
    "ChainConfig",
    "DetectionPattern",
    "FringeData",
    "NoonSpec",
    "PRESETS",
    "PhaseScan",
    "StateVector",
    "build_noon_target",
    "coincidence_rate",
    "fit_fringe",
    "fourier_decompose",
    "noon_state",
    "reproduce",
    "run_paper_chain",
    "scan",
]
