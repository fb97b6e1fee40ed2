"""Key rates of Gaussian-modulated CV-QKD with post-selection filters.

Alice applies a Gaussian filter to her symbols and Bob a notch filter to his
outcomes. Eve's information after Bob's non-Gaussian filter is bounded in
truncated Fock space rather than by Gaussian extremality.
"""
from .errors import (
    AsymmetryError, CalibrationError, CVQKDError, DecompositionError, DegenerateCorrelation, GridTooCoarse,
    InsufficientSamples, MemoryBudgetExceeded, NeverSecure, NonPhysicalState, NoPositiveRate, TruncationError,
    WeightError,
)
from .keyrate import (
    KeyRateReport, eve_info_fock, keyrate_after_alice, keyrate_after_bob, keyrate_gg02, keyrate_gg02_optimal,
)
from .mutual_info import GridSpec
from .params import ChannelParams, Detection, FilterSettings, ModulationParams, Quadrature

__version__ = "0.1.0"

__all__ = [
    "AsymmetryError", "CalibrationError", "CVQKDError", "ChannelParams", "DecompositionError",
    "DegenerateCorrelation", "Detection", "FilterSettings", "GridSpec", "GridTooCoarse", "InsufficientSamples",
    "KeyRateReport", "MemoryBudgetExceeded", "ModulationParams", "NeverSecure", "NonPhysicalState",
    "NoPositiveRate", "Quadrature", "TruncationError", "WeightError", "eve_info_fock", "keyrate_after_alice",
    "keyrate_after_bob", "keyrate_gg02", "keyrate_gg02_optimal",
]
