"""Space-mapping surrogate optimization for a coupled-line microstrip filter."""

from .explicit import (MappingSet, RegionOfInterest, extract_mapping, optimize_surrogate,
                       star_base_set, surrogate_response, validate_surrogate)
from .implicit import RrsmSettings, calibrate_aux, run_ism_rrsm
from .models import CoarseModel, EmulatorTruth, EvalCounter, FilterGeometry, FineEmulator
from .optimize import Bounds, OptimizerSettings
from .response import ChannelSelector, FrequencyGrid, Response, make_grid
from .specs import DesignSpec, SpecBand, objective, filter_spec

__version__ = "0.1.0"

__all__ = [
    "Bounds", "ChannelSelector", "CoarseModel", "DesignSpec", "EmulatorTruth", "EvalCounter",
    "FilterGeometry", "FineEmulator", "FrequencyGrid", "MappingSet", "OptimizerSettings",
    "RegionOfInterest", "Response", "RrsmSettings", "SpecBand", "calibrate_aux",
    "extract_mapping", "make_grid", "objective", "optimize_surrogate", "filter_spec",
    "run_ism_rrsm", "star_base_set", "surrogate_response", "validate_surrogate",
]
