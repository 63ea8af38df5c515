"""Random traffic accidents on a periodic road: LWR dynamics with capacity drops
driven by a piecewise deterministic jump process."""

from .capacity import AccidentParams, CapacityField, Mollifier, RoadProfile, total_capacity
from .grid import Grid
from .measures import CapDist, RateParams, SizeDist, position_measure, rate, sample_jump
from .pdp import PathConfig, approx_next_jump, exact_next_jump, simulate_path
from .solver import Diagnostics, Dynamics, InitialProfile, ModelState, evolve, lxf_step

__version__ = "0.1.0"

__all__ = [
    "AccidentParams", "CapDist", "CapacityField", "Diagnostics", "Dynamics", "Grid",
    "InitialProfile", "ModelState", "Mollifier", "PathConfig", "RateParams", "RoadProfile",
    "SizeDist", "approx_next_jump", "evolve", "exact_next_jump", "lxf_step",
    "position_measure", "rate", "sample_jump", "simulate_path", "total_capacity",
]
