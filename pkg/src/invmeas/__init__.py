"""Simulation and verification tools for random systems of increasing homeomorphisms of the line."""
from .homeo import (Affine, Conjugated, Cubic, HomeoRangeError, IntegerSkew, Moebius, OddPower,
                    PiecewiseLinear, PowerInterval, Word, apply, conjugate_to_line, image_interval,
                    invert)
from .system import RandomSystem, TrajectoryOverflow, TrajectorySpec, reversed_system, run_trajectory

__version__ = "0.1.0"

__all__ = [
    "Affine", "Conjugated", "Cubic", "HomeoRangeError", "IntegerSkew", "Moebius", "OddPower",
    "PiecewiseLinear", "PowerInterval", "Word", "apply", "conjugate_to_line", "image_interval",
    "invert", "RandomSystem", "TrajectoryOverflow", "TrajectorySpec", "reversed_system",
    "run_trajectory",
]
