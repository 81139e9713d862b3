"""Numerical laboratory for the focusing generalized Hartree equation

    i u_t + Delta u + (|x|^{-(N-gamma)} * |u|^p) |u|^{p-2} u = 0.
"""

from .errors import ChoquardError
from .model import CriticalityClass, ProblemParams, critical_index, classify_criticality
from .spectral import Field, Grid
from .invariants import ConservedSet, RenormalizedSet, conserved_set, renormalized, weinstein_J
from .groundstate import (GroundState, GroundStateConstants, petviashvili_solve, sharp_constant,
                          shoot_radial_choquard, shooting_ground_state)
from .evolution import EvolutionConfig, Termination, Trajectory, evolve
from .classify import Observation, Prediction, Verdict, predict, run_and_compare

__version__ = "0.1.0"

__all__ = [
    "ChoquardError", "CriticalityClass", "ProblemParams", "critical_index", "classify_criticality",
    "Field", "Grid", "ConservedSet", "RenormalizedSet", "conserved_set", "renormalized",
    "weinstein_J", "GroundState", "GroundStateConstants", "petviashvili_solve", "sharp_constant",
    "shoot_radial_choquard", "shooting_ground_state", "EvolutionConfig", "Termination",
    "Trajectory", "evolve", "Observation", "Prediction", "Verdict", "predict", "run_and_compare",
]
