"""Sparse blind source separation: GMCA warm-up, PALM refinement and their combination."""

__version__ = "0.1.0"

from .datagen import SeparationProblem, SyntheticSpec, gen_problem
from .gmca import GmcaConfig, run_gmca
from .hybrid import MODES, TwoStepConfig, run_mode, run_two_step
from .metrics import align, c_a
from .palm import PalmConfig, run_palm
from .result import SeparationResult, SolverError
from .starlet import Geometry, starlet_forward, starlet_inverse

__all__ = [
    "GmcaConfig",
    "Geometry",
    "MODES",
    "PalmConfig",
    "SeparationProblem",
    "SeparationResult",
    "SolverError",
    "SyntheticSpec",
    "TwoStepConfig",
    "align",
    "c_a",
    "gen_problem",
    "run_gmca",
    "run_mode",
    "run_palm",
    "run_two_step",
    "starlet_forward",
    "starlet_inverse",
]
