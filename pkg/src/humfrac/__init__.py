"""humfrac: regional boundary control of semilinear time-fractional diffusion
on the square, via the Hilbert Uniqueness Method in a cosine eigenbasis."""

from .fode import NonlinearSpec, StateTrajectory, TimeMesh
from .fracops import ControlSignal, FracParams, GramMatrix, gram_matrix
from .hum import HUMProblem, RunReport, fixed_point, simulate_closed_loop
from .mlf import mittag_leffler, ml_kernel
from .models import builtin, preset
from .spectral import (
    Actuator,
    BoundarySegment,
    ModeIndex,
    Rect,
    SpectralField,
)

__version__ = "0.1.0"

__all__ = [
    "Actuator",
    "BoundarySegment",
    "ControlSignal",
    "FracParams",
    "GramMatrix",
    "HUMProblem",
    "ModeIndex",
    "NonlinearSpec",
    "Rect",
    "RunReport",
    "SpectralField",
    "StateTrajectory",
    "TimeMesh",
    "builtin",
    "fixed_point",
    "gram_matrix",
    "mittag_leffler",
    "ml_kernel",
    "preset",
    "simulate_closed_loop",
    "__version__",
]
