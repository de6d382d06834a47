"""Dense primal-dual interior-point solver for LP/SOCP/SDP in standard form."""

from .cones import PSD, Free, NonNeg, SecondOrder, Zero, smat, svec, svec_index
from .ipm import Settings, solve
from .program import ConicProgram, ConicSolution, Residuals, Status, residuals

__all__ = [
    "PSD", "Free", "NonNeg", "SecondOrder", "Zero", "smat", "svec", "svec_index",
    "Settings", "solve", "ConicProgram", "ConicSolution", "Residuals", "Status",
    "residuals",
]
