"""Concrete dual variational problems."""

from .base import DualProblem
from .conservation import ConservationLawProblem
from .hamilton_jacobi import HJProblem
from .heat import HeatProblem
from .navier_stokes import NSDualProblem, NSMixedProblem, navier_stokes_residual

__all__ = [
    "DualProblem", "HeatProblem", "ConservationLawProblem", "HJProblem",
    "NSDualProblem", "NSMixedProblem", "navier_stokes_residual",
]
