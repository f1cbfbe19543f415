"""Dual variational principles for nonlinear PDE systems.

A primal PDE is imposed with Lagrange multipliers, an auxiliary potential
``H`` is added, and the primal fields are eliminated by a parametric
Legendre transform. What remains is a functional of the multipliers alone
whose stationary points map back to solutions of the PDE.
"""

from .errors import (AscentAborted, ContractError, DualvarError, NotConverged,
                     SingularHessian, SingularL)
from .grid import Field, SpaceTimeGrid, apply_diff, fd_gradient_check, integrate
from .legendre import (CouplingSpec, MSpec, PotentialSpec, check_legendre_identities,
                       eval_M, eval_Mstar, grad_Mstar, solve_U)
from .optimizer import AscentConfig, SolveReport, ascend, solve

__version__ = "0.1.0"

__all__ = [
    "AscentAborted", "ContractError", "DualvarError", "NotConverged", "SingularHessian",
    "SingularL", "Field", "SpaceTimeGrid", "apply_diff", "fd_gradient_check", "integrate",
    "CouplingSpec", "MSpec", "PotentialSpec", "check_legendre_identities", "eval_M",
    "eval_Mstar", "grad_Mstar", "solve_U", "AscentConfig", "SolveReport", "ascend", "solve",
]
