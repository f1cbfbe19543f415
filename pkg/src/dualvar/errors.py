"""Exception hierarchy shared by all modules."""

import numpy as np


class DualvarError(Exception):
    """Base class for errors raised by dualvar."""


class ContractError(DualvarError, ValueError):
    """An argument violates a documented precondition (shape, sign, range)."""


class SingularHessian(DualvarError, np.linalg.LinAlgError):
    """The Hessian of M in U is singular (or not monotone enough) at a point.

    Attributes
    ----------
    U, L : ndarray or None
        The offending primal point and parameter.
    node : tuple or None
        Grid node index when raised from a field-level solve.
    """

    def __init__(self, message, U=None, L=None, node=None):
        super().__init__(message)
        self.U = U
        self.L = L
        self.node = node


class NotConverged(DualvarError):
    """Newton iteration exhausted its budget; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, residual_norm=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm


class SingularL(DualvarError, np.linalg.LinAlgError):
    """The matrix field ``cI + grad(lam) + grad(lam)^T`` is (nearly) singular."""

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = list(nodes)


class AscentAborted(DualvarError):
    """Line search could not find a feasible step; ``report`` has the trace so far."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
