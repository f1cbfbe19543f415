"""Dual functional for the heat equation ``theta_t = k theta_xx``.

With ``p = lam_t + k lam_xx`` the dual objective is::

    S[lam] = -sum_nodes w M*(p) - sum_x w_x lam(x, 0) theta0(x)

and ``theta = U(p) = dM*/dp`` recovers the temperature.
"""

import numpy as np

from ..errors import ContractError
from ..grid import Field
from ..legendre import MSpec, quadratic_potential
from .base import DualProblem, initial_values, rms


class HeatProblem(DualProblem):
    """Heat equation on a one-dimensional grid.

    Parameters
    ----------
    grid : SpaceTimeGrid
    k : float
        Conductivity (length^2 / time), positive.
    theta0 : callable or array
        Initial temperature on the spatial nodes.
    H : PotentialSpec, optional
        Scalar auxiliary potential; defaults to ``theta^2 / 2``.
    """

    layout = (("lam", 1),)

    def __init__(self, grid, k, theta0, H=None, margin=0.0):
        if k <= 0:
            raise ContractError("conductivity k must be positive")
        if grid.space_dim != 1:
            raise ContractError("the heat problem lives in one space dimension")
        super().__init__(grid, margin)
        self.k = float(k)
        self.H = H or quadratic_potential(1)
        if self.H.dim_U != 1:
            raise ContractError("H must be scalar")
        self.spec = MSpec(self.H)
        self.theta0 = initial_values(grid, theta0)[..., 0]

    def p_field(self, lam):
        g = self.grid
        return g.diff(lam, 0, 1, "sbp") + self.k * g.diff(lam, 1, 2)

    def _adjoint(self, a):
        g = self.grid
        return g.diff_T(a, 0, 1, "sbp") + self.k * g.diff_T(a, 1, 2)

    def _evaluate(self, arrs):
        g = self.grid
        lam = arrs["lam"][..., 0]
        p = self.p_field(lam)
        conj, shape = self._conjugate("theta", self.spec, p[..., None])
        theta = conj.U[:, 0].reshape(shape)
        w = g.weights
        ws = g.space_weights
        S = -np.sum(w * conj.value.reshape(shape)) - np.sum(ws * lam[0] * self.theta0)
        grad = self._adjoint(-w * theta)
        grad[0] -= ws * self.theta0
        return S, {"lam": grad[..., None]}

    def objective_and_gradient(self, lam):
        S, (grad,) = self.evaluate(lam)
        return S, grad

    def recover_primal(self, lam):
        """Temperature ``theta = U(p)`` nodewise."""
        lam = self._arrays([lam])["lam"][..., 0]
        conj, shape = self._conjugate("theta", self.spec, self.p_field(lam)[..., None])
        return Field(self.grid, conj.U[:, 0].reshape(shape))

    def el_operator(self, lam):
        """Discrete Euler-Lagrange operator ``-(D^T w theta(p)) / w`` without
        constraints or initial-data term.

        For ``H = theta^2/2`` this approximates ``lam_tt - k^2 lam_xxxx``.
        """
        vals = lam.values[..., 0] if isinstance(lam, Field) else np.asarray(lam, dtype=float)
        p = self.p_field(vals)
        conj, shape = self._conjugate("el", self.spec, p[..., None])
        w = self.grid.weights
        return Field(self.grid, -self._adjoint(w * conj.U[:, 0].reshape(shape)) / w)

    def primal_residual(self, x):
        theta = self.recover_primal(self.unpack(x)["lam"])[0]
        g = self.grid
        res = g.diff(theta, 0, 1) - self.k * g.diff(theta, 1, 2)
        return rms(res, g.interior_mask(1))
