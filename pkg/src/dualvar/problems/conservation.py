"""Dual functional for first-order conservation laws ``u_t + div f(u) = 0``.

The dual field ``lam`` has one component per conserved quantity. With
``p = lam_t`` and ``L = grad(lam)`` (flattened as ``L[I*d + i] = d_i lam_I``)::

    S[lam] = -sum w M*(p, grad lam) - sum_x w_x lam(x, 0) . u0(x)

where ``M(u, L) = H(u) - L . f(u)``.
"""

import numpy as np

from ..errors import ContractError
from ..grid import Field
from ..legendre import MSpec, PotentialSpec, burgers_flux
from .base import DualProblem, initial_values, rms


class ConservationLawProblem(DualProblem):
    """Scalar or system conservation law in one or two space dimensions.

    ``margin`` is the smallest eigenvalue of ``d2M/du2`` tolerated at any
    node; evaluations below it raise :class:`SingularHessian`.
    """

    def __init__(self, grid, flux, H, u0, margin=0.0):
        super().__init__(grid, margin)
        self.n = H.dim_U
        self.d = grid.space_dim
        if flux.dim_U != self.n or flux.dim_L != self.n * self.d:
            raise ContractError(
                f"flux must map R^{self.n} to R^{self.n * self.d} "
                f"(got {flux.dim_U} -> {flux.dim_L})")
        self.flux = flux
        self.H = H
        self.spec = MSpec(H, flux)
        self.u0 = initial_values(grid, u0, self.n)
        self.layout = (("lam", self.n),)

    @classmethod
    def burgers(cls, grid, u0, c=2.0, margin=0.5):
        """Inviscid Burgers ``f = u^2/2`` with ``H = c u^2/2``.

        Then ``M*(p, g) = p^2 / (2 (c - g))`` and ``u = p / (c - g)``.
        """
        if c <= 0:
            raise ContractError(f"Burgers constant c must be positive (got {c}); "
                                "c - lam_x must stay above the invertibility margin")
        H = PotentialSpec(
            1,
            value=lambda U: 0.5 * c * U[..., 0] ** 2,
            gradient=lambda U: c * np.asarray(U, dtype=float),
            hessian=lambda U: np.full(np.shape(U) + (1,), float(c)),
            name=f"quadratic(scale={c})")
        prob = cls(grid, burgers_flux(), H, u0, margin=margin)
        prob.c = c
        return prob

    def _PL(self, lam):
        g = self.grid
        P = g.diff(lam, 0, 1, "sbp")
        L = np.stack([g.diff(lam[..., I], 1 + i, 1, "sbp")
                      for I in range(self.n) for i in range(self.d)], axis=-1)
        return P, L

    def _solve(self, lam):
        P, L = self._PL(lam)
        conj, shape = self._conjugate("u", self.spec, P, L)
        U = conj.U.reshape(shape + (self.n,))
        F = conj.dL.reshape(shape + (self.n * self.d,))
        return conj, shape, U, F

    def _evaluate(self, arrs):
        g = self.grid
        lam = arrs["lam"]
        conj, shape, U, F = self._solve(lam)
        w = g.weights
        ws = g.space_weights
        S = -np.sum(w * conj.value.reshape(shape)) - np.sum(ws[..., None] * lam[0] * self.u0)
        grad = np.empty_like(lam)
        for I in range(self.n):
            gi = g.diff_T(-w * U[..., I], 0, 1, "sbp")
            for i in range(self.d):
                gi += g.diff_T(-w * F[..., I * self.d + i], 1 + i, 1, "sbp")
            grad[..., I] = gi
        grad[0] -= ws[..., None] * self.u0
        return S, {"lam": grad}

    def objective_and_gradient(self, lam):
        S, (grad,) = self.evaluate(lam)
        return S, grad

    def recover_primal(self, lam):
        """Conserved fields ``u = U(lam_t, grad lam)`` nodewise."""
        _, _, U, _ = self._solve(self._arrays([lam])["lam"])
        return Field(self.grid, U)

    def conservation_residual(self, lam):
        """RMS over interior nodes of ``d_t (dM*/dp) + div (dM*/dL)``.

        Since ``dM*/dp = u`` and ``dM*/dL = f(u)`` this is also the discrete
        residual of the conservation law for the recovered ``u``.
        """
        g = self.grid
        _, _, U, F = self._solve(self._arrays([lam])["lam"])
        res = np.empty_like(U)
        for I in range(self.n):
            r = g.diff(U[..., I], 0, 1, "sbp")
            for i in range(self.d):
                r += g.diff(F[..., I * self.d + i], 1 + i, 1, "sbp")
            res[..., I] = r
        return rms(res, g.interior_mask(1))

    def primal_residual(self, x):
        return self.conservation_residual(self.unpack(x)["lam"])
