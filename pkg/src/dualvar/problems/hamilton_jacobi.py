"""Dual functional for second-order Hamilton-Jacobi systems.

The primal system ``u_t = f(u, B, C)``, ``B = grad u``, ``C = grad grad u``
is paired with dual fields ``lam`` (n), ``gamma`` (n*d) and ``rho`` (n*d*d)
through::

    P = (lam_t + div gamma - grad grad : rho, gamma, rho),   L = lam
    S = -sum w M*(P, L) - sum_x w_x lam(x, 0) . u0(x)

with ``U = (u, B, C)`` and ``M(U, L) = H(U) - L . f(U)``.
"""

import numpy as np

from ..errors import ContractError
from ..grid import Field
from ..legendre import MSpec, quadratic_potential, viscous_hj_flux
from .base import DualProblem, initial_values, rms


class HJProblem(DualProblem):
    """Hamilton-Jacobi system with ``n`` unknowns in ``d`` space dimensions.

    ``f`` is a :class:`CouplingSpec` from ``U = (u, B, C)`` (length
    ``n + n d + n d d``) to ``R^n``; ``H`` a potential on the same ``U``.
    """

    def __init__(self, grid, f, H, u0, n=1, margin=0.0):
        super().__init__(grid, margin)
        d = grid.space_dim
        self.n, self.d = n, d
        self.dims = (n, n * d, n * d * d)
        dim_U = sum(self.dims)
        if f.dim_U != dim_U or f.dim_L != n or H.dim_U != dim_U:
            raise ContractError(
                f"need f: R^{dim_U} -> R^{n} and H on R^{dim_U} for n={n}, d={d}")
        self.f = f
        self.H = H
        self.spec = MSpec(H, f)
        self.u0 = initial_values(grid, u0, n)
        self.layout = (("lam", n), ("gamma", n * d), ("rho", n * d * d))

    @classmethod
    def viscous(cls, grid, nu_hat, u0, H=None, margin=0.0):
        """Scalar 1-D ``u_t = -u_x^2/2 + nu_hat u_xx`` with ``H = |U|^2/2`` by default."""
        if grid.space_dim != 1:
            raise ContractError("the viscous preset is one-dimensional")
        return cls(grid, viscous_hj_flux(nu_hat), H or quadratic_potential(3), u0,
                   margin=margin)

    # second derivative d_a d_b and its transpose
    def _dd(self, arr, a, b):
        g = self.grid
        if a == b:
            return g.diff(arr, 1 + a, 2)
        return g.diff(g.diff(arr, 1 + b, 1, "sbp"), 1 + a, 1, "sbp")

    def _dd_T(self, arr, a, b):
        g = self.grid
        if a == b:
            return g.diff_T(arr, 1 + a, 2)
        return g.diff_T(g.diff_T(arr, 1 + a, 1, "sbp"), 1 + b, 1, "sbp")

    def _P(self, lam, gamma, rho):
        g, n, d = self.grid, self.n, self.d
        Pu = g.diff(lam, 0, 1, "sbp")
        for I in range(n):
            for i in range(d):
                Pu[..., I] += g.diff(gamma[..., I * d + i], 1 + i, 1, "sbp")
                for j in range(d):
                    Pu[..., I] -= self._dd(rho[..., (I * d + i) * d + j], j, i)
        return np.concatenate([Pu, gamma, rho], axis=-1)

    def _solve(self, lam, gamma, rho):
        conj, shape = self._conjugate("U", self.spec, self._P(lam, gamma, rho), lam)
        U = conj.U.reshape(shape + (-1,))
        return conj, shape, U, conj.dL.reshape(shape + (self.n,))

    def _evaluate(self, arrs):
        g, n, d = self.grid, self.n, self.d
        lam, gamma, rho = arrs["lam"], arrs["gamma"], arrs["rho"]
        conj, shape, U, F = self._solve(lam, gamma, rho)
        w = g.weights
        ws = g.space_weights[..., None]
        S = -np.sum(w * conj.value.reshape(shape)) - np.sum(ws * lam[0] * self.u0)
        wU = -w[..., None] * U
        a = wU[..., :n]
        g_lam = g.diff_T(a, 0, 1, "sbp") - w[..., None] * F
        g_lam[0] -= ws * self.u0
        g_gamma = wU[..., n:n + n * d].copy()
        g_rho = wU[..., n + n * d:].copy()
        for I in range(n):
            for i in range(d):
                g_gamma[..., I * d + i] += g.diff_T(a[..., I], 1 + i, 1, "sbp")
                for j in range(d):
                    g_rho[..., (I * d + i) * d + j] -= self._dd_T(a[..., I], j, i)
        return S, {"lam": g_lam, "gamma": g_gamma, "rho": g_rho}

    def objective_and_gradient(self, lam, gamma, rho):
        S, (gl, gg, gr) = self.evaluate(lam, gamma, rho)
        return S, gl, gg, gr

    def recover_primal(self, lam, gamma, rho):
        """``(u, B, C)`` Fields from the nodewise solve at ``(P, L)``."""
        arrs = self._arrays([lam, gamma, rho])
        _, _, U, _ = self._solve(arrs["lam"], arrs["gamma"], arrs["rho"])
        n, nb, _ = self.dims
        return (Field(self.grid, U[..., :n]), Field(self.grid, U[..., n:n + nb]),
                Field(self.grid, U[..., n + nb:]))

    def el_residuals(self, lam, gamma, rho):
        """RMS interior residuals of ``u_t - f``, ``B - grad u`` and ``C - grad grad u``."""
        g, n, d = self.grid, self.n, self.d
        arrs = self._arrays([lam, gamma, rho])
        _, _, U, F = self._solve(arrs["lam"], arrs["gamma"], arrs["rho"])
        u, B, C = U[..., :n], U[..., n:n + n * d], U[..., n + n * d:]
        mask = g.interior_mask(1)
        r_t = g.diff(u, 0) - F
        r_B = np.stack([B[..., I * d + i] - g.diff(u[..., I], 1 + i)
                        for I in range(n) for i in range(d)], axis=-1)
        r_C = np.stack([C[..., (I * d + i) * d + j] - self._dd(u[..., I], i, j)
                        for I in range(n) for i in range(d) for j in range(d)], axis=-1)
        return {"evolution": rms(r_t, mask), "gradient": rms(r_B, mask),
                "hessian": rms(r_C, mask)}

    def primal_residual(self, x):
        fields = self.unpack(x)
        res = self.el_residuals(*(fields[k] for k in self.names))
        return float(np.sqrt(sum(v**2 for v in res.values())))
