"""Dual and mixed functionals for the incompressible Navier-Stokes equations
in two space dimensions.

Shared notation (indices run over space, ``G_ij = d_j lam_i``)::

    L = c I + G + G^T,    K = L^{-1},    v = K p

The dual functional, in ``lam`` (2 components) and ``gamma``::

    p_k = -[nu (lap lam_k + d_k div lam) - d_k gamma + d_t lam_k]
    xi  = -div lam
    S_d = sum w (-1/2 p.K p - G*(xi)) + sum_x w_x lam(x, 0) . v0(x)

The mixed functional, in the symmetric tensor ``A`` (stored as
``A11, A22, A12``), ``gamma``, ``lam`` and ``omega``::

    p_k = d_j A_kj + d_k gamma - d_t lam_k
    tau = sign (A + nu (G + G^T))
    S_m = sum w (-1/2 p.K p - sign R*(tau) + omega div lam) + initial-data term

``sign = +1`` selects the upper of the paired signs (``-R*``), ``-1`` the
lower. Symmetric tensors enter ``R`` in the orthonormal coordinates
``(D11, D22, sqrt(2) D12)`` so that the Frobenius product is a dot product.
The initial-data term carries a plus sign because ``p`` contains
``-d_t lam``; it makes ``v(x, 0) = v0`` the natural condition.
"""

import numpy as np

from ..errors import ContractError, SingularL
from ..grid import Field
from ..legendre import MSpec, quadratic_potential
from .base import DualProblem, initial_values, rms

SQRT2 = np.sqrt(2.0)


class _NSBase(DualProblem):
    def __init__(self, grid, nu_hat, rho0, c, v0, det_tol, margin):
        if grid.space_dim != 2:
            raise ContractError("Navier-Stokes problems need two space dimensions")
        if c <= 0:
            raise ContractError("c must be positive")
        if rho0 <= 0 or nu_hat < 0:
            raise ContractError("need rho0 > 0 and nu_hat >= 0")
        super().__init__(grid, margin)
        self.nu_hat = float(nu_hat)
        self.rho0 = float(rho0)
        self.c = float(c)
        self.det_tol = det_tol
        self.v0 = initial_values(grid, v0, 2)

    def _D(self, arr, i):
        return self.grid.diff(arr, 1 + i, 1, "sbp")

    def _DT(self, arr, i):
        return self.grid.diff_T(arr, 1 + i, 1, "sbp")

    def grad_lam(self, lam):
        """``G[..., i, j] = d_j lam_i``."""
        return np.stack([np.stack([self._D(lam[..., i], j) for j in range(2)], axis=-1)
                         for i in range(2)], axis=-2)

    def _LK(self, lam):
        G = self.grad_lam(lam)
        Lm = self.c * np.eye(2) + G + np.swapaxes(G, -1, -2)
        det = Lm[..., 0, 0] * Lm[..., 1, 1] - Lm[..., 0, 1] * Lm[..., 1, 0]
        bad = np.abs(det) < self.det_tol
        if np.any(bad):
            nodes = [tuple(int(i) for i in n) for n in np.argwhere(bad)]
            raise SingularL(
                f"|det L| < {self.det_tol:g} at {len(nodes)} node(s), first {nodes[:5]}; "
                f"min |det L| = {np.min(np.abs(det)):.3e}", nodes=nodes)
        K = np.empty_like(Lm)
        K[..., 0, 0] = Lm[..., 1, 1] / det
        K[..., 1, 1] = Lm[..., 0, 0] / det
        K[..., 0, 1] = K[..., 1, 0] = -Lm[..., 0, 1] / det
        return G, Lm, K, det

    def assemble_LK(self, lam):
        """Nodewise ``L``, ``K = L^{-1}`` (4 components, row-major) and ``det L``.

        Raises
        ------
        SingularL
            If ``|det L| < det_tol`` anywhere.
        """
        lam = lam.values if isinstance(lam, Field) else np.asarray(lam, dtype=float)
        _, Lm, K, det = self._LK(lam)
        g = self.grid
        return (Field(g, Lm.reshape(g.shape + (4,))), Field(g, K.reshape(g.shape + (4,))),
                Field(g, det))

    def _kinetic_grad(self, v, w):
        """Gradient wrt lam of ``sum w (-1/2 p.K p)`` through ``K`` only (p fixed)."""
        out = np.zeros(v.shape)
        for i in range(2):
            for j in range(2):
                out[..., i] += self._DT(w * v[..., i] * v[..., j], j)
        return out


class NSDualProblem(_NSBase):
    """Dual action in ``(lam, gamma)``; ``G`` is a scalar convex potential."""

    layout = (("lam", 2), ("gamma", 1))

    def __init__(self, grid, nu_hat, rho0=1.0, c=1.0, G=None, v0=None,
                 det_tol=1e-10, margin=0.0):
        super().__init__(grid, nu_hat, rho0, c, v0, det_tol, margin)
        self.G = G or quadratic_potential(1, name="G")
        if self.G.dim_U != 1:
            raise ContractError("G must be scalar")
        self.spec = MSpec(self.G)

    def p_field(self, lam, gamma):
        g, nu = self.grid, self.nu_hat
        div = self._D(lam[..., 0], 0) + self._D(lam[..., 1], 1)
        p = np.empty(lam.shape)
        for k in range(2):
            lap = g.diff(lam[..., k], 1, 2) + g.diff(lam[..., k], 2, 2)
            p[..., k] = -(nu * (lap + self._D(div, k)) - self._D(gamma, k)
                          + g.diff(lam[..., k], 0, 1, "sbp"))
        return p, -div

    def _fields(self, lam, gamma):
        p, xi = self.p_field(lam, gamma)
        G, Lm, K, det = self._LK(lam)
        v = np.einsum("...ik,...i->...k", K, p)
        conj, shape = self._conjugate("omega", self.spec, xi[..., None])
        return p, xi, K, v, conj, shape

    def _evaluate(self, arrs):
        g, nu = self.grid, self.nu_hat
        lam, gamma = arrs["lam"], arrs["gamma"][..., 0]
        p, xi, K, v, conj, shape = self._fields(lam, gamma)
        omega = conj.U[:, 0].reshape(shape)
        w = g.weights
        ws = g.space_weights[..., None]
        S = (np.sum(w * (-0.5 * np.einsum("...k,...k->...", p, v)
                         - conj.value.reshape(shape)))
             + np.sum(ws * lam[0] * self.v0))
        a = -w[..., None] * v
        div_a = self._DT(a[..., 0], 0) + self._DT(a[..., 1], 1)
        g_lam = self._kinetic_grad(v, w)
        for k in range(2):
            lapT = g.diff_T(a[..., k], 1, 2) + g.diff_T(a[..., k], 2, 2)
            g_lam[..., k] += (-nu * lapT - g.diff_T(a[..., k], 0, 1, "sbp")
                              - nu * self._DT(div_a, k) + self._DT(w * omega, k))
        g_lam[0] += ws * self.v0
        return S, {"lam": g_lam, "gamma": div_a[..., None]}

    def objective_and_gradient(self, lam, gamma):
        S, (gl, gg) = self.evaluate(lam, gamma)
        return S, gl, gg

    def recover_velocity_pressure(self, lam, gamma):
        """Velocity ``v = K p`` and pressure ``rho0 * omega`` with ``G'(omega) = xi``."""
        arrs = self._arrays([lam, gamma])
        _, _, _, v, conj, shape = self._fields(arrs["lam"], arrs["gamma"][..., 0])
        return Field(self.grid, v), Field(self.grid, self.rho0 * conj.U[:, 0].reshape(shape))

    def el_residual(self, lam, gamma):
        """RMS interior residuals ``(momentum, divergence)`` of the recovered flow."""
        v, P = self.recover_velocity_pressure(lam, gamma)
        return navier_stokes_residual(self.grid, v.values, P[0] / self.rho0, self.nu_hat)

    def primal_residual(self, x):
        f = self.unpack(x)
        mom, div = self.el_residual(f["lam"], f["gamma"])
        return float(np.hypot(mom, div))


class NSMixedProblem(_NSBase):
    """Mixed action in ``(A, gamma, lam, omega)``; evaluation and gradients only."""

    layout = (("A", 3), ("gamma", 1), ("lam", 2), ("omega", 1))

    def __init__(self, grid, nu_hat, rho0=1.0, c=1.0, R=None, sign=+1, v0=None,
                 det_tol=1e-10, margin=0.0):
        super().__init__(grid, nu_hat, rho0, c, v0, det_tol, margin)
        if sign not in (+1, -1):
            raise ContractError("sign must be +1 (upper) or -1 (lower)")
        self.sign = sign
        self.R = R or quadratic_potential(3, name="R")
        if self.R.dim_U != 3:
            raise ContractError("R acts on symmetric 2x2 tensors (3 coordinates)")
        self.spec = MSpec(self.R)

    def p_field(self, A, gamma, lam):
        dt = self.grid.diff(lam, 0, 1, "sbp")
        p = np.empty(lam.shape)
        p[..., 0] = self._D(A[..., 0], 0) + self._D(A[..., 2], 1) + self._D(gamma, 0) - dt[..., 0]
        p[..., 1] = self._D(A[..., 2], 0) + self._D(A[..., 1], 1) + self._D(gamma, 1) - dt[..., 1]
        return p

    def tau(self, A, G):
        nu, s = self.nu_hat, self.sign
        return s * np.stack([A[..., 0] + 2 * nu * G[..., 0, 0],
                             A[..., 1] + 2 * nu * G[..., 1, 1],
                             SQRT2 * (A[..., 2] + nu * (G[..., 0, 1] + G[..., 1, 0]))],
                            axis=-1)

    def _evaluate(self, arrs):
        g, nu, s = self.grid, self.nu_hat, self.sign
        A, gamma, lam, omega = (arrs["A"], arrs["gamma"][..., 0], arrs["lam"],
                                arrs["omega"][..., 0])
        p = self.p_field(A, gamma, lam)
        G, Lm, K, det = self._LK(lam)
        v = np.einsum("...ik,...i->...k", K, p)
        conj, shape = self._conjugate("D", self.spec, self.tau(A, G))
        D = conj.U.reshape(shape + (3,))
        div = self._D(lam[..., 0], 0) + self._D(lam[..., 1], 1)
        w = g.weights
        ws = g.space_weights[..., None]
        S = (np.sum(w * (-0.5 * np.einsum("...k,...k->...", p, v)
                         - s * conj.value.reshape(shape) + omega * div))
             + np.sum(ws * lam[0] * self.v0))
        a = -w[..., None] * v
        # d S / d tau = -s w D and d tau / d(A, G) carries another factor s
        wD = w[..., None] * D
        g_A = np.empty(A.shape)
        g_A[..., 0] = self._DT(a[..., 0], 0) - wD[..., 0]
        g_A[..., 1] = self._DT(a[..., 1], 1) - wD[..., 1]
        g_A[..., 2] = self._DT(a[..., 0], 1) + self._DT(a[..., 1], 0) - SQRT2 * wD[..., 2]
        g_gamma = self._DT(a[..., 0], 0) + self._DT(a[..., 1], 1)
        dG = np.empty(G.shape)
        dG[..., 0, 0] = -2 * nu * wD[..., 0]
        dG[..., 1, 1] = -2 * nu * wD[..., 1]
        dG[..., 0, 1] = dG[..., 1, 0] = -SQRT2 * nu * wD[..., 2]
        g_lam = self._kinetic_grad(v, w)
        for i in range(2):
            g_lam[..., i] += -g.diff_T(a[..., i], 0, 1, "sbp") + self._DT(w * omega, i)
            for j in range(2):
                g_lam[..., i] += self._DT(dG[..., i, j], j)
        g_lam[0] += ws * self.v0
        return S, {"A": g_A, "gamma": g_gamma[..., None], "lam": g_lam,
                   "omega": (w * div)[..., None]}

    def objective_and_gradient(self, A, gamma, lam, omega):
        """``(S, g_A, g_gamma, g_lam, g_omega)``."""
        S, grads = self.evaluate(A, gamma, lam, omega)
        return (S, *grads)

    def recover_velocity_pressure(self, A, gamma, lam, omega):
        arrs = self._arrays([A, gamma, lam, omega])
        p = self.p_field(arrs["A"], arrs["gamma"][..., 0], arrs["lam"])
        _, _, K, _ = self._LK(arrs["lam"])
        v = np.einsum("...ik,...i->...k", K, p)
        return Field(self.grid, v), Field(self.grid, self.rho0 * arrs["omega"][..., 0])


def navier_stokes_residual(grid, v, omega, nu_hat):
    """RMS interior residuals of
    ``-v_t - div(v v) + div(nu (grad v + grad v^T)) - grad omega`` and ``div v``.
    """
    g = grid

    def D(a, j):
        return g.diff(a, 1 + j)

    mom = np.empty(v.shape)
    for k in range(2):
        r = -g.diff(v[..., k], 0) - D(omega, k)
        for j in range(2):
            r += -D(v[..., k] * v[..., j], j)
            r += D(nu_hat * (D(v[..., k], j) + D(v[..., j], k)), j)
        mom[..., k] = r
    div = D(v[..., 0], 0) + D(v[..., 1], 1)
    mask = g.interior_mask(2)
    return rms(mom, mask), rms(div, mask)
