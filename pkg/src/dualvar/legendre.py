"""Legendre transform of ``M(U, L) = H(U) - L . F(U)`` in ``U`` with ``L`` a parameter.

The conjugate is ``M*(P, L) = U(P, L) . P - M(U(P, L), L)`` where ``U(P, L)``
solves ``P = dM/dU(U, L)``.  At that point the derivatives of ``M*`` are
available without differentiating anything::

    dM*/dP = U(P, L)
    dM*/dL = F(U(P, L))

All callables in :class:`PotentialSpec` and :class:`CouplingSpec` are
vectorised over leading axes: ``U`` has shape ``(..., dim_U)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, NotConverged, SingularHessian

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 50
MAX_HALVINGS = 30
SINGULAR_TOL = 1e-12

__all__ = [
    "PotentialSpec", "CouplingSpec", "MSpec", "ImplicitSolveResult",
    "Conjugate", "LegendreReport", "eval_M", "solve_U", "eval_Mstar",
    "grad_Mstar", "conjugate", "check_legendre_identities",
    "quadratic_potential", "quartic_potential", "burgers_flux",
    "linear_flux", "viscous_hj_flux",
]


def _probe_points(dim, scale, n=5, seed=0):
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((n, dim))


@dataclass(frozen=True)
class PotentialSpec:
    """A smooth scalar function of ``U`` with its gradient and Hessian.

    Construction checks the gradient against central differences of the
    value and the Hessian for symmetry at a few random probe points drawn
    with standard deviation ``probe_scale``.
    """

    dim_U: int
    value: Callable
    gradient: Callable
    hessian: Callable
    name: str = "H"
    probe_scale: float = 1.0
    check: bool = True

    def __post_init__(self):
        if self.dim_U < 1:
            raise ContractError(f"{self.name}: dim_U must be positive")
        if self.check:
            self.self_check()

    def self_check(self, rtol=1e-6):
        for U in _probe_points(self.dim_U, self.probe_scale):
            g = np.asarray(self.gradient(U), dtype=float)
            Hm = np.asarray(self.hessian(U), dtype=float)
            if g.shape != (self.dim_U,) or Hm.shape != (self.dim_U, self.dim_U):
                raise ContractError(f"{self.name}: gradient/hessian shape mismatch")
            if np.max(np.abs(Hm - Hm.T)) > 1e-12 * max(1.0, np.max(np.abs(Hm))):
                raise ContractError(f"{self.name}: hessian not symmetric at U={U}")
            h = 1e-5 * max(1.0, np.linalg.norm(U))
            fd = np.empty(self.dim_U)
            for i in range(self.dim_U):
                e = np.zeros(self.dim_U)
                e[i] = h
                fd[i] = (self.value(U + e) - self.value(U - e)) / (2 * h)
            err = np.linalg.norm(fd - g) / max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
            if err > rtol:
                raise ContractError(
                    f"{self.name}: gradient disagrees with finite differences "
                    f"(rel err {err:.2e}) at U={U}")


@dataclass(frozen=True)
class CouplingSpec:
    """The coupling ``F: R^dim_U -> R^dim_L`` with Jacobian and Hessian.

    ``jacobian(U)`` has shape ``(..., dim_L, dim_U)`` and ``hessian(U)``
    shape ``(..., dim_L, dim_U, dim_U)``; the latter enters the Newton
    matrix of :func:`solve_U`.
    """

    dim_U: int
    dim_L: int
    value: Callable
    jacobian: Callable
    hessian: Callable
    name: str = "F"
    probe_scale: float = 1.0
    check: bool = True

    def __post_init__(self):
        if self.dim_U < 1 or self.dim_L < 1:
            raise ContractError(f"{self.name}: dims must be positive")
        if self.check:
            self.self_check()

    def self_check(self, rtol=1e-6):
        for U in _probe_points(self.dim_U, self.probe_scale, seed=1):
            J = np.asarray(self.jacobian(U), dtype=float)
            if J.shape != (self.dim_L, self.dim_U):
                raise ContractError(f"{self.name}: jacobian shape {J.shape}")
            h = 1e-5 * max(1.0, np.linalg.norm(U))
            fd = np.empty_like(J)
            for i in range(self.dim_U):
                e = np.zeros(self.dim_U)
                e[i] = h
                fd[:, i] = (np.asarray(self.value(U + e)) - np.asarray(self.value(U - e))) / (2 * h)
            err = np.linalg.norm(fd - J) / max(np.linalg.norm(J), np.linalg.norm(fd), 1e-12)
            if err > rtol:
                raise ContractError(
                    f"{self.name}: jacobian disagrees with finite differences "
                    f"(rel err {err:.2e}) at U={U}")


@dataclass(frozen=True)
class MSpec:
    """``M(U, L) = H(U) - L . F(U)``; ``F=None`` means no parameter (``dim_L = 0``)."""

    H: PotentialSpec
    F: Optional[CouplingSpec] = None

    def __post_init__(self):
        if self.F is not None and self.F.dim_U != self.H.dim_U:
            raise ContractError(
                f"dim_U mismatch: {self.H.name} has {self.H.dim_U}, "
                f"{self.F.name} has {self.F.dim_U}")

    @property
    def dim_U(self):
        return self.H.dim_U

    @property
    def dim_L(self):
        return 0 if self.F is None else self.F.dim_L

    def value(self, U, L):
        out = np.asarray(self.H.value(U), dtype=float)
        if self.F is not None:
            out = out - np.einsum("...a,...a->...", L, self.F.value(U))
        return out

    def grad_U(self, U, L):
        g = np.asarray(self.H.gradient(U), dtype=float)
        if self.F is not None:
            g = g - np.einsum("...a,...an->...n", L, self.F.jacobian(U))
        return g

    def hess_U(self, U, L):
        Hm = np.asarray(self.H.hessian(U), dtype=float)
        if self.F is not None:
            Hm = Hm - np.einsum("...a,...anm->...nm", L, self.F.hessian(U))
        return Hm

    def coupling(self, U):
        if self.F is None:
            return np.zeros(np.shape(U)[:-1] + (0,))
        return np.asarray(self.F.value(U), dtype=float)


@dataclass
class ImplicitSolveResult:
    U: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


@dataclass
class Conjugate:
    """Batch evaluation of the conjugate at ``N`` points.

    ``dP`` is ``U`` itself and ``dL`` is ``F(U)``; ``eigmin`` is the smallest
    eigenvalue of the Newton matrix at the solution (monotonicity
    certificate).
    """

    U: np.ndarray
    value: np.ndarray
    dL: np.ndarray
    eigmin: np.ndarray
    iterations: int
    residual_norm: np.ndarray = field(repr=False, default=None)

    @property
    def dP(self):
        return self.U


def _as_point(x, dim, what):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise ContractError(f"{what} has shape {x.shape}, expected ({dim},)")
    return x


def _as_batch(x, dim, what):
    x = np.asarray(x, dtype=float)
    if dim == 1 and x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ContractError(f"{what} has shape {x.shape}, expected (N, {dim})")
    return x


def eval_M(U, L, spec):
    """Return ``H(U) - L . F(U)`` at a single point."""
    U = _as_point(U, spec.dim_U, "U")
    L = _as_point(L, spec.dim_L, "L") if spec.dim_L else np.zeros(0)
    return float(spec.value(U, L))


def _check_singular(J, U, L, idx):
    eig = np.linalg.eigvalsh(J)
    scale = np.maximum(1.0, np.max(np.abs(eig), axis=-1))
    small = np.min(np.abs(eig), axis=-1) <= SINGULAR_TOL * scale
    if np.any(small):
        k = int(np.flatnonzero(small)[0])
        raise SingularHessian(
            f"d2M/dU2 is singular (eigenvalues {eig[k]}) at U={U[k]}, L={L[k]}",
            U=U[k].copy(), L=L[k].copy(), node=int(idx[k]))


def _newton_batch(spec, P, L, U, tol, max_iter):
    """Damped Newton on ``r(U) = dM/dU(U, L) - P`` for every row at once.

    Convergence is declared when ``|r| <= tol * max(1, |P|)``.
    """
    n_pts = P.shape[0]
    thresh = tol * np.maximum(1.0, np.linalg.norm(P, axis=-1))
    r = spec.grad_U(U, L) - P
    rn = np.linalg.norm(r, axis=-1)
    stalled = np.zeros(n_pts, dtype=bool)
    iters = 0
    for _ in range(max_iter):
        act = np.flatnonzero((rn > thresh) & ~stalled)
        if act.size == 0:
            break
        iters += 1
        Ua, La, Pa = U[act], L[act], P[act]
        J = spec.hess_U(Ua, La)
        _check_singular(J, Ua, La, act)
        step = np.linalg.solve(J, r[act][..., None])[..., 0]
        t = np.ones(act.size)
        trial = Ua - step
        r_trial = spec.grad_U(trial, La) - Pa
        rn_trial = np.linalg.norm(r_trial, axis=-1)
        worse = ~(rn_trial < rn[act])
        for _ in range(MAX_HALVINGS):
            if not worse.any():
                break
            w = np.flatnonzero(worse)
            t[w] *= 0.5
            trial[w] = Ua[w] - t[w, None] * step[w]
            r_trial[w] = spec.grad_U(trial[w], La[w]) - Pa[w]
            rn_trial[w] = np.linalg.norm(r_trial[w], axis=-1)
            worse[w] = ~(rn_trial[w] < rn[act][w])
        ok = ~worse
        U[act[ok]] = trial[ok]
        r[act[ok]] = r_trial[ok]
        rn[act[ok]] = rn_trial[ok]
        stalled[act[~ok]] = True
    return U, rn, rn <= thresh, iters


def _solve_batch(spec, P, L, guess, tol, max_iter):
    P = _as_batch(P, spec.dim_U, "P")
    n_pts = P.shape[0]
    if spec.dim_L:
        L = _as_batch(L, spec.dim_L, "L")
    else:
        L = np.zeros((n_pts, 0))
    if L.shape[0] != n_pts:
        raise ContractError("P and L must have the same number of points")
    U = np.zeros_like(P) if guess is None else _as_batch(guess, spec.dim_U, "guess").copy()
    U, rn, conv, iters = _newton_batch(spec, P, L, U, tol, max_iter)
    return P, L, U, rn, conv, iters


def solve_U(P, L, spec, guess=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
            raise_on_failure=True):
    """Solve ``P = dM/dU(U, L)`` for ``U`` by damped Newton.

    Steps are halved (at most 30 times) whenever the full step does not
    reduce the residual norm. ``tol`` is scaled by ``max(1, |P|)``.

    Raises
    ------
    SingularHessian
        If the Newton matrix ``d2M/dU2`` is singular along the path.
    NotConverged
        If ``max_iter`` is exhausted (unless ``raise_on_failure`` is False).
    """
    P = _as_point(P, spec.dim_U, "P")
    L = _as_point(L, spec.dim_L, "L") if spec.dim_L else np.zeros(0)
    g = None if guess is None else _as_point(guess, spec.dim_U, "guess")[None]
    _, _, U, rn, conv, iters = _solve_batch(spec, P[None], L[None], g, tol, max_iter)
    result = ImplicitSolveResult(U=U[0], iterations=iters,
                                 residual_norm=float(rn[0]), converged=bool(conv[0]))
    if not result.converged and raise_on_failure:
        raise NotConverged(
            f"solve_U did not converge in {max_iter} iterations "
            f"(residual {result.residual_norm:.3e})",
            best=result.U, residual_norm=result.residual_norm)
    return result


def eval_Mstar(P, L, spec, guess=None, tol=DEFAULT_TOL):
    """``U(P, L) . P - M(U(P, L), L)``."""
    res = solve_U(P, L, spec, guess=guess, tol=tol)
    P = _as_point(P, spec.dim_U, "P")
    return float(res.U @ P) - eval_M(res.U, L, spec)


def grad_Mstar(P, L, spec, guess=None, tol=DEFAULT_TOL):
    """Return ``(dM*/dP, dM*/dL) = (U(P, L), F(U(P, L)))``."""
    res = solve_U(P, L, spec, guess=guess, tol=tol)
    return res.U, spec.coupling(res.U)


def conjugate(P, L, spec, guess=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Evaluate ``M*`` and its derivatives at ``N`` points (rows of ``P``, ``L``).

    ``guess`` warm-starts Newton, typically with the solution from the
    previous call on the same field.
    """
    P, L, U, rn, conv, iters = _solve_batch(spec, P, L, guess, tol, max_iter)
    if not np.all(conv):
        k = int(np.flatnonzero(~conv)[0])
        raise NotConverged(
            f"solve_U did not converge at point {k} (residual {rn[k]:.3e})",
            best=U, residual_norm=rn)
    value = np.einsum("ni,ni->n", U, P) - spec.value(U, L)
    eigmin = np.linalg.eigvalsh(spec.hess_U(U, L))[:, 0]
    return Conjugate(U=U, value=value, dL=spec.coupling(U), eigmin=eigmin,
                     iterations=iters, residual_norm=rn)


@dataclass
class LegendreReport:
    dP_rel_error: float
    dL_rel_error: float
    eigmin: float
    fenchel_gap: float
    threshold: float
    singular: bool = False
    message: str = ""

    @property
    def envelope_ok(self):
        return (self.dP_rel_error <= self.threshold
                and self.dL_rel_error <= self.threshold)

    @property
    def monotone(self):
        return self.eigmin > 0

    @property
    def passed(self):
        return not self.singular and self.envelope_ok and self.monotone


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-8))


def check_legendre_identities(spec, P, L, h=1e-5, threshold=1e-5, tol=DEFAULT_TOL):
    """Compare the envelope derivatives with central differences of ``M*``.

    Failures are reported in the returned :class:`LegendreReport`, never
    raised; a singular Newton matrix yields ``singular=True``.
    """
    P = _as_point(P, spec.dim_U, "P")
    L = _as_point(L, spec.dim_L, "L") if spec.dim_L else np.zeros(0)
    try:
        res = solve_U(P, L, spec, tol=tol)
        U = res.U
        # a-posteriori Fenchel gap: sup_V (P.V - M(V)) - (P.U - M(U)) ~ r.J^{-1}r / 2
        r = P - spec.grad_U(U[None], L[None])[0]
        J = spec.hess_U(U[None], L[None])[0]
        eigmin = float(np.linalg.eigvalsh(J)[0])
        fenchel = 0.5 * float(r @ np.linalg.solve(J, r)) if eigmin > 0 else np.inf

        def f(Pv, Lv):
            return eval_Mstar(Pv, Lv, spec, guess=U, tol=tol)

        fd_P = np.empty(spec.dim_U)
        for i in range(spec.dim_U):
            e = np.zeros(spec.dim_U)
            e[i] = h
            fd_P[i] = (f(P + e, L) - f(P - e, L)) / (2 * h)
        fd_L = np.empty(spec.dim_L)
        for a in range(spec.dim_L):
            e = np.zeros(spec.dim_L)
            e[a] = h
            fd_L[a] = (f(P, L + e) - f(P, L - e)) / (2 * h)
        dL = spec.coupling(U)
    except SingularHessian as exc:
        return LegendreReport(np.inf, np.inf, 0.0, np.nan, threshold,
                              singular=True, message=str(exc))
    return LegendreReport(
        dP_rel_error=_rel(U, fd_P),
        dL_rel_error=_rel(dL, fd_L) if spec.dim_L else 0.0,
        eigmin=eigmin, fenchel_gap=abs(fenchel), threshold=threshold)


# -- presets ---------------------------------------------------------------

def quadratic_potential(dim=1, scale=1.0, name=None):
    """``scale/2 |U|^2``."""
    eye = np.eye(dim)
    return PotentialSpec(
        dim_U=dim,
        value=lambda U: 0.5 * scale * np.sum(np.square(U), axis=-1),
        gradient=lambda U: scale * np.asarray(U, dtype=float),
        hessian=lambda U: np.broadcast_to(scale * eye, np.shape(U) + (dim,)).copy(),
        name=name or f"quadratic(scale={scale})")


def quartic_potential(a=1.0, b=1.0, name=None):
    """Scalar ``a u^2/2 + b u^4/4``."""
    def value(U):
        u = U[..., 0]
        return 0.5 * a * u**2 + 0.25 * b * u**4

    def gradient(U):
        return a * U + b * U**3

    def hessian(U):
        return (a + 3 * b * U**2)[..., None]

    return PotentialSpec(1, value, gradient, hessian, name=name or f"quartic(a={a}, b={b})")


def burgers_flux():
    """``f(u) = u^2/2`` for a scalar law in one space dimension."""
    return CouplingSpec(
        dim_U=1, dim_L=1,
        value=lambda U: 0.5 * np.square(U),
        jacobian=lambda U: np.asarray(U, dtype=float)[..., None],
        hessian=lambda U: np.ones(np.shape(U)[:-1] + (1, 1, 1)),
        name="burgers")


def linear_flux(a):
    """``f(u) = a u`` (scalar, one space dimension)."""
    return CouplingSpec(
        dim_U=1, dim_L=1,
        value=lambda U: a * np.asarray(U, dtype=float),
        jacobian=lambda U: np.full(np.shape(U)[:-1] + (1, 1), float(a)),
        hessian=lambda U: np.zeros(np.shape(U)[:-1] + (1, 1, 1)),
        name=f"linear(a={a})")


def viscous_hj_flux(nu_hat):
    """``f(u, B, C) = -B^2/2 + nu_hat C`` with ``U = (u, B, C)``."""
    def value(U):
        return (-0.5 * U[..., 1] ** 2 + nu_hat * U[..., 2])[..., None]

    def jacobian(U):
        J = np.zeros(np.shape(U)[:-1] + (1, 3))
        J[..., 0, 1] = -U[..., 1]
        J[..., 0, 2] = nu_hat
        return J

    def hessian(U):
        Hf = np.zeros(np.shape(U)[:-1] + (1, 3, 3))
        Hf[..., 0, 1, 1] = -1.0
        return Hf

    return CouplingSpec(3, 1, value, jacobian, hessian, name=f"viscous_hj(nu_hat={nu_hat})")
