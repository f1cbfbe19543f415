"""Independent reference solutions and error norms.

Nothing here reuses the stencils of :mod:`dualvar.grid` or the problem
classes: the steppers below are written with plain array slicing so that
agreement with a dual solve is evidence, not a tautology.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .grid import Field

EPS_FLOOR = 1e-300
DEFAULT_SHOCK_GUARD = 0.08


@dataclass
class ErrorReport:
    """``l2_rel = |a - b|_2 / max(|b|_2, EPS_FLOOR)`` and ``linf = max |a - b|``
    over the compared nodes; ``field_diff`` holds ``a - b`` everywhere."""

    l2_rel: float
    linf: float
    field_diff: Field


def compare_fields(a, b, mask="interior"):
    """Relative l2 and absolute max error of ``a`` against the reference ``b``.

    ``mask="interior"`` drops nodes on non-periodic edges (including both
    time ends); ``"all"`` compares every node. When ``b`` vanishes the
    denominator is the floor ``1e-300``, so ``l2_rel`` becomes huge rather
    than raising.
    """
    if not (isinstance(a, Field) and isinstance(b, Field)):
        raise ContractError("compare_fields takes two Fields")
    if a.grid != b.grid:
        raise ContractError("fields live on different grids")
    if a.components != b.components:
        raise ContractError(f"component mismatch: {a.components} vs {b.components}")
    diff = a.values - b.values
    if mask == "interior":
        sel = a.grid.interior_mask(1)
    elif mask == "all":
        sel = np.ones(a.grid.shape, dtype=bool)
    else:
        raise ContractError(f"unknown mask {mask!r}")
    d, ref = diff[sel], b.values[sel]
    l2 = float(np.linalg.norm(d) / max(np.linalg.norm(ref), EPS_FLOOR))
    linf = float(np.max(np.abs(d))) if d.size else 0.0
    return ErrorReport(l2, linf, Field(a.grid, diff))


def heat_exact_oracle(k, m, grid):
    """Separable mode ``sin(m pi x) exp(-k m^2 pi^2 t)`` on ``[0, 1]``."""
    if grid.space_dim != 1 or grid.x_min != 0.0 or grid.x_max != 1.0 or grid.periodic:
        raise ContractError("the exact heat mode lives on the closed interval [0, 1]")
    T, X = grid.mesh()
    vals = np.sin(m * np.pi * X) * np.exp(-k * (m * np.pi) ** 2 * T)
    vals[:, 0] = 0.0
    vals[:, -1] = 0.0
    return Field(grid, vals)


def _initial(u0, grid):
    if callable(u0):
        return np.broadcast_to(np.asarray(u0(grid.x), dtype=float), (grid.nx,)).copy()
    u = np.asarray(u0, dtype=float).reshape(grid.nx)
    return u.copy()


def _ddx(u, dx, periodic):
    """Central first and second differences; ends left at zero when not periodic."""
    ux = np.zeros_like(u)
    uxx = np.zeros_like(u)
    if periodic:
        up, um = np.roll(u, -1), np.roll(u, 1)
        ux[:] = (up - um) / (2 * dx)
        uxx[:] = (up - 2 * u + um) / dx**2
    else:
        ux[1:-1] = (u[2:] - u[:-2]) / (2 * dx)
        uxx[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
    return ux, uxx


def classical_fd_oracle(kind, grid, u0, k=None, nu_hat=None, cfl=0.4):
    """Explicit method-of-lines reference for heat or viscous Hamilton-Jacobi.

    Central differences in space, Heun (RK2) in time with enough sub-steps
    between grid time levels to satisfy ``dt <= cfl dx^2 / (2 k)`` (and the
    advective limit for HJ). On a non-periodic grid the end values of ``u0``
    are held fixed.

    Parameters
    ----------
    kind : {"heat", "viscous-hj"}
        ``u_t = k u_xx`` or ``u_t = -u_x^2 / 2 + nu_hat u_xx``.
    """
    if grid.space_dim != 1:
        raise ContractError("the classical oracle is one-dimensional")
    if kind == "heat":
        if k is None or k <= 0:
            raise ContractError("heat needs k > 0")
        diff, adv = float(k), 0.0
    elif kind == "viscous-hj":
        if nu_hat is None or nu_hat <= 0:
            raise ContractError("viscous-hj needs nu_hat > 0")
        diff, adv = float(nu_hat), 1.0
    else:
        raise ContractError(f"unknown oracle kind {kind!r}")

    dx, per = grid.dx, grid.periodic
    u = _initial(u0, grid)
    left, right = u[0], u[-1]

    def rhs(u):
        ux, uxx = _ddx(u, dx, per)
        return diff * uxx - adv * 0.5 * ux**2

    out = np.empty(grid.shape)
    out[0] = u
    for n in range(1, grid.nt):
        slope = max(np.max(np.abs(_ddx(u, dx, per)[0])), 1e-12) * adv
        limit = cfl * dx**2 / (2 * diff)
        if slope > 0:
            limit = min(limit, cfl * dx / slope)
        nsub = max(1, int(np.ceil(grid.dt / limit)))
        h = grid.dt / nsub
        for _ in range(nsub):
            k1 = rhs(u)
            k2 = rhs(u + h * k1)
            u = u + 0.5 * h * (k1 + k2)
            if not per:
                u[0], u[-1] = left, right
        out[n] = u
    return Field(grid, out)


def shock_time(u0, x_min=0.0, x_max=1.0, u0_prime=None, n_sample=8193):
    """First characteristic crossing ``t* = -1 / min u0'`` (``inf`` if none)."""
    xs = np.linspace(x_min, x_max, n_sample)
    if u0_prime is not None:
        du = np.asarray(u0_prime(xs), dtype=float)
    else:
        h = 1e-6 * max(1.0, x_max - x_min)
        du = (np.asarray(u0(xs + h)) - np.asarray(u0(xs - h))) / (2 * h)
    m = float(np.min(du))
    return np.inf if m >= 0 else -1.0 / m


def burgers_characteristics_oracle(u0, grid, t_shock_guard=DEFAULT_SHOCK_GUARD,
                                   u0_prime=None, tol=1e-13):
    """Classical pre-shock solution of ``u_t + (u^2/2)_x = 0``.

    Solves ``u = u0(x - u t)`` at every node: bisection on a bracket given by
    the range of ``u0``, then a few Newton polishing steps when ``u0_prime``
    is supplied. ``u0`` must be vectorised and, on a periodic grid, periodic.

    Raises
    ------
    ContractError
        If ``t_max >= t* - t_shock_guard``; the message reports ``t*``.
    """
    if grid.space_dim != 1:
        raise ContractError("the characteristics oracle is one-dimensional")
    t_star = shock_time(u0, grid.x_min, grid.x_max, u0_prime)
    if grid.t_max >= t_star - t_shock_guard:
        raise ContractError(
            f"t_max={grid.t_max} is too close to the shock time t*={t_star:.6g} "
            f"(guard {t_shock_guard})")
    T, X = grid.mesh()
    samples = np.asarray(u0(np.linspace(grid.x_min, grid.x_max, 4097)), dtype=float)
    pad = 1e-9 * max(1.0, np.ptp(samples))
    lo = np.full(T.shape, samples.min() - pad)
    hi = np.full(T.shape, samples.max() + pad)

    def g(u):
        return u - u0(X - u * T)

    # g is increasing in u before the shock time, so the bracket is valid
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.max(hi - lo) < tol:
            break
    u = 0.5 * (lo + hi)
    if u0_prime is not None:
        for _ in range(3):
            u = u - g(u) / (1.0 + T * u0_prime(X - u * T))
    u[0] = u0(grid.x)
    return Field(grid, u)
