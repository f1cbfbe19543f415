"""Uniform space-time grids, nodal fields, stencils and quadrature.

Arrays are laid out time-first: a single-component array on a grid with
one space dimension has shape ``(nt, nx)``, with two ``(nt, nx, ny)``.
A :class:`Field` appends a trailing component axis.

Two boundary closures are offered for non-periodic axes:

``"second_order"``
    Central differences inside, one-sided second-order stencils at the
    ends. Used by :func:`apply_diff` by default.
``"sbp"``
    Central differences inside, one-sided first-order first derivative at
    the ends (and the shifted three-point second derivative). Together
    with trapezoidal weights the first derivative satisfies discrete
    integration by parts exactly::

        sum(w * u * D v) + sum(w * D u * v) = u[-1] v[-1] - u[0] v[0]

    which is what the dual problems need so that initial data enter as a
    natural condition.
"""

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import ContractError

CLOSURES = ("second_order", "sbp")
DIFF_KINDS = ("d_dt", "d_dx", "d_dy", "d2_dx2", "d2_dy2", "div", "grad")


def _first(n, h, closure, periodic):
    A = sp.lil_matrix((n, n))
    for i in range(n):
        if periodic or 0 < i < n - 1:
            A[i, (i - 1) % n] = -0.5 / h
            A[i, (i + 1) % n] = 0.5 / h
    if not periodic:
        if closure == "sbp":
            A[0, 0], A[0, 1] = -1 / h, 1 / h
            A[-1, -2], A[-1, -1] = -1 / h, 1 / h
        else:
            A[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
            A[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    return A.tocsr()


def _second(n, h, closure, periodic):
    A = sp.lil_matrix((n, n))
    for i in range(n):
        if periodic or 0 < i < n - 1:
            A[i, (i - 1) % n] = 1 / h**2
            A[i, i] = -2 / h**2
            A[i, (i + 1) % n] = 1 / h**2
    if not periodic:
        if closure == "sbp":
            A[0, :3] = np.array([1.0, -2.0, 1.0]) / h**2
            A[-1, -3:] = np.array([1.0, -2.0, 1.0]) / h**2
        else:
            A[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
            A[-1, -4:] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
    return A.tocsr()


@lru_cache(maxsize=None)
def _operator(n, h, closure, periodic, order, transpose):
    A = (_first if order == 1 else _second)(n, h, closure, periodic)
    return A.T.tocsr() if transpose else A


def _trapezoid(n, h, periodic):
    w = np.full(n, h)
    if not periodic:
        w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Tensor grid over ``Omega x [0, t_max]`` with one or two space axes.

    On a non-periodic axis the nodes include both ends and
    ``dx = (x_max - x_min) / (nx - 1)``. With ``periodic=True`` the spatial
    axes wrap around, the node at ``x_max`` is identified with ``x_min`` and
    ``dx = (x_max - x_min) / nx``. Time is never periodic.
    """

    nx: int
    nt: int
    x_min: float = 0.0
    x_max: float = 1.0
    t_max: float = 1.0
    ny: int = None
    y_min: float = 0.0
    y_max: float = 1.0
    periodic: bool = False

    def __post_init__(self):
        if self.nx < 4 or self.nt < 4 or (self.ny is not None and self.ny < 4):
            raise ContractError("grids need at least 4 nodes per axis")
        if not (self.x_max > self.x_min and self.t_max > 0):
            raise ContractError("empty domain")
        if self.ny is not None and not self.y_max > self.y_min:
            raise ContractError("empty domain in y")

    @property
    def space_dim(self):
        return 1 if self.ny is None else 2

    @property
    def shape(self):
        if self.ny is None:
            return (self.nt, self.nx)
        return (self.nt, self.nx, self.ny)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def _spacing(self, lo, hi, n):
        return (hi - lo) / (n if self.periodic else n - 1)

    @property
    def dx(self):
        return self._spacing(self.x_min, self.x_max, self.nx)

    @property
    def dy(self):
        return None if self.ny is None else self._spacing(self.y_min, self.y_max, self.ny)

    @property
    def dt(self):
        return self.t_max / (self.nt - 1)

    @property
    def t(self):
        return np.linspace(0.0, self.t_max, self.nt)

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def y(self):
        return None if self.ny is None else self.y_min + self.dy * np.arange(self.ny)

    def axes(self):
        """Coordinate vectors in array-axis order (t, x[, y])."""
        return [self.t, self.x] + ([] if self.ny is None else [self.y])

    def mesh(self):
        """Broadcast coordinate arrays ``(T, X[, Y])`` of shape :attr:`shape`."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def spacing(self, axis):
        return (self.dt, self.dx, self.dy)[axis]

    def axis_periodic(self, axis):
        return self.periodic and axis > 0

    # -- quadrature ----------------------------------------------------------

    def axis_weights(self, axis):
        n = self.shape[axis]
        return _trapezoid(n, self.spacing(axis), self.axis_periodic(axis))

    @property
    def space_weights(self):
        """Trapezoid weights over the spatial axes only (shape ``shape[1:]``)."""
        w = self.axis_weights(1)
        if self.ny is not None:
            w = np.multiply.outer(w, self.axis_weights(2))
        return w

    @property
    def weights(self):
        """Space-time trapezoid weights of shape :attr:`shape`."""
        return np.multiply.outer(self.axis_weights(0), self.space_weights)

    # -- stencils --------------------------------------------------------------

    def matrix(self, axis, order, closure="second_order", transpose=False):
        if closure not in CLOSURES:
            raise ContractError(f"unknown closure {closure!r}")
        n, h, per = self.shape[axis], self.spacing(axis), self.axis_periodic(axis)
        return _operator(n, h, closure, per, order, transpose)

    def diff(self, arr, axis, order=1, closure="second_order"):
        """Apply a 1-D difference matrix along ``axis`` of ``arr``.

        ``arr`` has shape :attr:`shape` optionally followed by extra axes.
        """
        return _along(self.matrix(axis, order, closure), arr, axis)

    def diff_T(self, arr, axis, order=1, closure="second_order"):
        """Transpose of :meth:`diff`; the discrete adjoint used in gradients."""
        return _along(self.matrix(axis, order, closure, transpose=True), arr, axis)

    def boundary_mask(self, terminal=True):
        """True on constrained nodes: non-periodic spatial edges and ``t = t_max``."""
        mask = np.zeros(self.shape, dtype=bool)
        if terminal:
            mask[-1] = True
        if not self.periodic:
            mask[:, 0] = mask[:, -1] = True
            if self.ny is not None:
                mask[:, :, 0] = mask[:, :, -1] = True
        return mask

    def interior_mask(self, margin=1):
        """Nodes at least ``margin`` away from every non-periodic edge."""
        mask = np.ones(self.shape, dtype=bool)
        for axis, n in enumerate(self.shape):
            if self.axis_periodic(axis):
                continue
            idx = [slice(None)] * len(self.shape)
            idx[axis] = np.r_[0:margin, n - margin:n]
            mask[tuple(idx)] = False
        return mask


def _along(mat, arr, axis):
    arr = np.asarray(arr, dtype=float)
    moved = np.moveaxis(arr, axis, 0)
    out = mat @ moved.reshape(moved.shape[0], -1)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


class Field:
    """Multi-component nodal values on a :class:`SpaceTimeGrid`.

    ``values`` has shape ``grid.shape + (components,)``: row-major with the
    component index fastest.
    """

    def __init__(self, grid, values, components=None):
        values = np.array(values, dtype=float)
        if components is None:
            components = 1 if values.shape == grid.shape else values.shape[-1]
        values = values.reshape(grid.shape + (components,))
        if not np.all(np.isfinite(values)):
            raise ContractError("field values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid, components=1):
        return cls(grid, np.zeros(grid.shape + (components,)))

    @classmethod
    def from_function(cls, grid, fn, components=1):
        """Sample ``fn(t, x[, y])``; it returns one array, or a tuple per component."""
        out = fn(*grid.mesh())
        if components == 1 and not isinstance(out, (tuple, list)):
            out = (out,)
        comps = [np.broadcast_to(np.asarray(c, dtype=float), grid.shape) for c in out]
        return cls(grid, np.stack(comps, axis=-1))

    @property
    def components(self):
        return self.values.shape[-1]

    def __getitem__(self, comp):
        return self.values[..., comp]

    def copy(self):
        return Field(self.grid, self.values.copy())

    def __repr__(self):
        return f"Field(shape={self.grid.shape}, components={self.components})"


def _check_comp(f, comp):
    if not 0 <= comp < f.components:
        raise ContractError(f"component {comp} out of range for {f.components}-component field")


def apply_diff(f, kind, comp=0, closure="second_order"):
    """Differentiate a field.

    ``kind`` is one of ``d_dt, d_dx, d_dy, d2_dx2, d2_dy2`` (applied to
    component ``comp``), ``div`` (sum of ``d/dx_i`` of component ``i``) or
    ``grad`` (spatial gradient of component ``comp``).
    """
    g = f.grid
    if kind not in DIFF_KINDS:
        raise ContractError(f"unknown derivative kind {kind!r}")
    if kind in ("d_dy", "d2_dy2") and g.space_dim < 2:
        raise ContractError(f"{kind} needs two space dimensions")
    if kind == "div":
        if f.components != g.space_dim:
            raise ContractError("div needs one component per space dimension")
        out = sum(g.diff(f[i], 1 + i, 1, closure) for i in range(g.space_dim))
        return Field(g, out)
    _check_comp(f, comp)
    u = f[comp]
    if kind == "grad":
        return Field(g, np.stack([g.diff(u, 1 + i, 1, closure)
                                  for i in range(g.space_dim)], axis=-1))
    axis = {"d_dt": 0, "d_dx": 1, "d_dy": 2, "d2_dx2": 1, "d2_dy2": 2}[kind]
    order = 2 if kind.startswith("d2") else 1
    return Field(g, g.diff(u, axis, order, closure))


def integrate(f):
    """Trapezoidal rule over all axes of a single-component field."""
    if f.components != 1:
        raise ContractError("integrate needs a single-component field")
    return float(np.sum(f.grid.weights * f[0]))


def fd_gradient_check(objective, gradient, at, n_probe=20, h=1e-6, rng=None,
                      candidates=None):
    """Largest relative error between ``gradient`` and central differences.

    ``at`` is a :class:`Field` or a flat array; ``objective`` and
    ``gradient`` take the same type. Each probe perturbs a single entry
    ``e`` chosen at random (from ``candidates`` if given) and compares
    ``(S(at + h e) - S(at - h e)) / 2h`` with ``gradient(at) . e``. Errors
    are relative to the larger of the two numbers, floored at ``1e-8``
    times the gradient's sup norm so that exactly-zero entries count as
    agreement.
    """
    rng = np.random.default_rng(rng)
    is_field = isinstance(at, Field)
    base = at.values if is_field else np.asarray(at, dtype=float)
    flat0 = base.ravel()

    def wrap(flat):
        arr = flat.reshape(base.shape)
        return Field(at.grid, arr) if is_field else arr

    g = gradient(at)
    g = np.asarray(g.values if is_field else g, dtype=float).ravel()
    floor = max(1e-8 * np.max(np.abs(g)), 1e-300)
    pool = np.arange(flat0.size) if candidates is None else np.asarray(candidates)
    picks = rng.choice(pool, size=min(n_probe, pool.size), replace=False)
    worst = 0.0
    for k in picks:
        xp, xm = flat0.copy(), flat0.copy()
        xp[k] += h
        xm[k] -= h
        sp_, sm = objective(wrap(xp)), objective(wrap(xm))
        if not (np.isfinite(sp_) and np.isfinite(sm)):
            raise ContractError(f"objective not finite while probing entry {k}")
        fd = (sp_ - sm) / (2 * h)
        err = abs(fd - g[k]) / max(abs(fd), abs(g[k]), floor)
        worst = max(worst, err)
    return worst


# -- snapshot files ---------------------------------------------------------

def write_field_csv(path, field):
    """Write ``axis0,axis1[,axis2],component,value`` rows in row-major node order.

    Axis columns hold node coordinates (axis0 is time); numbers use 17
    significant digits.
    """
    g = field.grid
    coords = g.axes()
    header = [f"axis{i}" for i in range(len(coords))] + ["component", "value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for idx in np.ndindex(*g.shape):
            pos = [format(coords[a][i], ".17g") for a, i in enumerate(idx)]
            for c in range(field.components):
                w.writerow(pos + [c, format(field.values[idx + (c,)], ".17g")])


def read_field_csv(path, grid):
    """Inverse of :func:`write_field_csv` for a known grid."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_axes = len(grid.shape)
    if header != [f"axis{i}" for i in range(n_axes)] + ["component", "value"]:
        raise ContractError(f"unexpected header {header}")
    ncomp = 1 + max(int(r[n_axes]) for r in body)
    values = np.array([float(r[-1]) for r in body])
    return Field(grid, values.reshape(grid.shape + (ncomp,)))
