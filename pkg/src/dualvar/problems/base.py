"""Shared plumbing for the dual problems: field layout, constraints, warm starts."""

import numpy as np

from ..errors import ContractError, SingularHessian
from ..grid import Field
from ..legendre import conjugate


def initial_values(grid, data, components=1):
    """Sample initial data on the spatial nodes.

    ``data`` is ``None`` (zero), a callable of the spatial coordinates, or
    an array of shape ``grid.shape[1:]`` (+ ``(components,)``).
    """
    shape = grid.shape[1:] + (components,)
    if data is None:
        return np.zeros(shape)
    if callable(data):
        coords = np.meshgrid(*grid.axes()[1:], indexing="ij")
        out = data(*coords)
        if components == 1 and not isinstance(out, (tuple, list)):
            out = (out,)
        vals = np.stack([np.broadcast_to(np.asarray(o, dtype=float), grid.shape[1:])
                         for o in out], axis=-1)
    else:
        vals = np.asarray(data, dtype=float)
    try:
        return vals.reshape(shape).copy()
    except ValueError:
        raise ContractError(f"initial data of shape {vals.shape} does not fit {shape}") from None


class DualProblem:
    """Base class: a list of named dual fields sharing one grid.

    Subclasses set ``layout`` (``[(name, components), ...]``) and implement
    ``_evaluate(arrays) -> (S, grads)`` on raw arrays of shape
    ``grid.shape + (components,)``. Every dual field is held at zero on the
    nodes of :meth:`SpaceTimeGrid.boundary_mask` (non-periodic spatial
    edges and the final time level).
    """

    layout = ()

    def __init__(self, grid, margin=0.0):
        self.grid = grid
        self.margin = margin
        self._guess = {}
        self._mask = grid.boundary_mask()

    # -- packing ---------------------------------------------------------------

    @property
    def names(self):
        return [name for name, _ in self.layout]

    def _arrays(self, fields):
        if len(fields) != len(self.layout):
            raise ContractError(f"expected fields {self.names}")
        out = {}
        for (name, ncomp), f in zip(self.layout, fields):
            vals = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)
            if vals.shape != self.grid.shape + (ncomp,):
                raise ContractError(
                    f"field {name} has shape {vals.shape}, expected "
                    f"{self.grid.shape + (ncomp,)}")
            vals = vals.copy()
            vals[self._mask] = 0.0
            out[name] = vals
        return out

    def pack(self, *fields):
        arrs = self._arrays(fields)
        return np.concatenate([arrs[n].ravel() for n in self.names])

    def unpack(self, x):
        out, start = {}, 0
        for name, ncomp in self.layout:
            size = self.grid.size * ncomp
            out[name] = Field(self.grid, x[start:start + size].reshape(self.grid.shape + (ncomp,)))
            start += size
        return out

    @property
    def n_dof(self):
        return self.grid.size * sum(c for _, c in self.layout)

    def constrained(self):
        """Flat boolean mask of the entries held at zero."""
        return np.concatenate([np.repeat(self._mask.ravel(), c) for _, c in self.layout])

    def free_indices(self):
        return np.flatnonzero(~self.constrained())

    def project(self, x):
        x = np.array(x, dtype=float)
        x[self.constrained()] = 0.0
        return x

    def zero_state(self):
        return np.zeros(self.n_dof)

    def random_state(self, rng, scale=1.0):
        """Random nodal values (projected); a test state, not a smooth one."""
        rng = np.random.default_rng(rng)
        return self.project(scale * rng.standard_normal(self.n_dof))

    # -- evaluation ------------------------------------------------------------

    def flat_objective(self, x):
        """``(S, g)`` on packed vectors, as consumed by :func:`dualvar.optimizer.ascend`."""
        fields = self.unpack(x)
        S, grads = self._evaluate(self._arrays([fields[n] for n in self.names]))
        g = np.concatenate([grads[n].ravel() for n in self.names])
        g[self.constrained()] = 0.0
        return S, g

    def evaluate(self, *fields):
        """Objective and gradient Fields for the given dual fields."""
        S, grads = self._evaluate(self._arrays(fields))
        out = []
        for name, _ in self.layout:
            g = grads[name].copy()
            g[self._mask] = 0.0
            out.append(Field(self.grid, g))
        return S, out

    def primal_residual(self, x):
        return np.nan

    # -- helpers ---------------------------------------------------------------

    def _conjugate(self, tag, spec, P, L=None):
        """Nodewise conjugate of ``spec`` with warm start from the previous call."""
        shape = P.shape[:-1]
        Pf = P.reshape(-1, P.shape[-1])
        Lf = None if L is None else L.reshape(-1, L.shape[-1])
        guess = self._guess.get(tag)
        if guess is not None and guess.shape != Pf.shape:
            guess = None
        try:
            conj = conjugate(Pf, Lf, spec, guess=guess)
        except SingularHessian as exc:
            node = None if exc.node is None else np.unravel_index(exc.node, shape)
            raise SingularHessian(f"{exc} at grid node {node}", U=exc.U, L=exc.L,
                                  node=node) from None
        if np.min(conj.eigmin) < self.margin:
            k = int(np.argmin(conj.eigmin))
            node = np.unravel_index(k, shape)
            raise SingularHessian(
                f"monotonicity margin violated at grid node {node}: smallest "
                f"eigenvalue of d2M/dU2 is {conj.eigmin[k]:.4g} < margin {self.margin}",
                U=conj.U[k], L=None if Lf is None else Lf[k], node=node)
        self._guess[tag] = conj.U.copy()
        return conj, shape


def rms(values, mask):
    """Root mean square of ``values`` over the nodes selected by ``mask``."""
    sel = values[mask]
    return float(np.sqrt(np.mean(np.square(sel)))) if sel.size else 0.0
