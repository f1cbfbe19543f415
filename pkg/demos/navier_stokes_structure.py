"""Nodewise structure of the Navier-Stokes dual and mixed functionals.

No stationary point is computed here. Instead we look at a random small
multiplier and confirm the algebra the gradients rely on: ``L K = I``,
``L v = p``, and that the gradient in ``gamma`` (resp. ``omega``) is the
weighted discrete divergence of ``v`` (resp. ``lam``). Then we build a
multiplier for which ``L`` loses rank and watch it get refused.
"""

import numpy as np

from dualvar import SingularL, SpaceTimeGrid
from dualvar.cli import structural_checks
from dualvar.problems import NSDualProblem, NSMixedProblem


def shear(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y), 0 * x


grid = SpaceTimeGrid(nx=10, ny=10, nt=10, t_max=0.1)
rng = np.random.default_rng(7)
for problem in (NSDualProblem(grid, 0.1, c=4.0, v0=shear),
                NSMixedProblem(grid, 0.1, c=4.0, v0=shear)):
    print(type(problem).__name__, "fields", problem.names)
    for name, value, threshold in structural_checks(problem, problem.random_state(rng, 0.02)):
        print(f"  {name:28s} {value:.1e}  (threshold {threshold:g})")

small = NSDualProblem(grid, 0.1, c=0.1)
X = grid.mesh()[1]
try:
    small.assemble_LK(np.stack([-0.05 * X, 0 * X], axis=-1))
except SingularL as exc:
    print(f"\nlam = (-0.05 x, 0) with c = 0.1: {len(exc.nodes)} singular nodes")
    print(" ", str(exc).split(";")[0])
