"""Why fake-time ascent does not settle for the viscous Hamilton-Jacobi dual.

For ``u_t = -u_x^2/2 + nu u_xx`` the unknowns are ``U = (u, B, C)`` with
coupling ``f = -B^2/2 + nu C``. With ``H = s |U|^2 / 2`` the Hessian of
``M = H - lam f`` is ``diag(s, s + lam, s)``, so the conjugate exists only
while ``lam > -s``. The gradient is exact (checked below), yet the ascent
drives ``min lam`` toward ``-s``: the supremum of the dual sits on the edge
of its domain rather than at an interior stationary point.
"""

import numpy as np

from dualvar import AscentConfig, SpaceTimeGrid, fd_gradient_check, solve
from dualvar.legendre import quadratic_potential
from dualvar.problems import HJProblem

grid = SpaceTimeGrid(nx=16, nt=16, t_max=0.1, periodic=True)

for s in (1.0, 3.0):
    problem = HJProblem.viscous(grid, 0.05, lambda x: 0.2 * np.cos(2 * np.pi * x),
                                H=quadratic_potential(3, s))
    x = problem.random_state(0, 0.05)
    err = fd_gradient_check(lambda v: problem.flat_objective(v)[0],
                            lambda v: problem.flat_objective(v)[1], x, n_probe=30, h=1e-5,
                            rng=1, candidates=problem.free_indices())
    report = solve(problem, AscentConfig(method="cg", max_iter=400, grad_tol=1e-8))
    lam = report.final_fields["lam"][0]
    print(f"s = {s}: gradient check {err:.1e}; after {report.iterations} iterations "
          f"({report.message}) min lam = {lam.min():+.4f}, grad norm "
          f"{report.grad_norm_trace[-1]:.1e}")

problem = HJProblem.viscous(grid, 0.05, None)
report = solve(problem, AscentConfig(method="cg", max_iter=50))
print(f"zero data: objective {abs(report.objective_trace[-1]):.1e}, converged {report.converged}")
