import numpy as np
import pytest

from dualvar import AscentAborted, AscentConfig, ContractError, SpaceTimeGrid, ascend, solve
from dualvar.problems import ConservationLawProblem, HeatProblem
from dualvar.verify import compare_fields, heat_exact_oracle


def concave_quadratic(n=6, seed=0):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(n, n))
    A = Q @ Q.T + n * np.eye(n)
    b = rng.normal(size=n)
    return A, b, lambda x: (-0.5 * x @ A @ x + b @ x, b - A @ x)


@pytest.mark.parametrize("method", ["steepest", "cg"])
def test_concave_quadratic_reaches_maximiser(method):
    A, b, fun = concave_quadratic()
    rep = ascend(fun, np.zeros(6), AscentConfig(method=method, max_iter=500, grad_tol=1e-7))
    assert rep.converged
    np.testing.assert_allclose(rep.x, np.linalg.solve(A, b), atol=1e-7)


def test_stall_below_objective_roundoff_is_reported():
    # increments ~ |g|^2 / lambda drop below eps |S| once |g| ~ 1e-8
    _, _, fun = concave_quadratic()
    rep = ascend(fun, np.zeros(6), AscentConfig(max_iter=500, grad_tol=1e-13))
    assert not rep.converged and rep.message == "line search stalled"
    assert rep.grad_norm_trace[-1] < 1e-6


def test_distance_objective_is_solved_in_one_step():
    target = np.linspace(-1, 1, 9)
    rep = ascend(lambda f: (-0.5 * np.sum((f - target) ** 2), target - f), np.zeros(9),
                 AscentConfig(method="cg", grad_tol=1e-12))
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(rep.x, target, atol=1e-14)


def test_cg_is_exact_on_quadratics_in_n_steps():
    _, _, fun = concave_quadratic(8, seed=3)
    rep = ascend(fun, np.zeros(8), AscentConfig(method="cg", max_iter=200, grad_tol=1e-9))
    assert rep.converged and rep.iterations <= 12


def test_objective_never_decreases():
    _, _, fun = concave_quadratic(10, seed=1)
    rep = ascend(fun, np.ones(10), AscentConfig(max_iter=50))
    assert np.all(np.diff(rep.objective_trace) > 0)
    assert len(rep.objective_trace) == len(rep.grad_norm_trace) == rep.iterations + 1


def test_projection_keeps_constrained_entries_zero():
    _, _, fun = concave_quadratic()

    def project(x):
        x = np.array(x)
        x[:2] = 0.0
        return x

    def fun_p(x):
        S, g = fun(x)
        return S, project(g)

    rep = ascend(fun_p, np.ones(6), AscentConfig(max_iter=300), project=project)
    assert np.all(rep.x[:2] == 0.0) and rep.converged


def test_budget_exhaustion_is_reported():
    _, _, fun = concave_quadratic()
    rep = ascend(fun, np.zeros(6), AscentConfig(max_iter=2, grad_tol=1e-14))
    assert not rep.converged and "budget" in rep.message and rep.iterations == 2


def test_callback_sees_every_accepted_step():
    _, _, fun = concave_quadratic()
    seen = []
    rep = ascend(fun, np.zeros(6), AscentConfig(max_iter=5, grad_tol=1e-14),
                 callback=lambda it, x: seen.append(it))
    assert seen == list(range(1, rep.iterations + 1))


def test_bad_config_values():
    with pytest.raises(ContractError):
        AscentConfig(method="newton")
    with pytest.raises(ContractError):
        AscentConfig(backtrack_factor=1.0)
    with pytest.raises(ContractError):
        AscentConfig(step0=0.0)


def test_burgers_below_margin_aborts_naming_node():
    g = SpaceTimeGrid(16, 8, t_max=0.2, periodic=True)
    prob = ConservationLawProblem.burgers(g, lambda x: 0.5 + 0.25 * np.sin(2 * np.pi * x),
                                          c=0.3, margin=0.5)
    with pytest.raises(AscentAborted, match="grid node"):
        solve(prob)


def test_heat_cg_converges_and_matches_exact_mode():
    g = SpaceTimeGrid(32, 32, t_max=0.1)
    prob = HeatProblem(g, 0.1, lambda x: np.sin(np.pi * x))
    rep = solve(prob, AscentConfig(method="cg", max_iter=2000, grad_tol=1e-8))
    assert rep.converged and rep.grad_norm_trace[-1] <= 1e-8
    assert np.all(np.diff(rep.objective_trace) >= 0)
    theta = prob.recover_primal(rep.final_fields["lam"])
    assert compare_fields(theta, heat_exact_oracle(0.1, 1, g)).l2_rel <= 2e-2
    assert np.all(prob.unpack(rep.x)["lam"].values[g.boundary_mask()] == 0.0)
