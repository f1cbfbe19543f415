import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from dualvar import (CouplingSpec, MSpec, PotentialSpec, check_legendre_identities, eval_M,
                     eval_Mstar, grad_Mstar, solve_U)
from dualvar.errors import ContractError, NotConverged, SingularHessian
from dualvar.legendre import (burgers_flux, conjugate, linear_flux, quadratic_potential,
                              quartic_potential, viscous_hj_flux)


def burgers_spec(c=2.0):
    return MSpec(quadratic_potential(1, c), burgers_flux())


HEAT = MSpec(quadratic_potential(1))
QUARTIC = MSpec(quartic_potential())


# -- eval_M ----------------------------------------------------------------------

def test_eval_M_reduces_to_H_without_parameter():
    assert eval_M([2.0], [0.0], burgers_spec(1.0)) == pytest.approx(2.0)


def test_eval_M_subtracts_coupling():
    assert eval_M([2.0], [1.0], burgers_spec(1.0)) == pytest.approx(0.0, abs=1e-15)


def test_eval_M_with_scaled_H():
    assert eval_M([1.0], [1.0], burgers_spec(4.0)) == pytest.approx(1.5)


def test_eval_M_rejects_bad_dimensions():
    with pytest.raises(ContractError):
        eval_M([1.0, 2.0], [1.0], burgers_spec())
    with pytest.raises(ContractError):
        eval_M([1.0], [1.0, 2.0], burgers_spec())


# -- solve_U ---------------------------------------------------------------------

def test_solve_U_identity_map():
    res = solve_U([3.0], [], HEAT)
    assert res.converged and res.U[0] == pytest.approx(3.0)


def test_solve_U_burgers_closed_form():
    # (c - g) u = p with c=2, g=1, p=3
    res = solve_U([3.0], [1.0], burgers_spec(2.0))
    assert res.U[0] == pytest.approx(3.0, abs=1e-12)


def test_solve_U_quartic_root():
    # theta + theta^3 = 2 has the root 1
    assert solve_U([2.0], [], QUARTIC).U[0] == pytest.approx(1.0, abs=1e-12)


def test_solve_U_quadratic_one_newton_step_from_any_guess():
    spec = MSpec(quadratic_potential(3, 2.5))
    rng = np.random.default_rng(0)
    for _ in range(10):
        P = rng.normal(size=3)
        res = solve_U(P, [], spec, guess=rng.normal(size=3) * 10)
        assert res.iterations <= 1
        np.testing.assert_allclose(res.U, P / 2.5, rtol=0, atol=1e-13)


def test_solve_U_singular_hessian_carries_point():
    with pytest.raises(SingularHessian) as info:
        solve_U([1.0], [2.0], burgers_spec(2.0))
    assert info.value.L is not None and info.value.L[0] == pytest.approx(2.0)


def test_solve_U_not_converged_keeps_best_iterate():
    with pytest.raises(NotConverged) as info:
        solve_U([50.0], [], QUARTIC, guess=[0.0], max_iter=2)
    assert info.value.best is not None
    res = solve_U([50.0], [], QUARTIC, guess=[0.0], max_iter=2, raise_on_failure=False)
    assert not res.converged and res.residual_norm > 0


def test_newton_converges_quadratically_for_burgers():
    spec = burgers_spec(2.0)
    # c - g = 0.5; a nonlinear H makes the convergence visible
    spec = MSpec(PotentialSpec(1, lambda U: U[..., 0] ** 2 + np.cosh(U[..., 0]),
                               lambda U: 2 * U + np.sinh(U),
                               lambda U: (2 + np.cosh(U[..., 0]))[..., None, None]),
                 burgers_flux())
    P, L = np.array([3.0]), np.array([1.5])
    res_norms = [solve_U(P, L, spec, guess=[0.0], max_iter=k, raise_on_failure=False)
                 .residual_norm for k in range(1, 6)]
    r = [x for x in res_norms if x > 1e-13]
    assert len(r) >= 3
    ratios = [r[i + 1] / r[i] ** 2 for i in range(len(r) - 1)]
    assert max(ratios[1:]) < 10.0


# -- conjugate values and derivatives -----------------------------------------------

def test_eval_Mstar_heat():
    assert eval_Mstar([2.0], [], HEAT) == pytest.approx(2.0)


def test_eval_Mstar_burgers_closed_form():
    assert eval_Mstar([2.0], [1.0], burgers_spec(2.0)) == pytest.approx(2.0)


def test_eval_Mstar_at_origin_vanishes():
    assert eval_Mstar([0.0], [0.7], burgers_spec(2.0)) == 0.0


def test_grad_Mstar_heat():
    dP, dL = grad_Mstar([1.7], [], HEAT)
    assert dP[0] == pytest.approx(1.7) and dL.size == 0


def test_grad_Mstar_burgers():
    dP, dL = grad_Mstar([3.0], [1.0], burgers_spec(2.0))
    assert dP[0] == pytest.approx(3.0) and dL[0] == pytest.approx(4.5)


def test_grad_Mstar_origin():
    dP, dL = grad_Mstar([0.0], [0.3], burgers_spec(2.0))
    assert dP[0] == 0.0 and dL[0] == 0.0


def test_linear_flux_recovery():
    # u - a g = p with a=3, g=2, p=1
    spec = MSpec(quadratic_potential(1), linear_flux(3.0))
    assert solve_U([1.0], [2.0], spec).U[0] == pytest.approx(7.0)


def test_hj_flux_closed_form():
    nu = 0.05
    spec = MSpec(quadratic_potential(3), viscous_hj_flux(nu))
    P, lam = np.array([0.3, -0.2, 0.7]), 0.4
    U = solve_U(P, [lam], spec).U
    np.testing.assert_allclose(U, [0.3, -0.2 / (1 + lam), 0.7 + lam * nu], rtol=1e-13)


def test_batch_conjugate_matches_pointwise():
    spec = burgers_spec(2.0)
    rng = np.random.default_rng(2)
    P = rng.uniform(-1, 1, (50, 1))
    L = rng.uniform(-1, 1, (50, 1))
    conj = conjugate(P, L, spec)
    np.testing.assert_allclose(conj.value, P[:, 0] ** 2 / (2 * (2 - L[:, 0])), rtol=1e-13)
    np.testing.assert_allclose(conj.dP, P / (2 - L), rtol=1e-13)
    np.testing.assert_allclose(conj.eigmin, 2 - L[:, 0], rtol=1e-13)


# -- identity report ---------------------------------------------------------------

def test_check_identities_heat():
    rep = check_legendre_identities(HEAT, [1.3], [], h=1e-5)
    assert rep.dP_rel_error <= 1e-8 and rep.eigmin == pytest.approx(1.0) and rep.passed


def test_check_identities_degrades_near_singular_parameter():
    near = check_legendre_identities(burgers_spec(2.0), [0.1], [1.999])
    assert near.eigmin == pytest.approx(0.001)
    at = check_legendre_identities(burgers_spec(2.0), [0.1], [2.0])
    assert at.singular and not at.passed and "singular" in at.message


def test_check_identities_plain_quadratic_pair():
    spec = MSpec(quadratic_potential(2, 3.0))
    assert check_legendre_identities(spec, [0.4, -1.1], []).passed


def test_envelope_error_decays_second_order_in_h():
    errs = [check_legendre_identities(QUARTIC, [1.7], [], h=h).dP_rel_error
            for h in (1e-2, 5e-3)]
    assert errs[1] < errs[0] / 3.0


# -- spec self-checks ------------------------------------------------------------------

def test_potential_spec_rejects_wrong_gradient():
    with pytest.raises(ContractError):
        PotentialSpec(1, lambda U: 0.5 * U[..., 0] ** 2, lambda U: 2 * U,
                      lambda U: np.ones(np.shape(U) + (1,)))


def test_coupling_spec_rejects_wrong_jacobian():
    with pytest.raises(ContractError):
        CouplingSpec(1, 1, lambda U: U ** 2, lambda U: U[..., None],
                     lambda U: np.zeros(np.shape(U)[:-1] + (1, 1, 1)))


# -- properties ---------------------------------------------------------------------------

finite = st.floats(-3.0, 3.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(p=finite, g=st.floats(-1.0, 1.0))
def test_fenchel_equality_at_solve_point(p, g):
    spec = burgers_spec(2.0)
    U = solve_U([p], [g], spec).U
    Mstar = eval_Mstar([p], [g], spec)
    assert abs(Mstar + eval_M(U, [g], spec) - p * U[0]) <= 1e-10 * max(1.0, abs(Mstar))


@settings(max_examples=40, deadline=None)
@given(p=finite)
def test_quartic_conjugate_matches_independent_maximisation(p):
    # sup_u (p u - u^2/2 - u^4/4) by bounded scalar minimisation
    res = minimize_scalar(lambda u: -(p * u - 0.5 * u**2 - 0.25 * u**4),
                          bounds=(-5, 5), method="bounded",
                          options={"xatol": 1e-12})
    assert eval_Mstar([p], [], QUARTIC) == pytest.approx(-res.fun, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(p=finite, g=st.floats(-1.0, 1.0))
def test_conjugate_is_convex_in_P(p, g):
    spec = burgers_spec(2.0)
    h = 1e-2
    vals = [eval_Mstar([p + s], [g], spec) for s in (-h, 0.0, h)]
    assert vals[0] + vals[2] - 2 * vals[1] >= -1e-12
