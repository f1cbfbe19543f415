import numpy as np
import pytest

from dualvar import ContractError, Field, SpaceTimeGrid
from dualvar.verify import (EPS_FLOOR, burgers_characteristics_oracle, classical_fd_oracle,
                            compare_fields, heat_exact_oracle, shock_time)


def wave(x):
    return 0.5 + 0.25 * np.sin(2 * np.pi * x)


def wave_prime(x):
    return 0.5 * np.pi * np.cos(2 * np.pi * x)


# -- heat -------------------------------------------------------------------------

def test_heat_exact_initial_row_and_decay():
    g = SpaceTimeGrid(33, 11, t_max=1.0)
    f = heat_exact_oracle(0.1, 1, g)
    np.testing.assert_allclose(f[0][0, 1:-1], np.sin(np.pi * g.x[1:-1]), atol=1e-15)
    assert f[0][-1, 16] == pytest.approx(np.exp(-0.1 * np.pi**2), rel=1e-12)
    assert f[0][-1, 16] == pytest.approx(0.372708, abs=1e-6)
    assert np.all(f[0][:, [0, -1]] == 0.0)


def test_heat_exact_refuses_other_domains():
    with pytest.raises(ContractError):
        heat_exact_oracle(0.1, 1, SpaceTimeGrid(8, 8, x_max=2.0))
    with pytest.raises(ContractError):
        heat_exact_oracle(0.1, 1, SpaceTimeGrid(8, 8, periodic=True))


def test_classical_heat_agrees_with_exact_mode():
    g = SpaceTimeGrid(64, 64, t_max=0.1)
    fd = classical_fd_oracle("heat", g, lambda x: np.sin(np.pi * x), k=0.1)
    assert compare_fields(fd, heat_exact_oracle(0.1, 1, g)).l2_rel <= 1e-3


def test_classical_oracle_keeps_zero_data_zero():
    g = SpaceTimeGrid(16, 8, t_max=0.1, periodic=True)
    for kind, kw in (("heat", {"k": 0.1}), ("viscous-hj", {"nu_hat": 0.05})):
        assert np.all(classical_fd_oracle(kind, g, np.zeros(16), **kw).values == 0.0)


def test_classical_oracle_argument_errors():
    g = SpaceTimeGrid(8, 8)
    with pytest.raises(ContractError):
        classical_fd_oracle("wave", g, np.zeros(8), k=1.0)
    with pytest.raises(ContractError):
        classical_fd_oracle("heat", g, np.zeros(8))
    with pytest.raises(ContractError):
        classical_fd_oracle("viscous-hj", g, np.zeros(8), nu_hat=0.0)


def test_viscous_hj_self_convergence_is_second_order():
    def final(n):
        g = SpaceTimeGrid(n, 5, t_max=0.1, periodic=True)
        return classical_fd_oracle("viscous-hj", g, lambda x: np.cos(2 * np.pi * x),
                                   nu_hat=0.05)[0][-1]

    ref = final(256)
    errs = [np.max(np.abs(final(n) - ref[:: 256 // n])) for n in (32, 64, 128)]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 1.5)


# -- Burgers characteristics --------------------------------------------------------------

def test_shock_time_of_wave():
    assert shock_time(wave, u0_prime=wave_prime) == pytest.approx(2 / np.pi, rel=1e-9)
    assert shock_time(wave) == pytest.approx(2 / np.pi, rel=1e-6)
    assert shock_time(lambda x: 0 * x + 1.0) == np.inf


def test_constant_state_is_transported_unchanged():
    g = SpaceTimeGrid(16, 8, t_max=1.0, periodic=True)
    u = burgers_characteristics_oracle(lambda x: 0 * x + 0.3, g)
    np.testing.assert_allclose(u.values, 0.3, atol=1e-13)


def test_refuses_near_shock_time():
    ok = SpaceTimeGrid(16, 8, t_max=0.55, periodic=True)
    burgers_characteristics_oracle(wave, ok, u0_prime=wave_prime)
    with pytest.raises(ContractError, match="t\\*=0.63"):
        burgers_characteristics_oracle(wave, SpaceTimeGrid(16, 8, t_max=0.56, periodic=True),
                                       u0_prime=wave_prime)


@pytest.mark.parametrize("prime", [wave_prime, None])
def test_characteristics_solve_the_implicit_relation(prime):
    g = SpaceTimeGrid(64, 16, t_max=0.2, periodic=True)
    u = burgers_characteristics_oracle(wave, g, u0_prime=prime)
    T, X = g.mesh()
    assert np.max(np.abs(u[0] - wave(X - u[0] * T))) <= 1e-12
    np.testing.assert_array_equal(u[0][0], wave(g.x))


# -- error norms ---------------------------------------------------------------------------

def test_compare_identical_fields():
    g = SpaceTimeGrid(8, 8)
    f = Field.from_function(g, lambda t, x: np.sin(x + t))
    rep = compare_fields(f, f.copy())
    assert rep.l2_rel == 0.0 and rep.linf == 0.0


def test_compare_against_zero_uses_floor():
    g = SpaceTimeGrid(8, 8)
    a = Field.from_function(g, lambda t, x: 1e-200 + 0 * x)
    rep = compare_fields(a, Field.zeros(g))
    assert rep.l2_rel == pytest.approx(np.linalg.norm(np.full(36, 1e-200)) / EPS_FLOOR)


def test_compare_noise_scale():
    g = SpaceTimeGrid(32, 32)
    rng = np.random.default_rng(0)
    b = Field.from_function(g, lambda t, x: 1 + 0 * x)
    a = Field(g, b.values + 1e-3 * rng.standard_normal(b.values.shape))
    rep = compare_fields(a, b, mask="all")
    assert rep.l2_rel == pytest.approx(1e-3, rel=0.05)
    assert rep.linf < 5e-3
    np.testing.assert_allclose(rep.field_diff.values, a.values - b.values)


def test_compare_mismatch_raises():
    with pytest.raises(ContractError):
        compare_fields(Field.zeros(SpaceTimeGrid(8, 8)), Field.zeros(SpaceTimeGrid(9, 8)))
    with pytest.raises(ContractError):
        g = SpaceTimeGrid(8, 8)
        compare_fields(Field.zeros(g, 2), Field.zeros(g))
    with pytest.raises(ContractError):
        g = SpaceTimeGrid(8, 8)
        compare_fields(Field.zeros(g), Field.zeros(g), mask="edges")
