import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gramian_rk.adi import adi_initial_state, adi_real_double_step, adi_step, solve_adi
from gramian_rk.errors import ImproperShiftSet, NonPositiveRealPart, RealShiftNotPairable
from gramian_rk.lyapunov import SolverConfig, initial_state, step_one_stage

from conftest import random_cplus, random_stable, rel

SQ2 = np.sqrt(2.0)


def test_scalar_hand_values():
    a = adi_step(np.array([[-1.0]]), adi_initial_state([SQ2]), -1.0)
    assert abs(a.W[0, 0]) <= 1e-15
    assert abs(a.Z[0, 0] + 1.0) <= 1e-15
    assert abs(a.gramian()[0, 0] - 1.0) <= 1e-15


def test_real_alpha_real_output(rng):
    A = random_stable(rng, 6)
    a = adi_step(A, adi_initial_state(rng.standard_normal(6)), -0.8)
    assert np.isrealobj(a.W) and np.isrealobj(a.Z)


def test_rejects_right_half_plane():
    with pytest.raises(NonPositiveRealPart):
        adi_step(-np.eye(2), adi_initial_state(np.ones(2)), 0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_equivalence_every_prefix(seed):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, 10)
    b = rng.standard_normal(10)
    s, a = initial_state(b), adi_initial_state(b)
    for mu in random_cplus(rng, 6, 0.4):
        s = step_one_stage(A, s, mu)
        a = adi_step(A, a, -1.0 / mu)
        assert rel(a.gramian(), s.gramian()) <= 1e-10


def test_double_step_matches_two_steps(rng):
    A = random_stable(rng, 8)
    b = rng.standard_normal(8)
    al = -1 + 1j
    c = adi_step(A, adi_step(A, adi_initial_state(b), al), np.conj(al))
    r = adi_real_double_step(A, adi_initial_state(b), al)
    assert np.isrealobj(r.Z) and np.isrealobj(r.W)
    assert r.Z.shape[1] == 2
    assert rel(r.Z @ r.Z.T, c.gramian()) <= 1e-12
    assert np.linalg.norm(r.W - c.W) <= 1e-12 * np.linalg.norm(b)


def test_double_step_factor_identity():
    al = -1 + 1j
    d = al.real / al.imag
    J = np.array([[1, 1], [1j, 2 * d - 1j]])
    L = np.sqrt(2.0) * np.array([[1.0, 0.0], [d, np.sqrt(d * d + 1)]])
    np.testing.assert_allclose(J @ J.conj().T, [[2, -2], [-2, 6]], atol=1e-14)
    np.testing.assert_allclose(L @ L.T, [[2, -2], [-2, 6]], atol=1e-14)


def test_double_step_block_rhs(rng):
    A = random_stable(rng, 7)
    B = rng.standard_normal((7, 2))
    r = adi_real_double_step(A, adi_initial_state(B), -0.5 + 2j)
    assert r.Z.shape[1] == 4
    c = adi_step(A, adi_step(A, adi_initial_state(B), -0.5 + 2j), -0.5 - 2j)
    assert rel(r.Z @ r.Z.T, c.gramian()) <= 1e-12


def test_double_step_rejects_real():
    with pytest.raises(RealShiftNotPairable):
        adi_real_double_step(-np.eye(2), adi_initial_state(np.ones(2)), -1.0)


def test_driver_realify(rng):
    A = random_stable(rng, 10)
    b = rng.standard_normal(10)
    alphas = [-1 + 1j, -1 - 1j, -0.5, -2 + 3j, -2 - 3j]
    r = solve_adi(A, b, alphas, SolverConfig(realify=True, tol=1e-300, max_steps=3))
    c = solve_adi(A, b, alphas, SolverConfig(tol=1e-300, max_steps=5))
    assert np.isrealobj(r.Z)
    assert rel(r.Z @ r.Z.T, c.gramian()) <= 1e-11
    with pytest.raises(ImproperShiftSet):
        solve_adi(A, b, [-1 + 1j, -0.5], SolverConfig(realify=True))


def test_driver_converges(rng):
    A = random_stable(rng, 10)
    alphas = list(np.linalg.eigvals(A))
    a = solve_adi(A, rng.standard_normal(10), alphas, SolverConfig(tol=1e-12, max_steps=100))
    assert a.converged
