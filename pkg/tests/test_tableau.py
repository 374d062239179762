import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gramian_rk.errors import (
    NonPositiveRealPart,
    RealShiftNotPairable,
    SingularStabilityDenominator,
    UnsupportedStageCount,
)
from gramian_rk.tableau import (
    ButcherTableau,
    backward_euler,
    check_residual_condition,
    check_residual_condition_sylvester,
    check_solvability,
    gauss_legendre,
    make_dirk_lyapunov,
    make_dirk_sylvester,
    make_one_stage,
    merge_one_stage_steps,
    rational_factor,
    real_pair_transform,
    rotation_tableau_matrix,
    satisfies_residual_condition,
    stability_function,
)

SQ2 = np.sqrt(2.0)

cplus = st.builds(
    complex,
    st.floats(0.05, 5.0),
    st.floats(-5.0, 5.0),
)
cplus_nonreal = st.builds(
    complex,
    st.floats(0.05, 5.0),
    st.one_of(st.floats(-5.0, -0.05), st.floats(0.05, 5.0)),
)


class TestConstruction:
    def test_one_stage_midpoint(self):
        t = make_one_stage(0.5)
        assert t.s == 1
        assert t.lam[0, 0] == 0.5
        assert t.beta[0] == 1.0
        assert t.gamma[0] == 0.0

    @pytest.mark.parametrize("mu, beta", [(1 + 1j, 2.0), (1.0, 2.0)])
    def test_one_stage_values(self, mu, beta):
        t = make_one_stage(mu)
        assert t.lam[0, 0] == mu
        assert t.beta[0] == beta

    def test_dirk_real_pattern(self):
        t = make_dirk_lyapunov([1, 0.5])
        np.testing.assert_array_equal(t.lam, [[1, 0], [2, 0.5]])
        np.testing.assert_array_equal(t.beta, [2, 1])

    def test_dirk_conjugate_pattern(self):
        t = make_dirk_lyapunov([1 + 1j, 1 - 1j])
        np.testing.assert_array_equal(t.lam, [[1 + 1j, 0], [2, 1 - 1j]])
        np.testing.assert_array_equal(t.beta, [2, 2])

    def test_dirk_rejects_left_half_plane(self):
        with pytest.raises(NonPositiveRealPart):
            make_dirk_lyapunov([1.0, -0.5 + 1j])
        with pytest.raises(NonPositiveRealPart):
            merge_one_stage_steps([0.0])

    def test_gauss_legendre(self):
        np.testing.assert_array_equal(gauss_legendre(1).lam, [[0.5]])
        np.testing.assert_array_equal(gauss_legendre(1).beta, [1.0])
        r = np.sqrt(3) / 6
        t = gauss_legendre(2)
        np.testing.assert_allclose(t.lam, [[0.25, 0.25 - r], [0.25 + r, 0.25]], rtol=0, atol=1e-16)
        np.testing.assert_array_equal(t.beta, [0.5, 0.5])
        with pytest.raises(UnsupportedStageCount):
            gauss_legendre(3)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ButcherTableau([[1, 0]], [1])
        with pytest.raises(ValueError):
            ButcherTableau([[1]], [1, 2])

    def test_immutable(self):
        t = make_one_stage(1.0)
        with pytest.raises(ValueError):
            t.lam[0, 0] = 2.0

    def test_text_round_trip(self):
        t = make_dirk_lyapunov([1 + 2j, 0.3, 0.7 - 0.1j])
        u = ButcherTableau.from_text(t.to_text())
        np.testing.assert_array_equal(u.lam, t.lam)
        np.testing.assert_array_equal(u.beta, t.beta)
        np.testing.assert_array_equal(u.gamma, t.gamma)

    def test_text_without_gamma(self):
        u = ButcherTableau.from_text("1\n0.5+0i\n1\n")
        assert u.lam[0, 0] == 0.5 and u.gamma[0] == 0.0


class TestResidualCondition:
    def test_one_stage_defect_zero(self):
        d = check_residual_condition(make_one_stage(1 + 1j))
        np.testing.assert_array_equal(d.defect, [[0]])

    def test_backward_euler_defect_one(self):
        d = check_residual_condition(backward_euler())
        np.testing.assert_array_equal(d.defect, [[1]])
        assert not satisfies_residual_condition(backward_euler())

    def test_gauss_legendre_2(self):
        assert check_residual_condition(gauss_legendre(2)).frobenius_norm <= 1e-15

    def test_sylvester_scalar(self):
        d = check_residual_condition_sylvester([[0.5]], [[1.0]], [1.5])
        assert abs(d.defect[0, 0]) == 0.0
        d = check_residual_condition_sylvester([[1.0]], [[1.0]], [1.0])
        assert d.defect[0, 0] == 1.0

    @given(st.lists(cplus, min_size=1, max_size=4), st.lists(cplus, min_size=4, max_size=4))
    def test_dirk_sylvester_conforms(self, mh, mb):
        lam_hat, lam_breve, beta = make_dirk_sylvester(mh, mb[: len(mh)])
        assert check_residual_condition_sylvester(lam_hat, lam_breve, beta).frobenius_norm <= 1e-13 * (
            1 + np.linalg.norm(beta) ** 2
        )

    @given(st.lists(cplus.filter(lambda z: z.real > 0.05), min_size=1, max_size=6))
    def test_dirk_conforms(self, mus):
        t = make_dirk_lyapunov(mus)
        assert check_residual_condition(t).frobenius_norm <= 1e-13 * (1 + np.linalg.norm(t.beta) ** 2)

    @given(st.lists(cplus, min_size=1, max_size=5))
    def test_diagonal_identity(self, mus):
        t = make_dirk_lyapunov(mus)
        np.testing.assert_allclose(t.beta, 2 * np.diag(t.lam).real, rtol=1e-15)

    @given(cplus, st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    def test_defect_hermitian_for_real_beta(self, mu, b1, b2):
        t = ButcherTableau([[mu, 0.3], [1.2j, mu.conjugate()]], [b1, b2])
        D = check_residual_condition(t).defect
        np.testing.assert_allclose(D, D.conj().T, atol=1e-14)


class TestStabilityFunction:
    def test_midpoint_values(self):
        t = gauss_legendre(1)
        assert stability_function(t, 0) == 1
        assert abs(stability_function(t, -2)) == 0

    def test_complex_one_stage(self):
        assert abs(stability_function(make_one_stage(1 + 1j), -1) - (1 + 2j) / 5) <= 1e-15

    def test_singular_denominator(self):
        with pytest.raises(SingularStabilityDenominator):
            stability_function(make_one_stage(0.5), 2.0)

    @settings(max_examples=30)
    @given(st.lists(cplus, min_size=1, max_size=4), st.integers(0, 2**31))
    def test_product_form(self, mus, seed):
        rng = np.random.default_rng(seed)
        t = make_dirk_lyapunov(mus)
        z = rng.standard_normal(20) - 2 + 1j * rng.standard_normal(20)
        for zk in z:
            direct = stability_function(t, zk)
            prod = rational_factor(mus, zk)
            assert abs(direct - prod) <= 1e-12 * max(1.0, abs(prod))

    def test_gauss_legendre_product_form(self):
        t = gauss_legendre(2)
        mus = np.linalg.eigvals(t.lam)
        for z in [-1.0, -3 + 2j, 0.5j]:
            assert abs(stability_function(t, z) - rational_factor(mus, z)) <= 1e-12


class TestMerging:
    def test_single_is_one_stage(self):
        a, b = merge_one_stage_steps([0.7 + 0.2j]), make_one_stage(0.7 + 0.2j)
        np.testing.assert_array_equal(a.lam, b.lam)
        np.testing.assert_array_equal(a.beta, b.beta)

    def test_pattern(self):
        t = merge_one_stage_steps([1, 0.5])
        np.testing.assert_array_equal(t.lam, [[1, 0], [2, 0.5]])
        np.testing.assert_array_equal(t.beta, [2, 1])

    @given(st.lists(cplus, min_size=1, max_size=6))
    def test_spectrum_is_input(self, mus):
        t = merge_one_stage_steps(mus)
        np.testing.assert_array_equal(np.sort_complex(t.spectrum), np.sort_complex(np.array(mus, dtype=complex)))


class TestRealPair:
    def test_values_at_one_plus_i(self):
        tr = real_pair_transform(1 + 1j)
        np.testing.assert_allclose(tr.lambda_breve, [[1, 1 + SQ2], [1 - SQ2, 1]], rtol=1e-15)
        np.testing.assert_array_equal(tr.beta_breve, [2, 2])
        ev = np.sort_complex(np.linalg.eigvals(tr.lambda_breve))
        np.testing.assert_allclose(ev, [1 - 1j, 1 + 1j], atol=1e-14)
        assert check_residual_condition(tr.tableau()).frobenius_norm <= 1e-15

    def test_rejects_real_and_unstable(self):
        with pytest.raises(RealShiftNotPairable):
            real_pair_transform(2.0)
        with pytest.raises(NonPositiveRealPart):
            real_pair_transform(-1 + 1j)

    @given(cplus_nonreal)
    def test_invariants(self, mu):
        tr = real_pair_transform(mu)
        ev = np.sort_complex(np.linalg.eigvals(tr.lambda_breve))
        expect = np.sort_complex(np.array([mu, mu.conjugate()]))
        assert np.abs(ev - expect).max() <= 1e-12 * abs(mu) * 10
        assert check_residual_condition(tr.tableau()).frobenius_norm <= 1e-13 * abs(mu) ** 2 * 10
        Q = tr.q_factor
        np.testing.assert_allclose(Q @ Q.T, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(tr.s_factor, Q @ tr.l_factor.T, atol=1e-15)
        S = tr.s_factor
        hat = np.linalg.solve(S, tr.lambda_breve @ S)
        np.testing.assert_allclose(hat, rotation_tableau_matrix(mu), atol=1e-12 * max(1, abs(mu) ** 2))


class TestSolvability:
    def test_dirk_stable(self):
        assert check_solvability(make_dirk_lyapunov([1 + 1j, 0.2]))

    def test_violation(self):
        t = ButcherTableau([[-1.0]], [1.0])
        assert not check_solvability(t, 1.0, np.array([-1.0]))
        assert check_solvability(t, 1.0, np.array([-2.0]))

    def test_gauss_legendre_2_stable(self):
        assert check_solvability(gauss_legendre(2))

    def test_unknown_bound_rejected(self):
        with pytest.raises(ValueError):
            check_solvability(gauss_legendre(1), spectrum_bound="unstable")
