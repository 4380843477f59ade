import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gaussdyn.errors import NonFiniteInputError
from gaussdyn.model import (CovarianceMatrix, EnvironmentSpec, OscillatorSpec, blocks,
                           check_physical, gibbs_environment, local_symplectic,
                           preset_covariance, symmetric_environment, symplectic_spectrum,
                           validate_environment)

from sampling import (random_cp_environment, random_local_symplectic,
                      random_physical_covariance)

FIG1_EXAMPLE = symmetric_environment(0.2, 0.11, 0.0, 0.11, 0.0, 0.1, 0.0)


def coefficient_matrix_by_hand(lam, dxx, dpp, dxpy):
    # symmetric env with d_xpx = d_xy = d_pxpy = 0
    h = 0.5j * lam
    return np.array([[dxx, -h, 0, -dxpy],
                     [h, dpp, -dxpy, 0],
                     [0, -dxpy, dxx, -h],
                     [-dxpy, 0, h, dpp]])


class TestOscillatorSpec:
    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            OscillatorSpec(m=0.0)
        with pytest.raises(ValueError):
            OscillatorSpec(omega=-1.0)

    def test_rejects_nan(self):
        with pytest.raises(NonFiniteInputError):
            OscillatorSpec(m=math.nan)


class TestValidateEnvironment:
    def test_cauchy_schwarz_example(self):
        # 0.11 * 0.11 = 0.0121 >= 0.2^2/4 = 0.01, and 0.11^2 - 0.1^2 >= 0
        result = validate_environment(FIG1_EXAMPLE, 1e-12, complete_positivity=False)
        assert result.ok
        assert result.residuals["x_px"] == pytest.approx(0.0121 - 0.01, abs=1e-15)
        assert result.residuals["x_py"] == pytest.approx(0.0121 - 0.01, abs=1e-15)

    def test_same_example_is_not_completely_positive(self):
        eig = np.linalg.eigvalsh(coefficient_matrix_by_hand(0.2, 0.11, 0.11, 0.1))
        # eigenvalues 0.11 -+ sqrt(0.1^2 + 0.1^2)
        assert eig[0] == pytest.approx(0.11 - math.sqrt(0.02), abs=1e-14)
        result = validate_environment(FIG1_EXAMPLE, 1e-12)
        assert not result.ok
        assert [v.name for v in result.violations] == ["complete_positivity"]
        assert result.min_eigenvalue == pytest.approx(eig[0], abs=1e-14)

    def test_coefficient_matrix_layout(self):
        np.testing.assert_allclose(FIG1_EXAMPLE.coefficient_matrix(),
                                   coefficient_matrix_by_hand(0.2, 0.11, 0.11, 0.1))

    def test_dissipation_beats_diffusion(self):
        env = EnvironmentSpec(lam=0.5, d_xx=0.11, d_pxpx=0.11)
        result = validate_environment(env, complete_positivity=False)
        names = {v.name for v in result.violations}
        assert "x_px" in names
        x_px = next(v for v in result.violations if v.name == "x_px")
        assert x_px.residual == pytest.approx(0.0121 - 0.0625)

    def test_zero_diffusion(self):
        result = validate_environment(EnvironmentSpec(lam=0.2))
        names = {v.name for v in result.violations}
        assert {"x_px", "y_py"} <= names
        assert "x_px" in result.describe()

    def test_lambda_must_be_positive(self):
        env = symmetric_environment(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0)
        result = validate_environment(env)
        assert [v.name for v in result.violations] == ["lambda"]

    def test_non_finite_is_a_distinct_error(self):
        with pytest.raises(NonFiniteInputError):
            validate_environment(EnvironmentSpec(lam=0.2, d_xx=math.inf))

    def test_negative_tol_rejected(self):
        with pytest.raises(ValueError):
            validate_environment(FIG1_EXAMPLE, -1.0)

    def test_gibbs_below_threshold_rejected(self):
        env = gibbs_environment(OscillatorSpec(), 0.2, 0.09, 0.0, 0.0)
        result = validate_environment(env, complete_positivity=False)
        assert not result.ok
        assert result.residuals["x_px"] == pytest.approx(0.0081 - 0.01)

    def test_accepted_at_zero_tol_satisfy_minors_exactly(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            env = random_cp_environment(rng)
            result = validate_environment(env, 0.0)
            if result.ok:
                for name, r in result.residuals.items():
                    assert r >= 0, name

    def test_complete_positivity_implies_minors(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            result = validate_environment(random_cp_environment(rng))
            assert result.ok, result.describe()


class TestEnvironmentConstructors:
    def test_symmetric_copies_fields(self):
        env = symmetric_environment(0.2, 0.11, 0.0, 0.11, 0.0, 0.1, 0.0)
        assert (env.d_yy, env.d_ypy, env.d_pypy, env.d_ypx) == (0.11, 0.0, 0.11, 0.1)
        assert env.is_symmetric()

    def test_gibbs_unit_oscillator(self):
        env = gibbs_environment(OscillatorSpec(), 0.2, 0.11, 0.0, 0.1)
        assert env.d_pxpx == pytest.approx(0.11)
        assert env.d_pxpy == 0.0
        assert env.is_gibbs(OscillatorSpec())

    def test_gibbs_scales_by_m_omega_squared(self):
        osc = OscillatorSpec(m=2.0, omega=3.0)
        env = gibbs_environment(osc, 1.0, 0.5, 0.1, 0.0)
        assert env.d_pxpx == pytest.approx(18.0)
        assert env.d_pxpy == pytest.approx(3.6)
        assert (env.d_xpx, env.d_ypy, env.d_yy, env.d_pypy) == (0.0, 0.0, 0.5, env.d_pxpx)
        assert env.is_gibbs(osc)
        assert not env.is_gibbs(OscillatorSpec())


class TestCovarianceMatrix:
    def test_upper_triangle_round_trip(self):
        values = list(range(1, 11))
        sigma = CovarianceMatrix.from_upper(values)
        assert sigma.upper() == tuple(float(v) for v in values)
        np.testing.assert_array_equal(sigma.entries, sigma.entries.T)

    def test_from_upper_by_name(self):
        sigma = CovarianceMatrix.from_upper({"xx": 1.0, "pxpx": 0.5, "yy": 1.0, "pypy": 0.5,
                                             "xy": 0.5, "pxpy": -0.5})
        np.testing.assert_array_equal(sigma.entries, preset_covariance("entangled").entries)

    def test_rejects_asymmetric(self):
        a = np.eye(4)
        a[0, 1] = 0.3
        with pytest.raises(ValueError):
            CovarianceMatrix(a)

    def test_rejects_bad_shape_and_nan(self):
        with pytest.raises(ValueError):
            CovarianceMatrix(np.eye(3))
        bad = np.eye(4)
        bad[1, 1] = math.nan
        with pytest.raises(NonFiniteInputError):
            CovarianceMatrix(bad)

    def test_immutable(self):
        sigma = CovarianceMatrix.vacuum()
        with pytest.raises(ValueError):
            sigma.entries[0, 0] = 3.0


class TestBlocks:
    def test_vacuum(self):
        b = blocks(CovarianceMatrix.vacuum())
        np.testing.assert_array_equal(b.a, 0.5 * np.eye(2))
        np.testing.assert_array_equal(b.b, 0.5 * np.eye(2))
        np.testing.assert_array_equal(b.c, np.zeros((2, 2)))

    def test_entangled_preset(self):
        b = blocks(preset_covariance("entangled"))
        np.testing.assert_array_equal(b.a, np.diag([1.0, 0.5]))
        np.testing.assert_array_equal(b.b, np.diag([1.0, 0.5]))
        np.testing.assert_array_equal(b.c, np.diag([0.5, -0.5]))

    def test_separable_preset(self):
        b = blocks(preset_covariance("separable"))
        np.testing.assert_array_equal(b.a, np.diag([1.0, 0.5]))
        np.testing.assert_array_equal(b.c, np.zeros((2, 2)))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (4, 4), elements=st.floats(-1e3, 1e3)))
    def test_reassembly_is_exact(self, a):
        sym = np.triu(a) + np.triu(a, 1).T
        np.testing.assert_array_equal(blocks(sym).assemble(), sym)


class TestCheckPhysical:
    def test_vacuum_saturates(self):
        report = check_physical(CovarianceMatrix.vacuum())
        assert report.symplectic_eigenvalues == pytest.approx((0.5, 0.5), abs=1e-14)
        assert report.is_physical
        assert report.min_margin == pytest.approx(0.0, abs=1e-14)

    def test_separable_preset(self):
        # no cross block: nu^2 = det A = 1/2 for both modes
        report = check_physical(preset_covariance("separable"))
        assert report.symplectic_eigenvalues == pytest.approx(
            (math.sqrt(0.5), math.sqrt(0.5)), abs=1e-14)
        assert report.is_physical

    def test_entangled_preset_is_unphysical(self):
        sigma = preset_covariance("entangled")
        # Delta = det A + det B + 2 det C = 0.5 + 0.5 - 0.5, det sigma = 0
        assert np.linalg.det(sigma.entries) == pytest.approx(0.0, abs=1e-15)
        report = check_physical(sigma)
        assert report.symplectic_eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
        assert report.symplectic_eigenvalues[1] == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert not report.is_physical

    def test_rejects_non_symmetric_array(self):
        a = 0.5 * np.eye(4)
        a[0, 3] = 0.1
        with pytest.raises(ValueError):
            check_physical(a)

    def test_sorted_and_matches_invariant_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            s = random_physical_covariance(rng)
            nu = symplectic_spectrum(s)
            a, b, c = s[:2, :2], s[2:, 2:], s[:2, 2:]
            delta = np.linalg.det(a) + np.linalg.det(b) + 2 * np.linalg.det(c)
            det = np.linalg.det(s)
            nu_plus2 = (delta + math.sqrt(delta ** 2 - 4 * det)) / 2
            assert nu[0] <= nu[1]
            assert nu[1] ** 2 == pytest.approx(nu_plus2, rel=1e-10)
            assert nu[0] ** 2 == pytest.approx(det / nu_plus2, rel=1e-8)
            assert check_physical(s).is_physical

    def test_mode_swap_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            sigma = CovarianceMatrix(random_physical_covariance(rng))
            np.testing.assert_allclose(check_physical(sigma).symplectic_eigenvalues,
                                       check_physical(sigma.swap_modes()).symplectic_eigenvalues,
                                       atol=1e-12)

    def test_local_symplectic_invariance(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            s = random_physical_covariance(rng)
            loc = local_symplectic(random_local_symplectic(rng), random_local_symplectic(rng))
            moved = loc @ s @ loc.T
            np.testing.assert_allclose(symplectic_spectrum(moved), symplectic_spectrum(s),
                                       atol=1e-10)
