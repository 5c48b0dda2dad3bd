import math

import numpy as np
import pytest
from scipy.special import erfcx, gamma, rgamma

from humfrac.mlf import (
    ASYMPTOTIC_CUT,
    MLQuery,
    SERIES_SEAM,
    ml_array,
    ml_kernel,
    ml_kernel_array,
    mittag_leffler,
    seam_agreement,
)

from conftest import ml_reference, ml_reference_asymptotic

# frozen oracle values (exact-arithmetic series / asymptotic references)
E_HALF_1_M2 = 0.2553956763105057438651  # e^4 erfc(2)
E_075_075_M2 = 0.08436357224566056401856
E_075_1_M100 = 0.002786621019439093356311
INV_GAMMA_075 = 0.8160489390982629810771


class TestExamples:
    def test_exp_case(self):
        assert mittag_leffler(1.0, 1.0, -1.0) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_z_zero_constant_term(self):
        assert mittag_leffler(0.75, 0.75, 0.0) == pytest.approx(INV_GAMMA_075, rel=1e-14)

    def test_erfc_identity_point(self):
        # frozen value cross-checked against the live scaled-erfc oracle
        assert E_HALF_1_M2 == pytest.approx(float(erfcx(2.0)), rel=1e-14)
        assert mittag_leffler(0.5, 1.0, -2.0) == pytest.approx(E_HALF_1_M2, rel=1e-10)

    def test_deep_negative_asymptotic_point(self):
        assert mittag_leffler(0.75, 1.0, -100.0) == pytest.approx(E_075_1_M100, rel=1e-10)

    def test_series_point(self):
        assert mittag_leffler(0.75, 0.75, -2.0) == pytest.approx(E_075_075_M2, rel=1e-11)


class TestValidation:
    @pytest.mark.parametrize("alpha", [0.0, -0.5, 1.2, math.nan])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValueError):
            mittag_leffler(alpha, 1.0, -1.0)

    @pytest.mark.parametrize("beta", [0.0, -1.0, math.inf])
    def test_beta_range(self, beta):
        with pytest.raises(ValueError):
            mittag_leffler(0.75, beta, -1.0)

    def test_nonfinite_z(self):
        with pytest.raises(ValueError):
            mittag_leffler(0.75, 1.0, math.inf)

    def test_z_above_slack(self):
        with pytest.raises(ValueError):
            mittag_leffler(0.75, 1.0, 1.5)
        # slack is configurable
        assert mittag_leffler(0.75, 1.0, 1.5, z_max=2.0) > 0

    def test_query_type_validates(self):
        with pytest.raises(ValueError):
            MLQuery(alpha=2.0, beta=1.0, z=0.0)


class TestProperties:
    def test_exponential_reduction(self):
        z = np.linspace(-50.0, 1.0, 401)
        got = ml_array(1.0, 1.0, z)
        assert np.max(np.abs(got - np.exp(z)) / np.exp(z)) <= 1e-12

    @pytest.mark.parametrize("alpha", [0.55, 0.6, 0.75, 0.9, 1.0])
    @pytest.mark.parametrize("beta", [0.75, 1.0, 1.6, 2.5])
    def test_recurrence(self, alpha, beta):
        # E_{a,b}(z) = z E_{a,b+a}(z) + 1/Gamma(b), scaled by the largest term
        z = -np.logspace(-2, 4, 25)
        lhs = ml_array(alpha, beta, z)
        rhs = z * ml_array(alpha, beta + alpha, z) + rgamma(beta)
        scale = np.maximum.reduce(
            [np.abs(lhs), np.abs(z * ml_array(alpha, beta + alpha, z)), np.full_like(z, abs(rgamma(beta)))]
        )
        assert np.max(np.abs(lhs - rhs) / scale) <= 1e-9

    @pytest.mark.parametrize("alpha", [0.51, 0.6, 0.75, 0.9, 1.0])
    def test_positive_and_nonincreasing(self, alpha):
        x = np.concatenate([[0.0], np.logspace(-3, 6, 200)])
        for beta in (1.0, alpha):
            vals = ml_array(alpha, beta, -x)
            if alpha == 1.0 and beta == 1.0:
                # exact exponential underflows beyond x ~ 745
                assert np.all(vals >= 0.0)
                assert np.all(vals[x <= 700.0] > 0.0)
            else:
                assert np.all(vals > 0.0)
            assert np.all(np.diff(vals) <= 1e-15 * vals[:-1])

    @pytest.mark.parametrize("alpha", [0.55, 0.75, 0.9, 1.0])
    def test_semigroup_bound_per_mode(self, alpha):
        x = np.concatenate([[0.0], np.logspace(-3, 6, 120)])
        vals = gamma(alpha) * ml_array(alpha, alpha, -x)
        assert np.all(vals <= 1.0 + 1e-12)

    @pytest.mark.parametrize("alpha", [0.55, 0.75, 0.9, 0.99, 1.0])
    @pytest.mark.parametrize("beta", [1.0, 2.0, 3.7])
    def test_seam_agreement(self, alpha, beta):
        if alpha == 1.0 and beta == 1.0:
            return
        d_series, d_asym = seam_agreement(alpha, beta)
        assert d_series <= 1e-9
        assert d_asym <= 1e-9

    def test_seam_agreement_beta_alpha(self):
        for alpha in (0.55, 0.75, 0.9):
            d_series, d_asym = seam_agreement(alpha, alpha)
            assert d_series <= 1e-9
            assert d_asym <= 1e-9


class TestAgainstReference:
    @pytest.mark.parametrize("alpha", ["0.55", "0.75", "0.9", "1.0"])
    @pytest.mark.parametrize("beta", [0.75, 1.0, 1.75, 2.75])
    def test_moderate_range(self, alpha, beta):
        a = float(alpha)
        if a == 1.0 and beta == 1.0:
            return
        z = -np.array([0.01, 0.5, 1.5, 3.0, 6.0, 12.0, 25.0, 48.0])
        got = ml_array(a, beta, z)
        ref = np.array([ml_reference(alpha, beta, zi) for zi in z])
        rel = np.abs(got - ref) / np.abs(ref)
        assert rel.max() <= 1e-10

    @pytest.mark.parametrize("alpha", [0.55, 0.75, 0.9, 1.0])
    def test_deep_negative(self, alpha):
        for beta in (1.0, 2.0):
            if alpha == 1.0 and beta == 1.0:
                continue
            z = -np.array([60.0, 300.0, 1e4, 1e6])
            got = ml_array(alpha, beta, z)
            ref = np.array([ml_reference_asymptotic(alpha, beta, zi) for zi in z])
            assert np.max(np.abs(got - ref) / np.abs(ref)) <= 1e-11

    def test_vectorized_matches_scalar(self):
        z = np.array([0.5, 0.0, -1.0, -7.7, -33.3, -222.0, -1e5])
        batch = ml_array(0.8, 1.3, z)
        singles = np.array([mittag_leffler(0.8, 1.3, zi) for zi in z])
        np.testing.assert_allclose(batch, singles, rtol=1e-12)


class TestKernel:
    def test_classical_reduction(self):
        assert ml_kernel(1.0, -2.0, 0.5) == pytest.approx(math.exp(-1.0), rel=1e-13)

    def test_zero_eigenvalue(self):
        assert ml_kernel(0.75, 0.0, 1.0) == pytest.approx(INV_GAMMA_075, rel=1e-13)

    def test_product_form(self):
        # t^(a-1) E_{a,a}(lam t^a) at a=0.75, lam=-2, t=1
        assert ml_kernel(0.75, -2.0, 1.0) == pytest.approx(E_075_075_M2, rel=1e-11)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            ml_kernel(0.75, -1.0, 0.0)
        with pytest.raises(ValueError):
            ml_kernel_array(0.75, np.array([-1.0]), -0.5)

    def test_rejects_positive_eigenvalue(self):
        with pytest.raises(ValueError):
            ml_kernel(0.75, 0.5, 1.0)

    def test_strict_positivity(self):
        t = np.logspace(-6, 1, 40)
        for lam in (0.0, -1.0, -100.0):
            vals = np.array([ml_kernel(0.7, lam, ti) for ti in t])
            assert np.all(vals > 0.0)


def test_regime_constants_sane():
    assert 0 < SERIES_SEAM
    assert ASYMPTOTIC_CUT < -SERIES_SEAM
