import math

import numpy as np
import pytest

from wiener_sqg.errors import TruncationDominated
from wiener_sqg.lemmas import (
    INTERP_CONSTANT, SampledProfile, convolution_agreement, duhamel_norms, gaussian_profile,
    lemma_duhamel_check, lemma_interpolation_check, lemma_product_check, power_triangle_check,
    random_pair, random_smooth_profile,
)
from wiener_sqg.spectral import SpectralField, make_field


def gaussian_x_norm(sigma):
    # 2 pi int_0^inf r^{sigma+1} e^{-r^2/2} dr
    return 2 * math.pi * 2 ** (sigma / 2) * math.gamma(sigma / 2 + 1)


class TestProduct:
    @pytest.mark.parametrize("seed", range(5))
    def test_all_hold(self, seed):
        res = lemma_product_check(seed, N=5)
        assert all(r.passed for r in res), [r for r in res if not r.passed]
        assert {r.name.split("[")[0] for r in res} >= {
            "conv_fast_eq_direct", "product_x0", "product_x1", "weighted_product", "transport_bound"}

    def test_sharpness_ratios_in_unit_interval(self):
        for r in lemma_product_check(3, N=4):
            if "ratio" in r.details:
                assert 0 < r.details["ratio"] <= 1

    def test_deterministic(self):
        a = [r.record() for r in lemma_product_check(8, 4)]
        b = [r.record() for r in lemma_product_check(8, 4)]
        assert a == b

    def test_agreement_measure(self):
        f, g = random_pair(np.random.default_rng(0), 4)
        assert 0 <= convolution_agreement(f, g) < 1e-14


class TestDuhamel:
    def test_zero_b(self):
        rng = np.random.default_rng(1)
        a = [random_pair(rng, 3)[0] for _ in range(4)]
        zero = [SpectralField.zeros(3)] * 4
        out = duhamel_norms(a, zero, 0.25, 0.0)
        assert out.sup_norm == 0.0 and out.l1_norm == 0.0

    def test_single_mode_self(self):
        a = [make_field(3, [((1, 2), 0.5)])] * 4
        out = duhamel_norms(a, a, 0.25, 0.0)
        assert out.sup_norm <= 1e-14 and out.l1_norm <= 1e-14

    @pytest.mark.parametrize("sigma", [-1.0, -0.5, 0.0, 1.0])
    def test_random_pairs(self, sigma):
        ratios = []
        for seed in range(10):
            res = lemma_duhamel_check(seed, N=4, sigma=sigma)
            assert all(r.passed for r in res)
            ratios += [r.details["ratio"] for r in res]
        assert 0 < max(ratios) <= 1
        if sigma == -1.0:
            assert len(res) == 4

    def test_sigma_range(self):
        with pytest.raises(ValueError):
            lemma_duhamel_check(0, sigma=-1.5)


class TestInterpolation:
    def test_gaussian_norms_match_radial_integrals(self):
        prof = SampledProfile(gaussian_profile())
        for sigma in (0.0, 1.0):
            xs, xs1, l2 = prof.norms(sigma)
            assert xs == pytest.approx(gaussian_x_norm(sigma), rel=1e-7)
            assert xs1 == pytest.approx(gaussian_x_norm(sigma + 1), rel=1e-7)
            assert l2 == pytest.approx(math.sqrt(math.pi), rel=1e-12)

    @pytest.mark.parametrize("sigma", [0.0, 1.0])
    def test_gaussian_passes(self, sigma):
        ineq, quad = lemma_interpolation_check(SampledProfile(gaussian_profile()), sigma)
        assert ineq.passed and quad.passed
        assert ineq.details["ratio"] < 1

    def test_random_profile(self):
        ineq, quad = lemma_interpolation_check(SampledProfile(random_smooth_profile(4)), 0.5)
        assert ineq.passed and quad.passed

    def test_scaling_invariance(self):
        base = lemma_interpolation_check(SampledProfile(gaussian_profile()), 0.0)[0]
        scaled = lemma_interpolation_check(SampledProfile(gaussian_profile(scale=3.7)), 0.0)[0]
        assert scaled.details["ratio"] == pytest.approx(base.details["ratio"], rel=1e-12)

    def test_dilation_invariance(self):
        base = lemma_interpolation_check(SampledProfile(gaussian_profile()), 1.0)[0]
        wide = lemma_interpolation_check(SampledProfile(gaussian_profile(width=0.5), L=4.0, h=0.005), 1.0)[0]
        assert wide.details["ratio"] == pytest.approx(base.details["ratio"], rel=1e-6)

    def test_plancherel_normalized_variant_fails(self):
        # with the (2 pi)^{-1} normalization the constant is too small at sigma = 0
        ineq, _ = lemma_interpolation_check(SampledProfile(gaussian_profile()), 0.0)
        assert ineq.details["plancherel_ratio"] > 1.0
        assert INTERP_CONSTANT == pytest.approx(math.sqrt(2 * math.pi) + 1)

    def test_truncation_detected(self):
        with pytest.raises(TruncationDominated):
            lemma_interpolation_check(SampledProfile(gaussian_profile(width=3.0), L=4.0, h=0.05), 0.0)


class TestPowerTriangle:
    @pytest.mark.parametrize("p", [0.25, 0.5, 1.0])
    def test_holds(self, p):
        res = power_triangle_check(p, sample_count=2000, seed=1)
        assert res.passed

    @pytest.mark.parametrize("p", [1.5, 2.0])
    def test_counterexample(self, p):
        res = power_triangle_check(p)
        assert res.passed
        (k, n) = res.details["counterexample"]
        lhs = math.hypot(*k) ** p
        rhs = math.hypot(k[0] - n[0], k[1] - n[1]) ** p + math.hypot(*n) ** p
        assert lhs > rhs

    def test_p2_witness(self):
        assert power_triangle_check(2.0, box=3).details["counterexample"] == ((2, 0), (1, 0))

    def test_bad_exponent(self):
        with pytest.raises(ValueError):
            power_triangle_check(0.0)
