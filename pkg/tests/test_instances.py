"""Hard-instance generator and lower-bound closed forms."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from nia import (
    HardInstanceSpec,
    InvalidDimension,
    generate_hard_instance,
    noise_monotonicity_check,
    optimal_pass_coefficients,
    optimal_scaling_factor,
    predicted_excess_curve,
    relevance_set,
    scaling_gradient,
    sigmoid,
    sigmoid_moment,
)
from nia.instances import numeric_pass_coefficients


class TestGenerator:
    def test_differencing_map(self):
        ds = generate_hard_instance(HardInstanceSpec(k=2, n=500, seed=1))
        z = ds.latents
        assert np.array_equal(ds.features[:, 0], z[:, 0])
        assert np.allclose(ds.features[:, 1], z[:, 1] - z[:, 0], rtol=0, atol=0)
        assert np.array_equal(ds.optimal_logits, z[:, 1])

    def test_prefix_sums_recover_every_latent(self):
        ds = generate_hard_instance(HardInstanceSpec(k=5, n=2000, seed=2))
        prefix = np.cumsum(ds.features, axis=1)
        scale = np.maximum(1.0, np.abs(ds.latents))
        assert np.max(np.abs(prefix - ds.latents) / scale) <= 1e-12

    def test_labels_binary(self):
        ds = generate_hard_instance(HardInstanceSpec(k=3, n=1000, seed=3))
        assert set(np.unique(ds.labels)) <= {0.0, 1.0}

    def test_reproducible_from_seed(self):
        a = generate_hard_instance(HardInstanceSpec(k=3, n=400, seed=9))
        b = generate_hard_instance(HardInstanceSpec(k=3, n=400, seed=9))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_different_seeds_differ(self):
        a = generate_hard_instance(HardInstanceSpec(k=3, n=400, seed=1))
        b = generate_hard_instance(HardInstanceSpec(k=3, n=400, seed=2))
        assert not np.array_equal(a.features, b.features)

    def test_k_below_two_rejected(self):
        with pytest.raises(InvalidDimension):
            HardInstanceSpec(k=1, n=10, seed=0)

    def test_feature_variances(self):
        # Var(x_1) = 1 and Var(Z_i - Z_{i-1}) = 2, Monte Carlo at n = 1e6.
        ds = generate_hard_instance(HardInstanceSpec(k=4, n=1_000_000, seed=5))
        variances = ds.features.var(axis=0)
        assert abs(variances[0] - 1.0) <= 0.01
        assert np.max(np.abs(variances[1:] - 2.0)) <= 0.01

    def test_label_law_in_equal_mass_bins(self):
        ds = generate_hard_instance(HardInstanceSpec(k=4, n=1_000_000, seed=5))
        zk = ds.latents[:, -1]
        order = np.argsort(zk)
        worst = 0.0
        for chunk in np.array_split(order, 20):
            observed = float(np.mean(ds.labels[chunk]))
            predicted = float(sigmoid(np.mean(zk[chunk])))
            worst = max(worst, abs(observed - predicted))
        assert worst <= 0.01


class TestRelevanceSet:
    def test_first_pass_sees_only_last_feature(self):
        assert relevance_set(4, 1) == frozenset({4})

    def test_full_pass_sees_everything(self):
        assert relevance_set(4, 4) == frozenset({1, 2, 3, 4})

    def test_intermediate(self):
        assert relevance_set(5, 3) == frozenset({3, 4, 5})

    def test_pass_beyond_dimension_rejected(self):
        with pytest.raises(InvalidDimension):
            relevance_set(4, 5)


class TestOptimalPassCoefficients:
    def test_single_pass(self):
        pp = optimal_pass_coefficients(1, 0.7)
        assert np.allclose(pp.coefficients, [0.7])
        assert pp.residual_variance == pytest.approx(0.49, rel=1e-14)
        assert pp.noise_variance_scaled == pytest.approx(1.0, rel=1e-14)

    def test_two_passes_unit_scale(self):
        pp = optimal_pass_coefficients(2, 1.0)
        # Coefficient differences sum to -1/2 and the residual variance is 1/2.
        assert np.allclose(pp.coefficients, [1.0, 0.5])
        assert float(np.diff(pp.coefficients).sum()) == pytest.approx(-0.5, rel=1e-14)
        assert pp.residual_variance == pytest.approx(0.5, rel=1e-14)

    def test_closed_form_matches_numeric_minimization(self):
        for p in (2, 3, 4, 5, 6):
            for c in (0.3, 0.7, 1.0):
                pp = optimal_pass_coefficients(p, c)
                s_num, var_num = numeric_pass_coefficients(p, c)
                assert abs(s_num - (-c * (p - 1) / p)) <= 1e-9
                assert abs(var_num - pp.residual_variance) <= 1e-9
                assert pp.noise_variance_scaled == pytest.approx(1.0, rel=1e-12)

    def test_coefficient_length_matches_pass(self):
        for p in (1, 2, 5):
            assert optimal_pass_coefficients(p, 0.5).coefficients.shape == (p,)


def _quad_expectation(f, sd):
    # Independent oracle for the Gauss-Hermite path: adaptive quadrature.
    val, _ = quad(
        lambda x: f(x) * math.exp(-0.5 * (x / sd) ** 2) / (sd * math.sqrt(2 * math.pi)),
        -12 * sd,
        12 * sd,
        limit=200,
    )
    return val


class TestOptimalScalingFactor:
    def test_gradient_sign_at_bracket_ends(self):
        for p in (1, 2, 8):
            assert scaling_gradient(0.0, p) < 0
            assert scaling_gradient(1.0, p) > 0

    def test_root_confirmed_by_adaptive_quadrature(self):
        for p in (1, 3):
            c = optimal_scaling_factor(p)
            s_sd = math.sqrt(1.0 + 1.0 / p)
            oracle = -_quad_expectation(lambda x: x * sigmoid(x), 1.0) + _quad_expectation(
                lambda x: x * sigmoid(c * x), s_sd
            )
            assert abs(oracle) <= 1e-9

    def test_in_unit_interval_and_increasing(self):
        values = [optimal_scaling_factor(p) for p in (1, 2, 4, 8, 16, 64)]
        assert all(0.0 < c < 1.0 for c in values)
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_gradient_residual_tiny_at_root(self):
        for p in (1, 2, 4, 8, 16, 64):
            c = optimal_scaling_factor(p)
            assert abs(scaling_gradient(c, p)) <= 1e-10

    def test_sigmoid_moment_increasing(self):
        grid = [0.5, 1.0, 1.5, 2.0, 3.0]
        values = [sigmoid_moment(u) for u in grid]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_sigmoid_moment_against_adaptive_quadrature(self):
        for u in (0.5, 1.0, 2.0):
            oracle = _quad_expectation(lambda x: x * sigmoid(x), u)
            assert sigmoid_moment(u) == pytest.approx(oracle, rel=1e-10)


class TestNoiseMonotonicity:
    def test_equal_variances_equal_losses(self):
        cmp = noise_monotonicity_check(1.0, 0.5, 0.5, 10_000, seed=1)
        assert cmp.loss_small == cmp.loss_large
        assert cmp.std_error == 0.0

    def test_noise_increases_loss(self):
        cmp = noise_monotonicity_check(0.8, 0.25, 1.0, 200_000, seed=2)
        assert cmp.loss_small < cmp.loss_large
        assert cmp.margin_se > 3.0

    def test_zero_noise_unit_scale_recovers_bayes_loss(self):
        cmp = noise_monotonicity_check(1.0, 0.0, 1.0, 1_000_000, seed=3)
        bayes = _quad_expectation(
            lambda z: -sigmoid(z) * z + math.log1p(math.exp(-abs(z))) + max(z, 0.0), 1.0
        )
        # Monte Carlo estimate at n=1e6: standard error about 4e-4.
        assert cmp.loss_small == pytest.approx(bayes, abs=2e-3)

    def test_invalid_variances_rejected(self):
        with pytest.raises(InvalidDimension):
            noise_monotonicity_check(1.0, 1.0, 0.5, 100, seed=0)


class TestPredictedExcessCurve:
    def test_first_pass_value(self):
        assert predicted_excess_curve(4, [1])[0] == pytest.approx(0.5, rel=1e-15)

    def test_shape_ratio(self):
        curve = predicted_excess_curve(4, [2, 5])
        assert curve[0] / curve[1] == pytest.approx(2.0, rel=1e-15)

    def test_invalid_passes_rejected(self):
        with pytest.raises(InvalidDimension):
            predicted_excess_curve(4, [0])
        with pytest.raises(InvalidDimension):
            predicted_excess_curve(4, [])
