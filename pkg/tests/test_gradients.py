"""Finite-difference verification of every analytic gradient."""

import numpy as np
import pytest

from stylebalance.exceptions import ConfigError, DimensionError
from stylebalance.featnet import build, default_config, forward
from stylebalance.gradients import (GradCheckSummary, backprop_pixels,
                                    balanced_style_grad, classic_style_grad,
                                    content_grad, finite_diff_check,
                                    run_gradcheck, style_grad_to_target)
from stylebalance.losses import (classic_layer_loss, content_loss, gram,
                                 sup_bound)
from stylebalance.tensors import FeatureMap, Image
from stylebalance.util import single_thread


def fmap(data, nonneg=False):
    return FeatureMap(np.asarray(data, dtype=np.float64), nonneg=nonneg)


class TestFiniteDiffCheck:
    def test_exact_quadratic(self):
        err = finite_diff_check(lambda x: float(x[0] ** 2), np.array([3.0]),
                                np.array([6.0]), eps=1e-5)
        assert err <= 1e-9

    def test_detects_scale_error(self):
        """An analytic gradient off by a factor of two deviates by half the
        larger magnitude, far above any passing threshold."""
        err = finite_diff_check(lambda x: float(x[0] ** 2), np.array([3.0]),
                                np.array([12.0]), eps=1e-5)
        assert err == pytest.approx(0.5, rel=1e-6)

    def test_detects_zeroed_gradient(self):
        err = finite_diff_check(lambda x: float(x[0] ** 2), np.array([3.0]),
                                np.array([0.0]), eps=1e-5)
        assert err >= 0.99

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            finite_diff_check(lambda x: 0.0, np.zeros(3), np.zeros(4))


class TestContentGrad:
    def test_zero_at_minimum(self):
        f = fmap(np.random.default_rng(0).random((3, 3, 2)))
        np.testing.assert_array_equal(content_grad(f, f), np.zeros((3, 3, 2)))

    def test_single_entry(self):
        g = content_grad(fmap([[[1.0]]]), fmap([[[3.0]]]))
        np.testing.assert_array_equal(g, [[[4.0]]])

    def test_linearity_in_residual(self):
        rng = np.random.default_rng(1)
        fc = rng.random((2, 3, 2))
        d = rng.random((2, 3, 2))
        g1 = content_grad(fmap(fc), fmap(fc + d))
        g3 = content_grad(fmap(fc), fmap(fc + 3 * d))
        np.testing.assert_allclose(g3, 3 * g1, rtol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            shape = (int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                     int(rng.integers(1, 4)))
            fc = rng.random(shape)
            fp = rng.random(shape)
            err = finite_diff_check(
                lambda x: content_loss(fmap(fc), fmap(x.reshape(shape))),
                fp, content_grad(fmap(fc), fmap(fp)))
            assert err <= 1e-6


class TestClassicStyleGrad:
    def test_zero_at_matching_features(self):
        f = fmap(np.random.default_rng(3).random((2, 2, 3)))
        np.testing.assert_allclose(classic_style_grad(f, f, 9.0),
                                   np.zeros((2, 2, 3)), atol=1e-15)

    def test_scalar_case_by_hand(self):
        """C=1, one pixel, target Gram 1, feature value 2: the loss is
        (f^2 - 1)^2 so the derivative is 4 f (f^2 - 1) = 24."""
        fs = fmap([[[1.0]]])
        fp = fmap([[[2.0]]])
        np.testing.assert_allclose(classic_style_grad(fs, fp, 1.0), [[[24.0]]],
                                   rtol=1e-12)

    def test_n_prefactor(self):
        rng = np.random.default_rng(4)
        fs = fmap(rng.random((2, 2, 3)))
        fp = fmap(rng.random((2, 2, 3)))
        np.testing.assert_allclose(classic_style_grad(fs, fp, 2.0),
                                   classic_style_grad(fs, fp, 1.0) / 2.0,
                                   rtol=1e-12)

    def test_finite_differences_100_pairs(self):
        rng = np.random.default_rng(5)
        with single_thread():
            for _ in range(100):
                h, w = rng.integers(1, 5, size=2)
                c = int(rng.integers(1, 5))
                fs = fmap(rng.random((h, w, c)))
                fp_arr = rng.random((h, w, c))
                n = float(c * c)
                target = gram(fs)
                analytic = classic_style_grad(fs, fmap(fp_arr), n)
                err = finite_diff_check(
                    lambda x: classic_layer_loss(
                        target, gram(fmap(x.reshape(h, w, c))), n),
                    fp_arr, analytic)
                assert err <= 1e-6


class TestBalancedStyleGrad:
    def test_stop_gradient_identity(self):
        """The balanced gradient is the classic gradient divided by the
        frozen sup value — entrywise, to the last bits."""
        rng = np.random.default_rng(6)
        for _ in range(50):
            h, w = rng.integers(1, 5, size=2)
            c = int(rng.integers(1, 5))
            fs = fmap(rng.random((h, w, c)), nonneg=True)
            fp = fmap(rng.random((h, w, c)), nonneg=True)
            n = float(c * c)
            s = sup_bound(gram(fs), gram(fp), n)
            expected = classic_style_grad(fs, fp, n) / s
            got = balanced_style_grad(fs, fp, n)
            np.testing.assert_allclose(got, expected, rtol=1e-12, atol=0.0)

    def test_zero_at_matching_features(self):
        f = fmap(np.random.default_rng(7).random((2, 2, 2)), nonneg=True)
        np.testing.assert_allclose(balanced_style_grad(f, f, 4.0),
                                   np.zeros((2, 2, 2)), atol=1e-15)

    def test_degenerate_sup_returns_zero_map(self):
        z = fmap(np.zeros((2, 2, 2)), nonneg=True)
        np.testing.assert_array_equal(balanced_style_grad(z, z, 4.0),
                                      np.zeros((2, 2, 2)))

    def test_scalar_case_by_hand(self):
        fs = fmap([[[1.0]]], nonneg=True)
        fp = fmap([[[2.0]]], nonneg=True)
        np.testing.assert_allclose(balanced_style_grad(fs, fp, 1.0),
                                   [[[24.0 / 17.0]]], rtol=1e-12)

    def test_finite_differences_frozen_denominator(self):
        """The numeric objective divides by the sup evaluated at the base
        point, matching the stop-gradient contract."""
        rng = np.random.default_rng(8)
        with single_thread():
            for _ in range(100):
                h, w = rng.integers(1, 5, size=2)
                c = int(rng.integers(1, 5))
                fs = fmap(rng.random((h, w, c)), nonneg=True)
                fp_arr = rng.random((h, w, c))
                n = float(c * c)
                target = gram(fs)
                s0 = sup_bound(target, gram(fmap(fp_arr, nonneg=True)), n)
                analytic = balanced_style_grad(fs, fmap(fp_arr, nonneg=True), n)
                err = finite_diff_check(
                    lambda x: classic_layer_loss(
                        target, gram(fmap(x.reshape(h, w, c))), n) / s0,
                    fp_arr, analytic)
                assert err <= 1e-6

    def test_agrees_with_target_form(self):
        rng = np.random.default_rng(9)
        fs = fmap(rng.random((3, 2, 4)), nonneg=True)
        fp = fmap(rng.random((3, 2, 4)), nonneg=True)
        direct = balanced_style_grad(fs, fp, 16.0)
        via_target = style_grad_to_target(gram(fs), fp, 16.0)
        s = sup_bound(gram(fs), gram(fp), 16.0)
        np.testing.assert_allclose(direct, via_target / s, rtol=1e-12)


class TestBackpropPixels:
    def test_zero_layer_grads_give_zero(self):
        net = build(default_config(seed=0))
        img = Image(np.random.default_rng(10).random((8, 8, 3)))
        with single_thread():
            feats = forward(net, img, ["b1_r2"])
            zero = np.zeros_like(feats["b1_r2"].data)
            g = backprop_pixels(net, img, [("b1_r2", zero)])
        np.testing.assert_array_equal(g, np.zeros((8, 8, 3)))

    def test_unknown_tap_raises(self):
        net = build(default_config(seed=0))
        img = Image(np.zeros((8, 8, 3)))
        with pytest.raises(ConfigError):
            backprop_pixels(net, img, [("nope", np.zeros((8, 8, 8)))])

    def test_finite_differences_through_first_block(self):
        """Analytic pixel gradient of a style loss at the shallowest tap
        versus central differences, on a handful of small images."""
        net = build(default_config(seed=0))
        rng = np.random.default_rng(11)
        tap = "b1_r2"
        with single_thread():
            for _ in range(3):
                arr = 0.05 + 0.9 * rng.random((6, 6, 3))
                img = Image(arr)
                ref = Image(0.05 + 0.9 * rng.random((6, 6, 3)))
                target = gram(forward(net, ref, [tap])[tap])
                n = float(target.channels ** 2)

                def objective(x):
                    f = forward(net, Image(x.reshape(6, 6, 3)), [tap])[tap]
                    return classic_layer_loss(target, gram(f), n)

                feats = forward(net, img, [tap])
                lg = style_grad_to_target(target, feats[tap], n)
                analytic = backprop_pixels(net, img, [(tap, lg)])
                err = finite_diff_check(objective, arr, analytic)
                assert err <= 1e-4

    def test_accumulates_over_taps(self):
        """Backprop of two taps together equals the sum of the single-tap
        backprops (chain rule linearity)."""
        net = build(default_config(seed=0))
        rng = np.random.default_rng(12)
        img = Image(rng.random((8, 8, 3)))
        with single_thread():
            feats = forward(net, img, ["b1_r2", "b2_r2"])
            g1 = rng.normal(size=feats["b1_r2"].data.shape)
            g2 = rng.normal(size=feats["b2_r2"].data.shape)
            both = backprop_pixels(net, img, [("b1_r2", g1), ("b2_r2", g2)])
            a = backprop_pixels(net, img, [("b1_r2", g1)])
            b = backprop_pixels(net, img, [("b2_r2", g2)])
        np.testing.assert_allclose(both, a + b, rtol=1e-10, atol=1e-14)


class TestHarness:
    def test_small_run_passes(self):
        summary = run_gradcheck(seed=3, feature_instances=5, pixel_instances=2,
                                pixel_size=6)
        assert isinstance(summary, GradCheckSummary)
        assert summary.passed()
        assert summary.stop_gradient == 0.0

    def test_thresholds(self):
        good = GradCheckSummary(content=1e-8, classic=1e-8, balanced=1e-8,
                                pixels=1e-6, stop_gradient=0.0)
        bad = GradCheckSummary(content=1e-8, classic=2e-6, balanced=1e-8,
                               pixels=1e-6, stop_gradient=0.0)
        assert good.passed()
        assert not bad.passed()
        assert bad.worst_feature == 2e-6
