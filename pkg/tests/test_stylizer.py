"""Tests for the pixel-space optimizer and the sweep runner.

The last class replays a small study at full working resolution; it is the
slowest part of the unit suite (a couple of minutes) because the contrast
it checks only emerges at realistic scale.
"""

from dataclasses import replace

import numpy as np
import pytest

from stylebalance.exceptions import DimensionError, PreconditionError
from stylebalance.featnet import build, default_config
from stylebalance.scoring import LossKind, evaluate_pair
from stylebalance.stylizer import (InitKind, OptimizeConfig, SweepResult,
                                   interpolation_baseline, stylize, sweep,
                                   task_seed)
from stylebalance.textures import noise_image, texture_set
from stylebalance.util import stream_key

SMALL = OptimizeConfig(steps=25, step_size=0.02, seed=0)


@pytest.fixture(scope="module")
def net():
    return build(default_config(seed=0))


@pytest.fixture(scope="module")
def small_images():
    imgs = texture_set(3, 2, size=16)
    return imgs[0], imgs[1]


class TestStylize:
    def test_zero_steps_returns_content(self, net, small_images):
        content, style = small_images
        cfg = replace(SMALL, steps=0)
        out, traj = stylize(net, content, style, cfg)
        np.testing.assert_array_equal(out.data, content.data)
        assert len(traj) == 1

    def test_trajectory_length(self, net, small_images):
        content, style = small_images
        _, traj = stylize(net, content, style, replace(SMALL, steps=7))
        assert len(traj) == 8

    def test_descends(self, net, small_images):
        content, style = small_images
        _, traj = stylize(net, content, style, SMALL)
        assert traj[-1] < traj[0]

    def test_self_style_is_fixed_point(self, net, small_images):
        """Content == style with content init: the objective starts at zero,
        every gradient is zero, and the pixels never move."""
        content, _ = small_images
        out, traj = stylize(net, content, content, SMALL)
        np.testing.assert_array_equal(out.data, content.data)
        assert traj == [0.0] * len(traj)

    def test_output_in_unit_range(self, net, small_images):
        content, style = small_images
        out, _ = stylize(net, content, style,
                         replace(SMALL, step_size=0.1))
        assert out.data.min() >= 0.0
        assert out.data.max() <= 1.0

    def test_bit_identical_reruns(self, net, small_images):
        content, style = small_images
        a, ta = stylize(net, content, style, SMALL)
        b, tb = stylize(net, content, style, SMALL)
        np.testing.assert_array_equal(a.data, b.data)
        assert ta == tb

    def test_noise_init_is_seeded(self, net, small_images):
        content, style = small_images
        cfg = replace(SMALL, steps=0, init=InitKind.NOISE)
        out0, _ = stylize(net, content, style, cfg)
        out0b, _ = stylize(net, content, style, cfg)
        out1, _ = stylize(net, content, style, replace(cfg, seed=1))
        assert not np.array_equal(out0.data, content.data)
        np.testing.assert_array_equal(out0.data, out0b.data)
        assert not np.array_equal(out0.data, out1.data)

    def test_on_step_cadence(self, net, small_images):
        content, style = small_images
        seen = []
        cfg = replace(SMALL, steps=5)
        _, traj = stylize(net, content, style, cfg,
                          on_step=lambda step, x, rep: seen.append((step, rep.total)))
        assert [s for s, _ in seen] == list(range(6))
        assert [t for _, t in seen] == traj

    def test_balanced_run_keeps_layer_ratios_in_unit_interval(self, net, small_images):
        content, style = small_images
        cfg = replace(SMALL, loss_kind=LossKind.BALANCED)
        out, _ = stylize(net, content, style, cfg)
        report = evaluate_pair(net, content, style, out, cfg.loss)
        for layer in report.layers:
            assert 0.0 <= layer.balanced <= 1.0


class TestAutoBeta:
    def test_ratio_rule(self, net, small_images):
        """With noise init the probe rebalances the weighting so that
        beta * style == content at the starting point."""
        content, style = small_images
        captured = []
        cfg = replace(SMALL, steps=0, init=InitKind.NOISE, auto_beta=True)
        stylize(net, content, style, cfg,
                on_step=lambda step, x, rep: captured.append(rep))
        rep = captured[-1]
        assert rep.content > 0.0 and rep.style > 0.0
        assert rep.beta == pytest.approx(rep.content / rep.style, rel=1e-12)

    def test_disabled_keeps_configured_beta(self, net, small_images):
        content, style = small_images
        captured = []
        cfg = replace(SMALL, steps=0, init=InitKind.NOISE)
        stylize(net, content, style, cfg,
                on_step=lambda step, x, rep: captured.append(rep))
        assert captured[-1].beta == 1.0

    def test_content_init_probe_degenerates(self, net, small_images):
        """Content init gives a zero content probe, so the configured beta
        survives untouched."""
        content, style = small_images
        captured = []
        cfg = replace(SMALL, steps=0, auto_beta=True)
        stylize(net, content, style, cfg,
                on_step=lambda step, x, rep: captured.append(rep))
        assert captured[-1].beta == 1.0


class TestInterpolationBaseline:
    def test_alpha_one_matches_stylize(self, net, small_images):
        content, style = small_images
        a, ta = interpolation_baseline(net, content, style, 1.0, SMALL)
        b, tb = stylize(net, content, style, SMALL)
        np.testing.assert_array_equal(a.data, b.data)
        assert ta == tb

    def test_alpha_zero_is_fixed_point(self, net, small_images):
        content, style = small_images
        out, traj = interpolation_baseline(net, content, style, 0.0, SMALL)
        np.testing.assert_array_equal(out.data, content.data)
        assert traj == [0.0] * len(traj)

    def test_alpha_validated(self, net, small_images):
        content, style = small_images
        for bad in (-0.1, 1.5):
            with pytest.raises(PreconditionError):
                interpolation_baseline(net, content, style, bad, SMALL)

    def test_alpha_moves_toward_style(self, net, small_images):
        """Raising alpha should land the pastiche closer to the true style
        statistics (classic metric, default layers)."""
        content, style = small_images
        cfg = replace(SMALL, steps=40)
        dist = []
        for alpha in (0.0, 1.0):
            out, _ = interpolation_baseline(net, content, style, alpha, cfg)
            dist.append(evaluate_pair(net, content, style, out,
                                      cfg.loss).classic_style)
        assert dist[1] < dist[0]


class TestSweep:
    def test_single_task_matches_stylize(self, net, small_images):
        content, style = small_images
        result = sweep(net, [content], [style], SMALL, keep_pastiches=True)
        assert isinstance(result, SweepResult)
        assert len(result.rows) == 1
        solo_cfg = replace(SMALL, seed=task_seed(SMALL.seed, 0))
        solo, _ = stylize(net, content, style, solo_cfg)
        np.testing.assert_array_equal(result.pastiches[0].data, solo.data)
        rep = evaluate_pair(net, content, style, solo, SMALL.loss)
        assert result.rows[0].classic_style == rep.classic_style
        assert result.rows[0].balanced_style == rep.balanced_style
        assert result.rows[0].content == rep.content

    def test_pairs_ordering(self, net):
        contents = texture_set(10, 2, size=16)
        styles = texture_set(11, 3, size=16)
        result = sweep(net, contents, styles, replace(SMALL, steps=2))
        assert [(r.content_id, r.style_id) for r in result.rows] == [
            ("c0", "s0"), ("c0", "s1"), ("c0", "s2"),
            ("c1", "s0"), ("c1", "s1"), ("c1", "s2")]
        assert result.pastiches is None

    def test_zip_pairing(self, net):
        contents = texture_set(12, 2, size=16)
        styles = texture_set(13, 2, size=16)
        result = sweep(net, contents, styles, replace(SMALL, steps=2),
                       pairing="zip", content_ids=["x", "y"],
                       style_ids=["u", "v"])
        assert [(r.content_id, r.style_id) for r in result.rows] == [
            ("x", "u"), ("y", "v")]

    def test_zip_unequal_counts(self, net):
        with pytest.raises(DimensionError, match="equal counts"):
            sweep(net, texture_set(0, 2, size=16), texture_set(0, 3, size=16),
                  replace(SMALL, steps=1), pairing="zip")

    def test_bad_pairing_name(self, net, small_images):
        content, style = small_images
        with pytest.raises(PreconditionError, match="pairing"):
            sweep(net, [content], [style], SMALL, pairing="cross")

    def test_empty_inputs(self, net, small_images):
        content, _ = small_images
        with pytest.raises(PreconditionError):
            sweep(net, [], [content], SMALL)
        with pytest.raises(PreconditionError):
            sweep(net, [content], [], SMALL)

    def test_id_length_mismatch(self, net, small_images):
        content, style = small_images
        with pytest.raises(DimensionError):
            sweep(net, [content], [style], SMALL, content_ids=["a", "b"])

    def test_task_seeds_differ(self, net):
        """Same content stylized against two styles must start from
        different noise, because each task owns a derived seed."""
        contents = texture_set(14, 1, size=16)
        styles = texture_set(15, 2, size=16)
        cfg = replace(SMALL, steps=0, init=InitKind.NOISE)
        result = sweep(net, contents, styles, cfg, keep_pastiches=True)
        assert not np.array_equal(result.pastiches[0].data,
                                  result.pastiches[1].data)

    def test_task_seed_is_stream_key(self):
        assert task_seed(7, 3) == stream_key(7, 3)


@pytest.fixture(scope="module")
def study(net):
    content = noise_image(99, size=64)
    styles = texture_set(17, 20, size=64)
    cfg = OptimizeConfig(steps=200, step_size=0.02, seed=5,
                         loss_kind=LossKind.CLASSIC)
    return sweep(net, [content], styles, cfg)


class TestWorkingResolutionContrast:
    """One small study at 64x64: a classic-driven sweep over twenty
    brightness-varied textures. The spread of final classic scores (max over
    min) must exceed the spread of the balanced scores, since the balanced
    metric divides out each style's own scale."""

    def test_classic_spread_exceeds_balanced_spread(self, study):
        classic = np.array([r.classic_style for r in study.rows])
        balanced = np.array([r.balanced_style for r in study.rows])
        assert classic.min() > 0.0 and balanced.min() > 0.0
        assert classic.max() / classic.min() > balanced.max() / balanced.min()

    def test_balanced_scores_bounded(self, study):
        """Four unit-weight layers, each ratio in [0, 1]: the weighted sum
        can never leave [0, 4]."""
        for r in study.rows:
            assert 0.0 <= r.balanced_style <= 4.0

    def test_row_count(self, study):
        assert len(study.rows) == 20
