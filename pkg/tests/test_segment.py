import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from foregan.errors import ConfigurationError, ParameterError, ShapeError
from foregan.evaluation import confusion, metrics
from foregan.flow import MotionMask
from foregan.segment import (
    GanBackground,
    OracleBackground,
    PipelineConfig,
    SegmentationMask,
    ThresholdRule,
    extract_foreground,
    fuse,
    previous_index,
    run_pipeline,
    segment_depth,
    segment_rgb,
    suppress_foreground,
)

binary = arrays(np.uint8, (6, 5), elements=st.integers(0, 1))


def _mask(a, modality="rgb"):
    return SegmentationMask(np.asarray(a, np.uint8), modality)


class TestSuppress:
    def test_identity(self, rng):
        x = rng.uniform(-1, 1, (4, 6, 3)).astype(np.float32)
        np.testing.assert_array_equal(suppress_foreground(x, MotionMask(np.ones((4, 6)), 0.0)), x)

    def test_annihilation(self, rng):
        x = rng.uniform(-1, 1, (4, 6, 3)).astype(np.float32)
        assert not suppress_foreground(x, MotionMask(np.zeros((4, 6)), 0.0)).any()

    def test_left_half(self, rng):
        x = rng.uniform(-1, 1, (4, 6, 3)).astype(np.float32)
        m = np.zeros((4, 6))
        m[:, :3] = 1
        out = suppress_foreground(x, MotionMask(m, 1.0))
        np.testing.assert_array_equal(out[:, :3], x[:, :3])
        assert not out[:, 3:].any()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            suppress_foreground(np.zeros((4, 4, 3)), MotionMask(np.ones((4, 5)), 0.0))

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float32, (6, 5, 3), elements=st.floats(-1, 1, width=32)), binary)
    def test_never_increases_magnitude(self, x, m):
        out = suppress_foreground(x, MotionMask(m, 0.0))
        assert (np.abs(out) <= np.abs(x)).all()


class TestExtract:
    def test_identity(self, rng):
        x = rng.uniform(-1, 1, (8, 8, 3))
        fmap, mask = extract_foreground(x, x.copy(), ThresholdRule("fixed"))
        assert not fmap.residual.any() and not mask.mask.any()

    def test_block_fixed(self):
        bg = np.zeros((10, 10, 3))
        x = bg.copy()
        x[2:6, 3:7] = 1.0
        fmap, mask = extract_foreground(x, bg, ThresholdRule("fixed", tau=0.5))
        expected = np.zeros((10, 10), np.uint8)
        expected[2:6, 3:7] = 1
        np.testing.assert_array_equal(mask.mask, expected)
        assert fmap.residual.shape == (10, 10) and fmap.residual.min() >= 0

    def test_hot_pixel_mean_std(self):
        # 64 pixels, one at 1: mean 1/64, std sqrt(63)/64 -> threshold ~0.26
        bg = np.zeros((8, 8, 3))
        x = bg.copy()
        x[5, 2, 1] = 1.0
        _, mask = extract_foreground(x, bg, ThresholdRule("mean_std", k=2.0))
        assert mask.mask.sum() == 1 and mask.mask[5, 2] == 1

    def test_channel_max(self):
        bg = np.zeros((2, 2, 3))
        x = bg.copy()
        x[0, 0] = [0.1, -0.7, 0.2]
        fmap, _ = extract_foreground(x, bg, ThresholdRule("fixed"))
        assert fmap.residual[0, 0] == pytest.approx(0.7)
        fmap, _ = extract_foreground(x, bg, ThresholdRule("fixed"), reduction="sum")
        assert fmap.residual[0, 0] == pytest.approx(1.0)

    def test_zero_spread_falls_back(self):
        bg = np.zeros((4, 4, 3))
        x = np.full((4, 4, 3), 0.8)
        with pytest.warns(RuntimeWarning, match="zero spread"):
            _, mask = extract_foreground(x, bg, ThresholdRule("mean_std", tau=0.5))
        assert mask.mask.all()

    def test_otsu(self):
        bg = np.zeros((10, 10, 3))
        x = bg.copy()
        x[:4] = 0.9
        x[4:] = 0.1
        _, mask = extract_foreground(x, bg, ThresholdRule("otsu"))
        assert mask.mask[:4].all() and not mask.mask[4:].any()

    def test_floor_keeps_noise_out(self, rng):
        bg = np.zeros((32, 32, 3))
        x = rng.normal(0, 0.01, bg.shape)
        _, mask = extract_foreground(x, bg)
        assert not mask.mask.any()

    def test_morphology_removes_speck(self):
        bg = np.zeros((12, 12, 3))
        x = bg.copy()
        x[2:8, 2:8] = 1.0
        x[10, 10] = 1.0
        _, raw = extract_foreground(x, bg, ThresholdRule("fixed"))
        _, clean = extract_foreground(x, bg, ThresholdRule("fixed"), morphology=True)
        assert raw.mask[10, 10] == 1 and clean.mask[10, 10] == 0
        assert clean.mask[2:8, 2:8].all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            extract_foreground(np.zeros((4, 4, 3)), np.zeros((4, 4, 1)))

    @pytest.mark.parametrize("kw", [{"kind": "median"}, {"floor": -1.0}])
    def test_rule_validation(self, kw):
        with pytest.raises(ParameterError):
            ThresholdRule(**kw)

    def test_reduction_validation(self):
        with pytest.raises(ParameterError):
            PipelineConfig(reduction="min")


class TestFuse:
    def test_truth_table(self):
        a = _mask([[1, 0, 0, 1]])
        b = _mask([[0, 1, 0, 1]], "depth")
        f = fuse(a, b)
        np.testing.assert_array_equal(f.mask, [[1, 1, 0, 1]])
        assert f.modality == "fused"

    def test_identity_element(self, rng):
        a = _mask(rng.integers(0, 2, (5, 5)))
        np.testing.assert_array_equal(fuse(a, _mask(np.zeros((5, 5)), "depth")).mask, a.mask)

    @settings(max_examples=60, deadline=None)
    @given(binary, binary)
    def test_algebra(self, a, b):
        ma, mb = _mask(a), _mask(b, "depth")
        f = fuse(ma, mb)
        np.testing.assert_array_equal(f.mask, np.logical_or(a, b))
        np.testing.assert_array_equal(f.mask, fuse(_mask(b), _mask(a, "depth")).mask)
        assert (f.mask >= a).all() and (f.mask >= b).all()
        assert f.mask.max(initial=0) <= 1

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            fuse(_mask(np.zeros((2, 2))), _mask(np.zeros((2, 3)), "depth"))

    def test_mask_validation(self):
        with pytest.raises(ParameterError):
            SegmentationMask(np.full((2, 2), 2))
        with pytest.raises(ParameterError):
            SegmentationMask(np.zeros((2, 2)), "thermal")


def _f(mask, gt):
    return metrics(confusion(mask, gt)).f_measure


class TestSegmentOracle:
    def test_rgb(self, shadow_sequence):
        seq = shadow_sequence
        model = OracleBackground("rgb", seq.background_rgb)
        scores = [_f(segment_rgb(seq.frames[i], seq.frames[i - 1], model, index=i), seq.gt[i])
                  for i in seq.gt_indices[::10]]
        assert np.mean(scores) >= 0.95

    def test_depth(self, shadow_sequence):
        seq = shadow_sequence
        model = OracleBackground("depth", seq.background_depth)
        outs = run_pipeline(seq.frames, seq.depth_frames, seq.gt_indices[::10],
                            OracleBackground("rgb", seq.background_rgb), model)
        scores = []
        for o in outs:
            direct = segment_depth(seq.depth_frames[o.index], o.motion, model, index=o.index)
            np.testing.assert_array_equal(direct.mask, o.depth.mask)
            scores.append(_f(direct, seq.gt[o.index]))
        assert np.mean(scores) >= 0.95

    def test_static_frame_is_quiet(self, shadow_sequence):
        seq = shadow_sequence
        model = OracleBackground("rgb", seq.background_rgb)
        for i in sorted(seq.background_only_indices)[1:]:
            mask = segment_rgb(seq.frames[i], seq.frames[i - 1], model, index=i)
            assert mask.mask.mean() < 0.02

    def test_deterministic(self, shadow_sequence):
        seq = shadow_sequence
        model = OracleBackground("rgb", seq.background_rgb)
        i = seq.gt_indices[7]
        a = segment_rgb(seq.frames[i], seq.frames[i - 1], model, index=i)
        b = segment_rgb(seq.frames[i], seq.frames[i - 1], model, index=i)
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_complement_annihilates(self, shadow_sequence):
        seq = shadow_sequence
        i = seq.gt_indices[3]
        all_static = MotionMask(np.ones(seq.frames[i].shape[:2]), 0.0)
        out = segment_depth(seq.depth_frames[i], all_static, OracleBackground("depth", seq.background_depth), index=i)
        assert not out.mask.any()

    def test_planted_noise_removed(self, rng):
        bg = np.zeros((16, 16, 1), np.float32)
        x = bg.copy()
        x[4:8, 4:8] = -0.6  # object
        x[12, 1] = x[1, 13] = 0.9  # off-object noise
        static = np.ones((16, 16), np.uint8)
        static[3:9, 3:9] = 0
        cfg = PipelineConfig(rule=ThresholdRule("fixed", tau=0.3))
        out = segment_depth(x, MotionMask(static, 1.0), OracleBackground("depth", {0: bg}), cfg, index=0)
        expected = np.zeros((16, 16), np.uint8)
        expected[4:8, 4:8] = 1
        np.testing.assert_array_equal(out.mask, expected)

    def test_modality_mismatch(self, shadow_sequence, tiny_checkpoint):
        seq = shadow_sequence
        with pytest.raises(ConfigurationError):
            segment_rgb(seq.frames[5], seq.frames[4], OracleBackground("depth", seq.background_depth))
        with pytest.raises(ConfigurationError):
            segment_depth(seq.depth_frames[5], MotionMask(np.ones((64, 64)), 0.0), GanBackground(tiny_checkpoint))
        with pytest.raises(ConfigurationError):
            run_pipeline(seq.frames, None, [5], OracleBackground("rgb", seq.background_rgb),
                         OracleBackground("depth", seq.background_depth))

    def test_parallel_matches_serial(self, shadow_sequence):
        seq = shadow_sequence
        idx = seq.gt_indices[:6]
        args = (seq.frames, seq.depth_frames, idx, OracleBackground("rgb", seq.background_rgb),
                OracleBackground("depth", seq.background_depth))
        serial = run_pipeline(*args, workers=1)
        parallel = run_pipeline(*args, workers=3)
        assert [o.index for o in parallel] == idx
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.fused.mask, b.fused.mask)


def test_gan_background_runs(tiny_checkpoint):
    from foregan.inversion import InversionConfig
    from foregan.data import synth_generate
    from fixtures.make_fixtures import tiny_scene

    seq = synth_generate(3, tiny_scene())
    model = GanBackground(tiny_checkpoint, InversionConfig(steps=5), batch_size=4)
    outs = run_pipeline(seq.frames, None, seq.gt_indices[:3], model, cfg=PipelineConfig())
    assert all(o.rgb_inversion is not None and len(o.rgb_inversion.trajectory) == 5 for o in outs)
    warm = GanBackground(tiny_checkpoint, InversionConfig(steps=5, warm_start=True))
    assert len(warm.generate(seq.frames[:2], [0, 1])) == 2


def test_previous_index():
    assert previous_index(0, 10) == 1
    assert previous_index(4, 10) == 3
    assert previous_index(0, 1) == 0
