import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from foregan.errors import DataError, ParameterError, ShapeError
from foregan.flow import (
    FarnebackFlow,
    FlowField,
    MotionMask,
    PyramidalHornSchunck,
    apply_threshold,
    complement,
    estimate_flow,
    flow_to_color,
    get_estimator,
    motion_mask,
    resize_mask,
)


def _textured(size=64, seed=0):
    import cv2

    rng = np.random.default_rng(seed)
    img = cv2.GaussianBlur(rng.uniform(-1, 1, (size, size)), (0, 0), 2.0)
    img = img / np.abs(img).max()
    return np.repeat(img[..., None], 3, axis=2).astype(np.float32)


def _shift(img, dx, dy):
    return np.roll(np.roll(img, dy, axis=0), dx, axis=1)


def _field(u, v=None):
    u = np.asarray(u, dtype=np.float64)
    return FlowField(u, np.zeros_like(u) if v is None else np.asarray(v, dtype=np.float64))


class TestMotionMask:
    def test_half_moving(self):
        u = np.zeros((4, 4))
        u[:, 2:] = 2.0
        m = motion_mask(_field(u))
        assert m.threshold_used == 1.0
        expected = np.zeros((4, 4), np.uint8)
        expected[:, :2] = 1
        np.testing.assert_array_equal(m.mask, expected)

    def test_all_zero_is_static(self):
        m = motion_mask(_field(np.zeros((5, 5))))
        assert m.mask.all()

    def test_uniform_motion_is_all_moving(self):
        # no pixel lies strictly below the mean
        m = motion_mask(_field(np.full((5, 5), 5.0)))
        assert not m.mask.any()

    def test_below_eps_is_static(self):
        u = np.zeros((4, 4))
        u[0, 0] = 1e-3
        assert motion_mask(_field(u)).mask.all()

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite(self, bad):
        u = np.zeros((3, 3))
        u[1, 1] = bad
        with pytest.raises(DataError):
            motion_mask(_field(u))

    def test_field_shape_mismatch(self):
        with pytest.raises(ShapeError):
            FlowField(np.zeros((3, 3)), np.zeros((3, 4)))

    def test_mask_validation(self):
        with pytest.raises(ParameterError):
            MotionMask(np.full((2, 2), 2), 0.0)
        with pytest.raises(ParameterError):
            MotionMask(np.ones((2, 2)), -1.0)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (6, 7), elements=st.floats(-20, 20)),
           arrays(np.float64, (6, 7), elements=st.floats(-20, 20)))
    def test_threshold_reapplies_exactly(self, u, v):
        f = FlowField(u, v)
        m = motion_mask(f)
        assert m.threshold_used == pytest.approx(float(f.magnitude.mean()))
        np.testing.assert_array_equal(apply_threshold(f, m.threshold_used), m.mask)
        assert set(np.unique(m.mask)) <= {0, 1}

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.uint8, (5, 5), elements=st.integers(0, 1)))
    def test_complement(self, mask):
        m = MotionMask(mask, 0.3)
        c = complement(m)
        np.testing.assert_array_equal(complement(c).mask, mask)
        assert not (c.mask & m.mask).any()
        assert (c.mask | m.mask).all()
        assert c.threshold_used == 0.3

    def test_resize_nearest(self):
        mask = np.zeros((4, 4), np.uint8)
        mask[:2, :2] = 1
        out = resize_mask(MotionMask(mask, 1.0), (8, 8))
        assert out.mask.shape == (8, 8)
        assert out.mask[:4, :4].all() and not out.mask[4:, :].any()


class TestEstimators:
    @pytest.mark.parametrize("dx,dy", [(1, 0), (0, 2), (-1, 1)])
    def test_translation_horn_schunck(self, dx, dy):
        prev = _textured()
        curr = _shift(prev, dx, dy)
        f = estimate_flow(prev, curr)
        core = (slice(8, -8), slice(8, -8))
        assert abs(np.median(f.u[core]) - dx) <= 0.25
        assert abs(np.median(f.v[core]) - dy) <= 0.25

    def test_translation_farneback(self):
        prev = _textured()
        curr = _shift(prev, 1, 0)
        f = estimate_flow(prev, curr, FarnebackFlow())
        core = (slice(8, -8), slice(8, -8))
        assert abs(np.median(f.u[core]) - 1) <= 0.25
        assert abs(np.median(f.v[core])) <= 0.25

    def test_identical_frames(self):
        x = _textured()
        f = estimate_flow(x, x)
        assert np.abs(f.magnitude).max() < 1e-6
        assert motion_mask(f).mask.all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            estimate_flow(np.zeros((8, 8, 3)), np.zeros((8, 9, 3)))

    def test_registry(self):
        assert isinstance(get_estimator("horn_schunck"), PyramidalHornSchunck)
        assert isinstance(get_estimator("farneback"), FarnebackFlow)
        with pytest.raises(ParameterError):
            get_estimator("lucas")

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            PyramidalHornSchunck(levels=0)

    def test_moving_square_marks_square(self):
        rng = np.random.default_rng(1)
        bg = _textured(32, seed=9) * 0.3
        patch = rng.uniform(-1, 1, (6, 6, 3)).astype(np.float32)
        prev, curr = bg.copy(), bg.copy()
        prev[10:16, 10:16] = patch
        curr[10:16, 12:18] = patch
        m = motion_mask(estimate_flow(prev, curr))
        assert m.mask[0:4, 0:4].all()
        assert not m.mask[12, 14]

    def test_deterministic(self):
        prev = _textured(seed=4)
        curr = _shift(prev, 1, 1)
        a, b = estimate_flow(prev, curr), estimate_flow(prev, curr)
        assert a.u.tobytes() == b.u.tobytes() and a.v.tobytes() == b.v.tobytes()


def test_flow_to_color():
    u = np.zeros((4, 4))
    u[:, 2:] = 1.0
    img = flow_to_color(_field(u))
    assert img.shape == (4, 4, 3) and img.dtype == np.uint8
    assert img[:, :2].max() == 0
    assert img[:, 2:].max() == 255
    assert flow_to_color(_field(np.zeros((3, 3)))).max() == 0
