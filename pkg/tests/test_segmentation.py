import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from meshinspect.rpca import SolverConfig, solve
from meshinspect.segmentation import auto_thresholds, double_threshold


class TestAutoThresholds:
    def test_k_sigma_formula(self):
        rng = np.random.default_rng(0)
        E = rng.normal(0.0, 0.01, (64, 64))
        t1, t2 = auto_thresholds(E, k=3.0)
        mu, sigma = E.mean(), E.std()
        assert t1 == pytest.approx(min(mu - 3 * sigma, 0.0))
        assert t2 == pytest.approx(max(mu + 3 * sigma, 0.0))
        assert abs(t1 + 0.03) < 0.005 and abs(t2 - 0.03) < 0.005

    def test_constant_input(self):
        assert auto_thresholds(np.zeros((8, 8))) == (0.0, 0.0)
        assert auto_thresholds(np.full((8, 8), 0.7)) == (0.0, 0.0)

    def test_clamped_around_zero(self):
        E = np.abs(np.random.default_rng(1).normal(1.0, 0.01, (32, 32)))
        t1, t2 = auto_thresholds(E, k=3.0)
        assert t1 <= 0.0 <= t2

    def test_spike_outside_band(self):
        rng = np.random.default_rng(2)
        D = np.outer(rng.uniform(0.2, 0.9, 64), rng.uniform(0.2, 0.9, 64))
        D[9, 13] += 0.5
        dec = solve(D, np.ones_like(D), SolverConfig())
        t1, t2 = auto_thresholds(dec.E, k=3.0)
        assert dec.E[9, 13] > t2  # the spike survives thresholding

    def test_invalid_k(self):
        with pytest.raises(ValueError, match="k must be positive"):
            auto_thresholds(np.zeros((4, 4)), k=0.0)


class TestDoubleThreshold:
    def test_three_way_split(self):
        E = np.array([[-0.5, 0.0, 0.5]])
        seg = double_threshold(E, -0.1, 0.1)
        np.testing.assert_array_equal(seg.broken_mask, [[True, False, False]])
        np.testing.assert_array_equal(seg.block_mask, [[False, False, True]])
        np.testing.assert_array_equal(seg.defect_mask, [[True, False, True]])

    def test_zero_thresholds_boundary(self):
        E = np.array([[-0.2, 0.0, 0.3]])
        seg = double_threshold(E, 0.0, 0.0)
        np.testing.assert_array_equal(seg.broken_mask, [[True, True, False]])
        np.testing.assert_array_equal(seg.block_mask, [[False, False, True]])

    def test_all_zero_input_empty_masks(self):
        seg = double_threshold(np.zeros((4, 4)), -0.1, 0.1)
        assert not seg.defect_mask.any()
        assert not seg.broken_mask.any()
        assert not seg.block_mask.any()

    def test_t1_greater_than_t2_rejected(self):
        with pytest.raises(ValueError, match="t1"):
            double_threshold(np.zeros((2, 2)), 0.2, 0.1)

    @settings(max_examples=40, deadline=None)
    @given(hnp.arrays(np.float64, (6, 6), elements=st.floats(-1, 1)),
           st.floats(-0.5, 0.0), st.floats(0.0, 0.5), st.floats(0.0, 0.3))
    def test_widening_never_adds_defects(self, E, t1, t2, extra):
        narrow = double_threshold(E, t1, t2)
        wide = double_threshold(E, t1 - extra, t2 + extra)
        assert not (wide.defect_mask & ~narrow.defect_mask).any()

    @settings(max_examples=40, deadline=None)
    @given(hnp.arrays(np.float64, (6, 6), elements=st.floats(-1, 1)),
           st.floats(-0.5, 0.5), st.floats(0, 0.5))
    def test_masks_disjoint_and_union(self, E, t1, width):
        seg = double_threshold(E, t1, t1 + width)
        assert not (seg.broken_mask & seg.block_mask).any()
        np.testing.assert_array_equal(seg.defect_mask,
                                      seg.broken_mask | seg.block_mask)

    def test_commutes_with_pixel_permutation(self):
        rng = np.random.default_rng(3)
        E = rng.normal(size=(5, 5))
        perm = rng.permutation(25)
        seg = double_threshold(E, -0.2, 0.2)
        seg_p = double_threshold(E.ravel()[perm].reshape(5, 5), -0.2, 0.2)
        np.testing.assert_array_equal(seg.defect_mask.ravel()[perm],
                                      seg_p.defect_mask.ravel())
