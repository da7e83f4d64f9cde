import numpy as np
import pytest

from coassign.diagnostics import (CurvePoint, ForegroundMask, ScoreMap,
                                  binding_from_match, default_thresholds,
                                  discriminability_map, iof_iob_at_threshold,
                                  iof_iob_curve, matching_instability,
                                  mean_curve)
from coassign.errors import InvalidInputError
from coassign.matcher import MatchResult
from coassign.priors import ScalarMap


class TestDiscriminabilityMap:
    def test_constant_level(self):
        D = discriminability_map([ScalarMap(1, np.full((2, 2), 3.0))], 8, 8)
        assert np.all(D.values == 1.0)

    def test_two_levels(self):
        D = discriminability_map([ScalarMap(1, np.array([[1.0, 2.0]])), ScalarMap(2, np.array([[4.0, 4.0]]))], 1, 2)
        np.testing.assert_allclose(D.values, [[0.75, 1.0]])

    def test_all_zero_maps(self):
        D = discriminability_map([ScalarMap(1, np.zeros((2, 2))), ScalarMap(2, np.zeros((1, 1)))], 4, 4)
        assert np.all(D.values == 0.0)

    def test_invariant_to_level_rescaling(self, rng):
        maps = [rng.uniform(0, 5, size=(4, 4)), rng.uniform(0, 5, size=(2, 2))]
        a = discriminability_map([ScalarMap(1, maps[0]), ScalarMap(2, maps[1])], 16, 16)
        b = discriminability_map([ScalarMap(1, maps[0] * 7.0), ScalarMap(2, maps[1])], 16, 16)
        np.testing.assert_allclose(a.values, b.values)
        assert a.values.min() >= 0 and a.values.max() <= 1

    def test_needs_a_level(self):
        with pytest.raises(InvalidInputError):
            discriminability_map([], 4, 4)


class TestForegroundMask:
    def test_from_boxes(self):
        fg = ForegroundMask.from_boxes([[0, 0, 2, 1]], image_h=2, image_w=3)
        assert fg.values.tolist() == [[True, True, False], [False, False, False]]

    def test_non_binary_rejected(self):
        with pytest.raises(InvalidInputError):
            ForegroundMask(np.array([[0, 2]]))

    def test_score_range_checked(self):
        with pytest.raises(InvalidInputError):
            ScoreMap(np.array([[1.5]]))


class TestIofIob:
    D = ScoreMap(np.array([[1.0, 0.0], [0.0, 0.0]]))
    FG = ForegroundMask(np.array([[1, 1], [0, 0]]))

    def test_hand_counts(self):
        assert iof_iob_at_threshold(self.D, self.FG, 0.5) == (0.5, 0.0)

    def test_everything_active_below_min(self):
        assert iof_iob_at_threshold(self.D, self.FG, -0.1) == (1.0, 1.0)

    def test_empty_background(self):
        fg = ForegroundMask(np.ones((2, 2)))
        assert iof_iob_at_threshold(self.D, fg, 0.5) == (0.25, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            iof_iob_at_threshold(self.D, ForegroundMask(np.ones((3, 3))), 0.5)

    def test_curve_at_hand_thresholds(self):
        curve = iof_iob_curve(self.D, self.FG, [0.25, 0.5, 0.75])
        assert curve == [CurvePoint(0.25, 0.5, 0.0), CurvePoint(0.5, 0.5, 0.0), CurvePoint(0.75, 0.5, 0.0)]

    def test_curve_extremes(self):
        D = ScoreMap(np.array([[0.2, 0.4], [0.6, 0.8]]))
        curve = iof_iob_curve(D, self.FG, [0.1, 0.9])
        assert [(p.iof, p.iob) for p in curve] == [(1.0, 1.0), (0.0, 0.0)]

    def test_separable_map_reaches_ideal_point(self):
        D = ScoreMap(np.array([[1.0, 1.0], [0.0, 0.0]]))
        curve = iof_iob_curve(D, self.FG)
        assert any(p.iof == 1.0 and p.iob == 0.0 for p in curve)

    def test_constant_map_steps_at_one(self):
        D = ScoreMap(np.ones((2, 2)))
        curve = iof_iob_curve(D, self.FG)
        assert all((p.iof, p.iob) == (1.0, 1.0) for p in curve[:-1])
        assert (curve[-1].iof, curve[-1].iob) == (0.0, 0.0)

    def test_curve_agrees_with_pointwise_counts(self, rng):
        D = ScoreMap(rng.uniform(size=(6, 7)))
        fg = ForegroundMask(rng.integers(0, 2, size=(6, 7)))
        thresholds = default_thresholds(32)
        for point in iof_iob_curve(D, fg, thresholds):
            assert (point.iof, point.iob) == iof_iob_at_threshold(D, fg, point.S)

    def test_monotone_on_random_maps(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            h, w = (int(v) for v in rng.integers(1, 9, size=2))
            D = ScoreMap(rng.uniform(size=(h, w)))
            fg = ForegroundMask(rng.integers(0, 2, size=(h, w)))
            curve = iof_iob_curve(D, fg, default_thresholds(64))
            iof = np.array([p.iof for p in curve])
            iob = np.array([p.iob for p in curve])
            assert np.all(np.diff(iof) <= 0) and np.all(np.diff(iob) <= 0)

    def test_default_threshold_count(self):
        assert len(iof_iob_curve(self.D, self.FG)) == 256

    def test_unsorted_thresholds(self):
        with pytest.raises(InvalidInputError):
            iof_iob_curve(self.D, self.FG, [0.5, 0.25])

    def test_mean_curve(self):
        a = [CurvePoint(0.0, 1.0, 0.5), CurvePoint(1.0, 0.0, 0.0)]
        b = [CurvePoint(0.0, 0.5, 0.5), CurvePoint(1.0, 0.0, 0.0)]
        assert mean_curve([a, b]) == [CurvePoint(0.0, 0.75, 0.5), CurvePoint(1.0, 0.0, 0.0)]
        with pytest.raises(InvalidInputError):
            mean_curve([a, [CurvePoint(0.5, 1.0, 1.0), CurvePoint(1.0, 0.0, 0.0)]])


class TestInstability:
    def test_identical_matchings(self):
        binding = {0: 3, 1: 7}
        report = matching_instability([[binding], [binding]])
        assert report.pairs == ((1, 2, 0.0),)
        assert report.mean == 0.0

    def test_half_churn(self):
        report = matching_instability([[{0: 3, 1: 7}], [{0: 3, 1: 5}]])
        assert report.rows() == [('1-2', 0.5)]

    def test_full_churn_and_unmatched(self):
        report = matching_instability([[{0: 1, 1: None}], [{0: 2, 1: 4}]])
        assert report.mean == 1.0

    def test_symmetric(self):
        a, b = [{0: 3, 1: 7, 2: 1}], [{0: 3, 1: 5, 2: 2}]
        assert matching_instability([a, b]).mean == matching_instability([b, a]).mean

    def test_averages_over_images_and_pairs(self):
        e1 = [{0: 1}, {0: 1, 1: 2}, {}]
        e2 = [{0: 2}, {0: 1, 1: 2}, {}]
        e3 = [{0: 2}, {0: 1, 1: 3}, {}]
        report = matching_instability([e1, e2, e3])
        assert [p[2] for p in report.pairs] == [pytest.approx(0.5), pytest.approx(0.25)]
        assert report.mean == pytest.approx(0.375)

    def test_binding_from_match(self):
        match = MatchResult(pairs=((1, 0), (4, 2)), total_cost=0.0)
        assert binding_from_match(match, 3) == {0: 1, 1: None, 2: 4}
        with pytest.raises(InvalidInputError):
            binding_from_match(match, 2)

    def test_needs_two_epochs(self):
        with pytest.raises(InvalidInputError):
            matching_instability([[{0: 1}]])

    def test_image_count_mismatch(self):
        with pytest.raises(InvalidInputError):
            matching_instability([[{0: 1}], [{0: 1}, {0: 2}]])

    def test_gt_set_mismatch(self):
        with pytest.raises(InvalidInputError):
            matching_instability([[{0: 1}], [{0: 1, 1: 2}]])
