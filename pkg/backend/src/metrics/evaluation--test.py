import math

import numpy as np
import pytest
from scipy import ndimage

from ..errors import InputError
from ..masks.rle import BinaryMask, encode
from ..tracklets.tracklet import MaskSequence
from .evaluation import (
    EvalReport,
    VideoScore,
    contour_accuracy,
    evaluate,
    format_report_table,
    region_similarity,
    resolve_tolerance,
)


def rect(x, y, w, h, shape=(20, 20)):
    grid = np.zeros(shape, dtype=bool)
    grid[y : y + h, x : x + w] = True
    return encode(grid)


def dense_iou(a, b):
    union = np.logical_or(a, b).sum()
    return 1.0 if union == 0 else np.logical_and(a, b).sum() / union


def dense_boundary_f(a, b, tol):
    """Pixel-set boundary matching written directly with numpy."""

    def edge(g):
        padded = np.pad(g, 1)
        inner = (
            padded[1:-1, 1:-1]
            & padded[:-2, 1:-1]
            & padded[2:, 1:-1]
            & padded[1:-1, :-2]
            & padded[1:-1, 2:]
        )
        return g & ~inner

    ea, eb = edge(a), edge(b)
    if not ea.any() and not eb.any():
        return 1.0
    if not ea.any() or not eb.any():
        return 0.0
    pa = [tuple(p) for p in np.argwhere(ea)]
    pb = [tuple(p) for p in np.argwhere(eb)]

    def near(p, q):
        return max(abs(p[0] - q[0]), abs(p[1] - q[1])) <= tol

    def matched(src, dst):
        return sum(1 for p in src if any(near(p, q) for q in dst))

    precision = matched(pa, pb) / len(pa)
    recall = matched(pb, pa) / len(pb)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


class TestRegionSimilarity:
    """Test J."""

    def test_identical(self):
        """Test identical sequences score 1."""
        seq = [rect(2, 2, 5, 5), rect(3, 3, 5, 5)]

        assert region_similarity(seq, seq) == 1.0

    def test_shifted_rectangle(self):
        """Test a 10x10 square shifted 5 columns scores 1/3."""
        pred = [rect(0, 0, 10, 10)] * 3
        gt = [rect(5, 0, 10, 10)] * 3

        assert region_similarity(pred, gt) == pytest.approx(1 / 3, abs=1e-12)

    def test_empty_prediction(self):
        """Test an empty prediction against an object scores 0."""
        assert region_similarity([BinaryMask.empty(20, 20)], [rect(1, 1, 3, 3)]) == 0.0

    def test_both_empty(self):
        """Test correctly predicting absence scores 1."""
        empty = BinaryMask.empty(20, 20)

        assert region_similarity([empty], [empty]) == 1.0

    def test_dense_oracle(self):
        """Test random sequences against per-pixel IoU."""
        rng = np.random.default_rng(0)
        for _ in range(100):
            frames = int(rng.integers(1, 6))
            a = rng.random((frames, 9, 11)) < 0.3
            b = rng.random((frames, 9, 11)) < 0.3
            expected = np.mean([dense_iou(a[t], b[t]) for t in range(frames)])

            ea, eb = [encode(g) for g in a], [encode(g) for g in b]

            actual = region_similarity(ea, eb)

            assert actual == pytest.approx(expected, abs=1e-12)
            assert actual == pytest.approx(region_similarity(eb, ea))

    def test_length_mismatch(self):
        """Test sequences must have equal length."""
        with pytest.raises(InputError):
            region_similarity([rect(0, 0, 2, 2)], [rect(0, 0, 2, 2)] * 2)


class TestContourAccuracy:
    """Test F."""

    def test_identical(self):
        """Test identical masks score 1."""
        seq = [rect(4, 4, 6, 6)]

        assert contour_accuracy(seq, seq, 0) == 1.0

    def test_far_apart(self):
        """Test boundaries farther apart than the tolerance score 0."""
        assert contour_accuracy([rect(0, 0, 3, 3)], [rect(15, 15, 3, 3)], 2) == 0.0

    def test_shifted_square_matches_oracle(self):
        """Test a 3x3 square shifted by one with tolerance 1."""
        a = np.zeros((8, 8), dtype=bool)
        a[2:5, 2:5] = True
        b = np.roll(a, 1, axis=1)

        score = contour_accuracy([encode(a)], [encode(b)], 1)

        assert score == pytest.approx(dense_boundary_f(a, b, 1))
        assert score == 1.0

    def test_random_pairs_match_oracle_and_shrink_monotonically(self):
        """Test 100 random pairs: oracle agreement and monotone tolerance."""
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = ndimage.binary_opening(rng.random((12, 12)) < 0.5)
            b = ndimage.binary_opening(rng.random((12, 12)) < 0.5)
            pred, gt = [encode(a)], [encode(b)]
            scores = [contour_accuracy(pred, gt, tol) for tol in range(4)]

            assert scores[1] == pytest.approx(dense_boundary_f(a, b, 1), abs=1e-12)
            assert all(lo <= hi + 1e-12 for lo, hi in zip(scores, scores[1:]))
            assert all(0.0 <= s <= 1.0 for s in scores)

    def test_one_side_empty(self):
        """Test an empty prediction against an object scores 0."""
        assert contour_accuracy([BinaryMask.empty(20, 20)], [rect(1, 1, 3, 3)]) == 0.0

    def test_auto_tolerance(self):
        """Test auto tolerance is 0.75% of the diagonal, rounded up."""
        assert resolve_tolerance("auto", 64, 64) == 1
        expected = math.ceil(0.0075 * math.hypot(854, 480))
        assert resolve_tolerance("auto", 854, 480) == expected

    def test_bad_tolerance(self):
        """Test negative tolerances are rejected."""
        with pytest.raises(InputError):
            resolve_tolerance(-1, 10, 10)


class TestEvaluate:
    """Test dataset-level aggregation."""

    def setup_method(self):
        self.gt = {
            "a": MaskSequence("a", (rect(0, 0, 10, 10),)),
            "b": MaskSequence("b", (rect(5, 5, 4, 4),)),
        }

    def test_perfect(self):
        """Test one perfect video reports 1.0 everywhere."""
        report = evaluate({"a": self.gt["a"]}, self.gt)

        assert (report.mean_j, report.mean_f, report.mean_jf) == (1.0, 1.0, 1.0)

    def test_unweighted_mean(self):
        """Test videos with J 0.2 and 0.8 average to 0.5."""
        report = EvalReport.from_scores(
            [VideoScore("x", 0.2, 0.2), VideoScore("y", 0.8, 0.8)]
        )

        assert report.mean_j == pytest.approx(0.5)

    def test_jf_identity(self):
        """Test J 60.0 and F 62.7 give J&F 61.4 after rounding."""
        report = EvalReport.from_scores([VideoScore("x", 0.600, 0.627)])

        assert report.mean_jf == (report.mean_j + report.mean_f) / 2
        assert abs(report.mean_jf * 100 - 61.4) < 0.1

    def test_missing_ground_truth(self):
        """Test a prediction without ground truth names the video."""
        with pytest.raises(InputError, match="zebra"):
            evaluate({"zebra": self.gt["a"]}, self.gt)

    def test_parallel_matches_serial(self):
        """Test worker count does not change the report."""
        pred = {"a": MaskSequence("a", (rect(1, 0, 10, 10),)), "b": self.gt["b"]}

        assert evaluate(pred, self.gt, workers=2) == evaluate(pred, self.gt)

    def test_table(self):
        """Test the table has a header, a rule, one row per video and the mean."""
        report = evaluate(dict(self.gt), self.gt)

        lines = format_report_table(report).splitlines()

        assert lines[0].split() == ["Video", "J&F", "J", "F"]
        assert len(lines) == 5
        assert lines[-1].split() == ["mean", "100.0", "100.0", "100.0"]
