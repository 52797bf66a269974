import numpy as np
import pytest

from ..errors import DimensionError, InputError
from ..masks.rle import BinaryMask, encode
from .nms import (
    iou_matrix,
    merge_sources,
    tracklet_iou,
    tracklet_nms,
    tracklet_score,
)
from .tracklet import Tracklet, TrackletSet


def make_tracklet(
    grids, tid="0000", confidence=1.0, prop_prob=None, source_frame=0, source="htc"
):
    masks = tuple(encode(g) for g in grids)
    if prop_prob is None:
        prop_prob = [1.0] * len(masks)
    return Tracklet(tid, source_frame, source, masks, confidence, tuple(prop_prob))


def pixels(shape, coords):
    grid = np.zeros(shape, dtype=bool)
    for row, col in coords:
        grid[row, col] = True
    return grid


def dense_tracklet_iou(p_grids, q_grids):
    inter = sum(int(np.sum(a & b)) for a, b in zip(p_grids, q_grids, strict=True))
    union = sum(int(np.sum(a | b)) for a, b in zip(p_grids, q_grids, strict=True))
    return 1.0 if union == 0 else inter / union


def random_tracklet_grids(rng, frames, shape):
    density = rng.random() * 0.5
    return [rng.random(shape) < density for _ in range(frames)]


def reference_greedy_nms(scores, ids, dense_ious, threshold, max_keep):
    """Index-based greedy NMS over a precomputed dense IoU matrix."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], ids[i]))
    suppressed = [False] * len(scores)
    keep = []
    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        keep.append(i)
        if len(keep) == max_keep:
            break
        for j in order[pos + 1 :]:
            if dense_ious[i][j] >= threshold:
                suppressed[j] = True
    return keep


class TestTrackletIou:
    """Test tracklet-IoU against dense pixel summation."""

    def test_self_is_one(self):
        """Test a nonempty tracklet against itself."""
        t = make_tracklet([pixels((4, 4), [(1, 1), (2, 2)])] * 3)

        assert tracklet_iou(t, t) == 1.0

    def test_disjoint(self):
        """Test frame-wise disjoint tracklets."""
        p = make_tracklet([pixels((4, 4), [(0, 0)])] * 2)
        q = make_tracklet([pixels((4, 4), [(3, 3)])] * 2, tid="0001")

        assert tracklet_iou(p, q) == 0.0

    def test_global_ratio_not_mean(self):
        """Test (1 + 1) / (3 + 1) over two frames."""
        p = make_tracklet([pixels((3, 3), [(0, 0), (0, 1)]), pixels((3, 3), [(1, 1)])])
        q = make_tracklet(
            [pixels((3, 3), [(0, 1), (0, 2)]), pixels((3, 3), [(1, 1)])], tid="0001"
        )

        assert tracklet_iou(p, q) == pytest.approx(0.5)

    def test_both_empty(self):
        """Test two all-empty tracklets match perfectly."""
        empty = [np.zeros((3, 3), dtype=bool)] * 2
        p = make_tracklet(empty)
        q = make_tracklet(empty, tid="0001")

        assert tracklet_iou(p, q) == 1.0

    def test_dimension_mismatch(self):
        """Test differing frame counts are rejected."""
        p = make_tracklet([np.ones((3, 3), dtype=bool)] * 2)
        q = make_tracklet([np.ones((3, 3), dtype=bool)] * 3, tid="0001")

        with pytest.raises(DimensionError):
            tracklet_iou(p, q)

    def test_matches_dense_oracle(self):
        """Test random tracklet pairs against the dense oracle."""
        rng = np.random.default_rng(21)
        for _ in range(1000):
            frames = int(rng.integers(1, 9))
            shape = tuple(int(v) for v in rng.integers(1, 33, size=2))
            pg = random_tracklet_grids(rng, frames, shape)
            qg = random_tracklet_grids(rng, frames, shape)
            p, q = make_tracklet(pg), make_tracklet(qg, tid="0001")

            expected = dense_tracklet_iou(pg, qg)
            assert tracklet_iou(p, q) == expected
            assert tracklet_iou(q, p) == expected
            assert 0.0 <= expected <= 1.0

    def test_iou_matrix_threads_match_sequential(self):
        """Test the threaded matrix equals the sequential one."""
        rng = np.random.default_rng(2)
        tracklets = [
            make_tracklet(random_tracklet_grids(rng, 3, (8, 8)), tid=f"{i:04d}")
            for i in range(6)
        ]

        threaded = iou_matrix(tracklets, workers=4)
        np.testing.assert_array_equal(threaded, iou_matrix(tracklets))


class TestTrackletScore:
    """Test the confidence x mean propagation probability rule."""

    def test_perfect(self):
        """Test full confidence and probabilities."""
        t = make_tracklet([np.ones((2, 2), dtype=bool)] * 3)

        assert tracklet_score(t) == 1.0

    def test_zero_confidence(self):
        """Test zero confidence zeroes the score."""
        grids = [np.ones((2, 2), dtype=bool)] * 3
        t = make_tracklet(grids, confidence=0.0, prop_prob=[1.0, 0.3, 0.9])

        assert tracklet_score(t) == 0.0

    def test_mean_probability(self):
        """Test 0.8 x mean(1.0, 0.5, 0.0) == 0.4."""
        grids = [np.ones((2, 2), dtype=bool)] * 3
        t = make_tracklet(grids, confidence=0.8, prop_prob=[1.0, 0.5, 0.0])

        assert tracklet_score(t) == pytest.approx(0.4)

    def test_monotone_in_confidence(self):
        """Test raising confidence never lowers the score."""
        grids = [np.ones((2, 2), dtype=bool)] * 3
        scores = [
            tracklet_score(
                make_tracklet(grids, confidence=c, prop_prob=[1.0, 0.2, 0.7])
            )
            for c in np.linspace(0, 1, 11)
        ]

        assert scores == sorted(scores)


class TestMergeSources:
    """Test multi-source proposal merging."""

    def setup_method(self):
        """Set up two sources that reuse the same ids."""
        grid = [np.ones((2, 2), dtype=bool)] * 2
        self.a = TrackletSet(
            "v",
            2,
            2,
            2,
            tuple(make_tracklet(grid, tid=f"{i:04d}", source="htc") for i in range(3)),
        )
        self.b = TrackletSet(
            "v",
            2,
            2,
            2,
            tuple(
                make_tracklet(grid, tid=f"{i:04d}", source="condinst") for i in range(2)
            ),
        )

    def test_single_source(self):
        """Test one source is returned as-is."""
        assert merge_sources([self.a]) == self.a

    def test_concatenation_and_unique_ids(self):
        """Test 3 + 2 tracklets with unique ids and preserved tags."""
        merged = merge_sources([self.a, self.b])
        ids = [t.id for t in merged]

        assert len(merged) == 5
        assert len(set(ids)) == 5
        assert [t.source_model for t in merged] == ["htc"] * 3 + ["condinst"] * 2

    def test_dimension_mismatch(self):
        """Test sets with different frame counts cannot merge."""
        other = TrackletSet("v", 2, 2, 3)

        with pytest.raises(DimensionError):
            merge_sources([self.a, other])


class TestTrackletNms:
    """Test greedy tracklet NMS."""

    def test_empty_set(self):
        """Test NMS over nothing returns nothing."""
        assert len(tracklet_nms(TrackletSet("v", 4, 4, 2))) == 0

    def test_single_tracklet_kept(self):
        """Test a lone tracklet survives."""
        t = make_tracklet([np.ones((2, 2), dtype=bool)])
        kept = tracklet_nms(TrackletSet("v", 2, 2, 1, (t,)))

        assert [k.id for k in kept] == ["0000"]

    def test_identical_pair(self):
        """Test the higher-scoring duplicate wins."""
        grids = [pixels((4, 4), [(1, 1), (1, 2)])] * 2
        low = make_tracklet(grids, tid="0000", confidence=0.8)
        high = make_tracklet(grids, tid="0001", confidence=0.9)
        kept = tracklet_nms(TrackletSet("v", 4, 4, 2, (low, high)), 0.5)

        assert [k.id for k in kept] == ["0001"]

    def test_keep_limit(self):
        """Test 12 disjoint tracklets with max_keep 10 keep the top 10."""
        tracklets = []
        for i in range(12):
            grid = np.zeros((4, 4), dtype=bool)
            grid.ravel()[i] = True
            tracklets.append(
                make_tracklet([grid], tid=f"{i:04d}", confidence=(i + 1) / 12)
            )
        kept = tracklet_nms(TrackletSet("v", 4, 4, 1, tuple(tracklets)), 0.5, 10)

        assert len(kept) == 10
        assert {k.id for k in kept} == {f"{i:04d}" for i in range(2, 12)}

    def test_tie_broken_by_smaller_id(self):
        """Test equal scores prefer the smaller id."""
        grids = [np.ones((2, 2), dtype=bool)]
        pair = (make_tracklet(grids, tid="0007"), make_tracklet(grids, tid="0003"))
        kept = tracklet_nms(TrackletSet("v", 2, 2, 1, pair))

        assert [k.id for k in kept] == ["0003"]

    def test_invalid_max_keep(self):
        """Test max_keep below one is rejected."""
        with pytest.raises(InputError):
            tracklet_nms(TrackletSet("v", 2, 2, 1), max_keep=0)

    def test_matches_reference_greedy(self):
        """Test NMS against an independent greedy reference on random sets."""
        rng = np.random.default_rng(99)
        for trial in range(200):
            frames = int(rng.integers(1, 5))
            shape = (8, 8)
            n = int(rng.integers(0, 21))
            grids = []
            tracklets = []
            for i in range(n):
                if grids and rng.random() < 0.4:
                    # near-duplicate of an earlier tracklet
                    base = grids[int(rng.integers(len(grids)))]
                    g = [frame ^ (rng.random(shape) < 0.05) for frame in base]
                else:
                    g = random_tracklet_grids(rng, frames, shape)
                grids.append(g)
                tail = [float(round(rng.random(), 2)) for _ in range(frames - 1)]
                conf = float(round(rng.random(), 1))
                tracklets.append(
                    make_tracklet(
                        g, tid=f"{i:04d}", confidence=conf, prop_prob=[1.0, *tail]
                    )
                )

            threshold = float(rng.choice([0.3, 0.5, 0.7]))
            max_keep = int(rng.integers(1, 12))
            dense = [[dense_tracklet_iou(a, b) for b in grids] for a in grids]
            scores = [tracklet_score(t) for t in tracklets]
            ids = [t.id for t in tracklets]
            order = reference_greedy_nms(scores, ids, dense, threshold, max_keep)
            expected = [ids[i] for i in order]

            kept = tracklet_nms(
                TrackletSet("v", 8, 8, frames, tuple(tracklets)), threshold, max_keep,
                workers=2 if trial % 2 else 1,
            )
            kept_ids = [t.id for t in kept]
            assert kept_ids == expected, f"trial {trial}"
            assert len(kept) <= max_keep
            for i, a in enumerate(kept.tracklets):
                for b in kept.tracklets[i + 1 :]:
                    assert tracklet_iou(a, b) < threshold

    def test_empty_mask_frames_are_valid(self):
        """Test tracklets with vanished frames are accepted."""
        masks = (BinaryMask.full(2, 2), BinaryMask.empty(2, 2))
        t = Tracklet("0000", 0, "x", masks, 1.0, (1.0, 0.0))

        assert len(tracklet_nms(TrackletSet("v", 2, 2, 2, (t,)))) == 1
