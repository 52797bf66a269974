import json

import numpy as np
import pytest

from ..errors import DimensionError, FormatError, InputError
from ..masks.rle import BinaryMask, encode
from .tracklet import (
    Proposal,
    Tracklet,
    TrackletSet,
    load_proposals,
    load_tracklet_set,
    save_proposals,
    save_tracklet_set,
)


def square_mask(x, y, size=2, shape=(6, 6)):
    grid = np.zeros(shape, dtype=bool)
    grid[y : y + size, x : x + size] = True
    return encode(grid)


class TestTrackletValidation:
    """Test tracklet invariants."""

    def test_length_mismatch(self):
        """Test masks and probabilities must have equal length."""
        with pytest.raises(InputError):
            Tracklet("a", 0, "htc", (BinaryMask.empty(2, 2),) * 2, 1.0, (1.0,))

    def test_source_frame_probability_must_be_one(self):
        """Test the key frame is certain."""
        with pytest.raises(InputError):
            Tracklet("a", 1, "htc", (BinaryMask.empty(2, 2),) * 2, 1.0, (1.0, 0.5))

    def test_confidence_range(self):
        """Test confidence outside [0, 1] is rejected."""
        with pytest.raises(InputError):
            Tracklet("a", 0, "htc", (BinaryMask.empty(2, 2),), 1.5, (1.0,))

    def test_set_rejects_mismatched_members(self):
        """Test members must share the video dimensions."""
        t = Tracklet("a", 0, "htc", (BinaryMask.empty(3, 2),), 1.0, (1.0,))

        with pytest.raises(DimensionError):
            TrackletSet("v", 2, 2, 1, (t,))

    def test_set_rejects_duplicate_ids(self):
        """Test ids must be unique."""
        t = Tracklet("a", 0, "htc", (BinaryMask.empty(2, 2),), 1.0, (1.0,))

        with pytest.raises(InputError):
            TrackletSet("v", 2, 2, 1, (t, t))

    def test_select_orders_by_ids(self):
        """Test subset selection."""
        members = tuple(
            Tracklet(f"{i:04d}", 0, "htc", (BinaryMask.empty(2, 2),), 1.0, (1.0,))
            for i in range(3)
        )
        subset = TrackletSet("v", 2, 2, 1, members).select(["0002", "0000"])

        assert [t.id for t in subset] == ["0002", "0000"]


class TestTrackletFiles:
    """Test TrackletSet and proposal JSON files."""

    def setup_method(self):
        """Set up a two-tracklet set."""
        self.set = TrackletSet(
            "video-001",
            6,
            6,
            2,
            (
                Tracklet(
                    "0000",
                    0,
                    "htc",
                    (square_mask(0, 0), square_mask(1, 0)),
                    0.9,
                    (1.0, 0.75),
                ),
                Tracklet(
                    "0001",
                    1,
                    "condinst",
                    (square_mask(3, 3), square_mask(3, 4)),
                    0.5,
                    (0.25, 1.0),
                ),
            ),
        )

    def test_round_trip_byte_identical(self, tmp_path):
        """Test write -> read -> write is byte-identical."""
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_tracklet_set(self.set, first)
        loaded = load_tracklet_set(first)
        save_tracklet_set(loaded, second)

        assert loaded == self.set
        assert first.read_bytes() == second.read_bytes()

    def test_layout(self, tmp_path):
        """Test the documented top-level keys."""
        path = tmp_path / "a.json"
        save_tracklet_set(self.set, path)
        data = json.loads(path.read_text())

        assert list(data) == ["video_id", "width", "height", "num_frames", "tracklets"]
        assert data["tracklets"][0]["masks"][0]["size"] == [6, 6]

    def test_malformed_file(self, tmp_path):
        """Test invalid JSON raises a format error."""
        path = tmp_path / "bad.json"
        path.write_text("{not json")

        with pytest.raises(FormatError):
            load_tracklet_set(path)

    def test_proposal_round_trip(self, tmp_path):
        """Test proposals only carry the source-frame mask."""
        video = TrackletSet("video-001", 6, 6, 3)
        proposals = [Proposal(1, square_mask(2, 2), 0.7, "htc", "p0")]
        path = tmp_path / "proposals.json"
        save_proposals(video, proposals, path)

        data = json.loads(path.read_text())
        assert data["tracklets"][0]["masks"][0] is None
        assert data["tracklets"][0]["masks"][1] is not None

        loaded_video, loaded = load_proposals(path)
        assert loaded_video.dims == (6, 6, 3)
        assert loaded == proposals

    def test_proposal_without_source_mask(self, tmp_path):
        """Test a proposal missing its key-frame mask is rejected."""
        path = tmp_path / "proposals.json"
        path.write_text(
            json.dumps(
                {
                    "video_id": "v",
                    "width": 2,
                    "height": 2,
                    "num_frames": 2,
                    "tracklets": [
                        {
                            "id": "a",
                            "source_frame": 0,
                            "confidence": 1.0,
                            "masks": [None, None],
                        }
                    ],
                }
            )
        )

        with pytest.raises(InputError):
            load_proposals(path)
