import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ..masks.rle import BinaryMask, encode
from ..tracklets.tracklet import MaskSequence, Tracklet, TrackletSet
from .main import app

client = TestClient(app)


def box(x0, x1, size=8):
    grid = np.zeros((size, size), dtype=bool)
    grid[:, x0:x1] = True
    return encode(grid)


def upload(tracklet_set):
    body = json.dumps(tracklet_set.to_dict()).encode()
    return {"file": ("tracklets.json", body, "application/json")}


def post_nms(tracklet_set, **form):
    return client.post("/tracklets/nms", files=upload(tracklet_set), data=form)


@pytest.mark.api
class TestMainAPI:
    """Test the FastAPI application."""

    def test_health_endpoint(self):
        """Test health check endpoint."""
        response = client.get("/health")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert data["service"] == "tlground API"

    def test_invalid_endpoint_returns_404(self):
        """Test that unknown endpoints return 404."""
        assert client.get("/invalid-endpoint").status_code == 404


@pytest.mark.api
class TestTrackletNMS:
    """Test the tracklet NMS endpoint."""

    def setup_method(self):
        left, right = box(0, 4), box(5, 8)
        tracklets = (
            Tracklet("a", 0, "htc", (left, left), 0.9, (1.0, 1.0)),
            Tracklet("b", 1, "htc", (left, left), 0.8, (1.0, 1.0)),
            Tracklet("c", 0, "condinst", (right, right), 0.5, (1.0, 1.0)),
        )
        self.tracklets = TrackletSet("v1", 8, 8, 2, tracklets)

    def test_duplicates_suppressed(self):
        """Test an identical lower-scoring tracklet is removed."""
        response = post_nms(self.tracklets, threshold="0.5")

        assert response.status_code == 200
        data = response.json()
        assert data["kept_ids"] == ["a", "c"]
        assert data["suppressed"] == 1
        assert [t["id"] for t in data["tracklets"]["tracklets"]] == ["a", "c"]

    def test_max_keep(self):
        """Test the kept count is capped."""
        response = post_nms(self.tracklets, max_keep="1")

        assert response.json()["kept_ids"] == ["a"]

    def test_invalid_max_keep(self):
        """Test invalid NMS parameters are client errors."""
        response = post_nms(self.tracklets, max_keep="0")

        assert response.status_code == 400
        assert response.json()["type"] == "InputError"

    def test_malformed_upload(self):
        """Test non-JSON uploads are rejected."""
        files = {"file": ("tracklets.json", b"{broken", "application/json")}

        response = client.post("/tracklets/nms", files=files)

        assert response.status_code == 400
        assert response.json()["type"] == "FormatError"


@pytest.mark.api
class TestFuseAndEvaluate:
    """Test score fusion and evaluation endpoints."""

    def test_fuse(self):
        """Test frame averaging and selection."""
        body = {"per_frame": [[0.2, 0.8], [0.6, 0.4]]}

        response = client.post("/grounding/fuse", json=body)

        assert response.status_code == 200
        data = response.json()
        assert data["fused"] == pytest.approx([0.4, 0.6])
        assert data["selected"] == 1

    def test_fuse_rejects_non_probabilities(self):
        """Test rows that do not sum to one are rejected."""
        response = client.post("/grounding/fuse", json={"per_frame": [[0.5, 0.8]]})

        assert response.status_code == 400

    def test_evaluate_perfect_prediction(self):
        """Test identical prediction and ground truth score 1."""
        sequence = MaskSequence("v1", (box(0, 4), BinaryMask.empty(8, 8))).to_dict()

        body = {"predictions": [sequence], "ground_truth": [sequence], "tolerance": 1}

        response = client.post("/metrics/evaluate", json=body)

        assert response.status_code == 200
        assert response.json()["mean_JF"] == 1.0

    def test_evaluate_missing_ground_truth(self):
        """Test predictions without ground truth are client errors."""
        sequence = MaskSequence("v1", (box(0, 4),)).to_dict()

        body = {"predictions": [sequence], "ground_truth": []}

        response = client.post("/metrics/evaluate", json=body)

        assert response.status_code == 400
