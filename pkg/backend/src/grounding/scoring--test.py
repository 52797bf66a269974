import math

import numpy as np
import pytest

from ..errors import DimensionError, InputError
from .features import TokenFeatures
from .scoring import (
    GroundingResult,
    cosine_similarity,
    ensemble_average,
    fuse_and_select,
    naive_similarity_grounding,
)


class TestNaiveSimilarity:
    """Test the cosine similarity baseline."""

    def test_single_tracklet(self):
        """Test P=1 scores 1."""
        tokens = TokenFeatures(np.array([[1.0, 0.0]]))

        scores = naive_similarity_grounding(np.array([[0.3, 0.4]]), tokens)

        np.testing.assert_allclose(scores, [1.0])

    def test_closed_form(self):
        """Test orthogonal pair gives softmax([1, 0])."""
        tokens = TokenFeatures(np.array([[1.0, 0.0]]))

        scores = naive_similarity_grounding(np.eye(2), tokens)

        e = math.e
        np.testing.assert_allclose(scores, [e / (e + 1), 1 / (e + 1)])
        assert scores[0] == pytest.approx(0.7311, abs=1e-4)

    def test_sentence_is_token_mean(self):
        """Test the expression vector is the mean of its tokens."""
        tokens = TokenFeatures(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
        feats = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])

        scores = naive_similarity_grounding(feats, tokens)

        assert scores[0] > scores[1] > scores[2]

    def test_zero_vector_cosine(self):
        """Test an empty-mask feature scores cosine 0."""
        cosines = cosine_similarity(np.zeros((2, 3)), np.ones(3))

        np.testing.assert_array_equal(cosines, [0.0, 0.0])

    def test_width_mismatch(self):
        """Test tracklet and token widths must agree."""
        with pytest.raises(DimensionError):
            naive_similarity_grounding(np.ones((2, 3)), TokenFeatures(np.ones((1, 4))))


class TestFuseAndSelect:
    """Test per-frame to video fusion."""

    def test_single_frame(self):
        """Test T=1 fuses to the row itself."""
        result = fuse_and_select(np.array([[0.1, 0.7, 0.2]]))

        np.testing.assert_allclose(result.fused, [0.1, 0.7, 0.2])
        assert result.selected == 1

    def test_mean_over_frames(self):
        """Test a column [0.2, 0.4, 0.6] fuses to 0.4."""
        result = fuse_and_select(np.array([[0.2, 0.8], [0.4, 0.6], [0.6, 0.4]]))

        assert result.fused[0] == pytest.approx(0.4)
        assert result.selected == 1

    def test_tie_takes_lowest_index(self):
        """Test equal fused scores select index 0."""
        result = fuse_and_select(np.array([[0.3, 0.7], [0.7, 0.3]]))

        assert result.selected == 0

    def test_empty_matrix(self):
        """Test an empty matrix is rejected."""
        with pytest.raises(InputError):
            fuse_and_select(np.zeros((0, 3)))

    def test_rows_must_be_probabilities(self):
        """Test rows that do not sum to 1 are rejected."""
        with pytest.raises(InputError):
            fuse_and_select(np.array([[0.5, 0.6]]))

    def test_logged_result_reproduces_selection(self):
        """Test fusing the dumped per-frame scores gives the same selection."""
        rng = np.random.default_rng(0)
        logits = rng.standard_normal((6, 4))
        per_frame = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        result = fuse_and_select(per_frame)

        again = GroundingResult.from_dict(result.to_dict())

        assert again.selected == result.selected
        np.testing.assert_array_equal(again.fused, result.fused)


class TestEnsembleAverage:
    """Test probability averaging across models."""

    def test_identical_members(self):
        """Test averaging copies returns the matrix."""
        m = np.array([[0.25, 0.75], [0.5, 0.5]])

        np.testing.assert_allclose(ensemble_average([m, m, m]), m)

    def test_opposite_members(self):
        """Test [1, 0] and [0, 1] average to [0.5, 0.5]."""
        members = [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])]

        np.testing.assert_allclose(ensemble_average(members), [[0.5, 0.5]])

    def test_three_members(self):
        """Test first column [0.6, 0.3, 0.9] averages to 0.6."""
        members = [np.array([[p, 1 - p]]) for p in (0.6, 0.3, 0.9)]

        result = ensemble_average(members)

        assert result[0, 0] == pytest.approx(0.6)
        assert result.sum() == pytest.approx(1.0)

    def test_order_invariant(self):
        """Test member order does not matter."""
        a, b = np.array([[0.1, 0.9]]), np.array([[0.7, 0.3]])

        np.testing.assert_allclose(ensemble_average([a, b]), ensemble_average([b, a]))

    def test_shape_mismatch(self):
        """Test members must share a shape."""
        with pytest.raises(DimensionError):
            ensemble_average([np.array([[0.5, 0.5]]), np.array([[1.0]])])
