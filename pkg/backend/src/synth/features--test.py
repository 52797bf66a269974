import numpy as np
import pytest

from ..errors import InputError
from ..grounding.features import pooled_tracklet_feature
from ..grounding.scoring import cosine_similarity
from .features import attribute_features
from .scene import Scene, SceneObject, SynthConfig, generate_scene


def red_square_scene():
    square = SceneObject("square", 0, 8, (0, 0), (0, 0))
    return Scene("v", 0, 16, 16, 1, 4, (square,), 0, (0,))


class TestAttributeFeatures:
    """Test one-hot attribute feature maps."""

    def test_background_is_zero(self):
        """Test cells away from every object are zero."""
        fmaps, _ = attribute_features(red_square_scene(), 4, 4)

        np.testing.assert_array_equal(fmaps[0].data[2:, 2:], 0.0)

    def test_covered_cell_is_one_hot(self):
        """Test a fully covered cell holds (red, square, static)."""
        scene = red_square_scene()
        fmaps, _ = attribute_features(scene, 4, 4)
        vocab = scene.vocabulary

        cell = fmaps[0].data[0, 0]

        assert cell.sum() == 3.0
        for word in ("red", "square", "static"):
            assert cell[vocab.index(word)] == 1.0

    def test_tokens_share_channels(self):
        """Test each token is one-hot on its vocabulary channel."""
        scene = generate_scene(SynthConfig(), 2)
        _, tokens = attribute_features(scene, 16, 16)

        assert tokens.length == len(scene.expression)
        for row, token in zip(tokens.data, scene.expression):
            assert row[token] == 1.0 and row.sum() == 1.0

    def test_padding_channels(self):
        """Test extra channels beyond the attributes stay zero."""
        scene = red_square_scene()
        fmaps, tokens = attribute_features(scene, 4, 4, feature_dim=40)

        assert fmaps[0].channels == 40
        assert not fmaps[0].data[..., len(scene.vocabulary):].any()
        assert not tokens.data[:, len(scene.vocabulary):].any()

    def test_dimension_too_small(self):
        """Test D below the attribute count is rejected."""
        with pytest.raises(InputError):
            attribute_features(red_square_scene(), 4, 4, feature_dim=5)

    def test_referent_is_most_similar(self):
        """Test the referent's pooled feature is closest to the expression."""
        config = SynthConfig()
        for seed in range(30):
            scene = generate_scene(config, seed)
            fmaps, tokens = attribute_features(
                scene, config.grid_width, config.grid_height
            )
            sentence = tokens.data.mean(axis=0)
            tracks = [scene.object_masks(i) for i in range(len(scene.objects))]
            for t in range(scene.num_frames):
                pooled = np.stack(
                    [pooled_tracklet_feature(fmaps[t], masks[t]) for masks in tracks]
                )
                cosines = cosine_similarity(pooled, sentence)
                others = np.delete(cosines, scene.referent_index)
                assert np.all(cosines[scene.referent_index] > others)
