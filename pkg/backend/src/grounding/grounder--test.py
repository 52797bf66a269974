import numpy as np
import pytest

from ..errors import ConfigError, DimensionError, InputError
from ..masks.rle import encode
from ..synth.features import attribute_features
from ..synth.scene import SynthConfig, generate_scene
from ..tracklets.tracklet import Tracklet, TrackletSet
from .features import FeatureMap, TokenFeatures
from .grounder import (
    EnsembleGrounder,
    NaiveGrounder,
    TransformerGrounder,
    create_grounder,
    grounded_frames,
)
from .model import ModelShape, analytic_dim, analytic_model, random_model, save_model
from .scoring import fuse_and_select


def object_tracklets(scene):
    """One exact tracklet per scene object, in object order."""
    tracklets = [
        Tracklet(
            f"{i:04d}", 0, "gt", scene.object_masks(i), 1.0, (1.0,) * scene.num_frames
        )
        for i in range(len(scene.objects))
    ]
    return TrackletSet(
        scene.video_id, scene.width, scene.height, scene.num_frames, tuple(tracklets)
    )


def random_instance(rng, dim=16):
    frames, width, height = int(rng.integers(1, 4)), 8, 8
    count = int(rng.integers(1, 6))
    tracklets = tuple(
        Tracklet(
            f"{i:04d}",
            0,
            "",
            tuple(encode(rng.random((height, width)) < 0.3) for _ in range(frames)),
            1.0,
            (1.0,) * frames,
        )
        for i in range(count)
    )
    fmaps = [FeatureMap(rng.standard_normal((2, 2, dim))) for _ in range(frames)]
    lang = TokenFeatures(rng.standard_normal((int(rng.integers(1, 4)), dim)))
    return TrackletSet("v", width, height, frames, tracklets), fmaps, lang


class TestGroundOnSyntheticScenes:
    """Test grounders recover the referent from attribute features."""

    def setup_method(self):
        self.config = SynthConfig()
        self.dim = analytic_dim(self.config.attribute_dims, 2)

    def features(self, scene):
        config = self.config
        return attribute_features(
            scene, config.grid_width, config.grid_height, self.dim
        )

    def test_naive_selects_referent(self):
        """Test cosine grounding picks the referent on noise-free scenes."""
        for seed in range(20):
            scene = generate_scene(self.config, seed)
            fmaps, lang = self.features(scene)

            per_frame = NaiveGrounder().ground(object_tracklets(scene), fmaps, lang)

            assert per_frame.shape == (scene.num_frames, len(scene.objects))
            np.testing.assert_allclose(per_frame.sum(axis=1), 1.0, atol=1e-6)
            assert fuse_and_select(per_frame).selected == scene.referent_index

    def test_analytic_transformer_selects_referent_on_hard_scenes(self):
        """Test the hand-built model separates near-identical distractors."""
        config = SynthConfig(hard=True, min_objects=2)
        grounder = TransformerGrounder(analytic_model(config.attribute_dims))
        for seed in range(20):
            scene = generate_scene(config, seed)
            fmaps, lang = attribute_features(
                scene, config.grid_width, config.grid_height, self.dim
            )

            per_frame = grounder.ground(object_tracklets(scene), fmaps, lang)

            assert fuse_and_select(per_frame).selected == scene.referent_index

    def test_frame_stride(self):
        """Test stride 5 over 12 frames grounds frames 0, 5, 10."""
        scene = generate_scene(self.config, 3)
        fmaps, lang = self.features(scene)

        tracklets = object_tracklets(scene)

        per_frame = NaiveGrounder().ground(tracklets, fmaps, lang, frame_stride=5)

        assert grounded_frames(12, 5) == [0, 5, 10]
        assert per_frame.shape[0] == 3

    def test_parallel_frames_match_serial(self):
        """Test worker count does not change the scores."""
        scene = generate_scene(self.config, 4)
        fmaps, lang = self.features(scene)
        tracklets = object_tracklets(scene)

        serial = NaiveGrounder().ground(tracklets, fmaps, lang)
        parallel = NaiveGrounder().ground(tracklets, fmaps, lang, workers=4)

        np.testing.assert_array_equal(serial, parallel)


class TestEquivariance:
    """Test tracklet order does not change the answer."""

    def test_permuting_tracklets(self):
        """Test 50 random instances: scores permute and the selection maps."""
        rng = np.random.default_rng(0)
        shape = ModelShape(dim=16, layers=2, heads=2, ffn_hidden=32, head_hidden=16)
        for _ in range(50):
            grounder = TransformerGrounder(random_model(shape, rng))
            tracklets, fmaps, lang = random_instance(rng)
            order = [int(i) for i in rng.permutation(len(tracklets))]
            shuffled = tracklets.with_tracklets([tracklets.tracklets[i] for i in order])

            base = grounder.ground(tracklets, fmaps, lang)
            moved = grounder.ground(shuffled, fmaps, lang)

            np.testing.assert_allclose(moved, base[:, order], atol=1e-9)
            np.testing.assert_allclose(base.sum(axis=1), 1.0, atol=1e-6)
            ranked = np.sort(fuse_and_select(base).fused)
            if len(ranked) == 1 or ranked[-1] - ranked[-2] > 1e-9:
                moved_pick = fuse_and_select(moved).selected
                assert order[moved_pick] == fuse_and_select(base).selected


class TestEnsembleGrounder:
    """Test ensembles of grounders."""

    def test_identical_members_match_single(self):
        """Test two copies of a model give the single model's scores."""
        rng = np.random.default_rng(1)
        model = random_model(ModelShape(16, 2, 2, 32, 16), rng)
        tracklets, fmaps, lang = random_instance(rng)
        single = TransformerGrounder(model)

        doubled = EnsembleGrounder([single, TransformerGrounder(model)])

        np.testing.assert_allclose(
            doubled.ground(tracklets, fmaps, lang),
            single.ground(tracklets, fmaps, lang),
        )
        assert doubled.get_config()["name"] == "ensemble"

    def test_no_members(self):
        """Test an empty ensemble is a config error."""
        with pytest.raises(ConfigError):
            EnsembleGrounder([])


class TestCreateGrounder:
    """Test grounder construction from config values."""

    def test_naive(self):
        """Test the naive grounder needs no checkpoint."""
        assert isinstance(create_grounder("naive"), NaiveGrounder)

    def test_unknown_kind(self):
        """Test unknown grounder names are rejected."""
        with pytest.raises(ConfigError):
            create_grounder("oracle")

    def test_transformer_without_checkpoint(self):
        """Test transformer grounding needs weights."""
        with pytest.raises(ConfigError):
            create_grounder("transformer")

    def test_checkpoints_form_ensemble(self, tmp_path):
        """Test one checkpoint gives a model, two give an ensemble."""
        path = tmp_path / "a.tlgw"
        save_model(analytic_model(4), path)

        assert isinstance(create_grounder("transformer", [path]), TransformerGrounder)
        ensemble = create_grounder("transformer", [path, path])
        assert isinstance(ensemble, EnsembleGrounder)


class TestGroundValidation:
    """Test input checks of the grounding loop."""

    def test_no_tracklets(self):
        """Test an empty tracklet set cannot be grounded."""
        with pytest.raises(InputError):
            NaiveGrounder().ground(
                TrackletSet("v", 8, 8, 1),
                [FeatureMap(np.ones((2, 2, 3)))],
                TokenFeatures(np.ones((1, 3))),
            )

    def test_feature_map_count(self):
        """Test one feature map per frame is required."""
        rng = np.random.default_rng(2)
        tracklets, fmaps, lang = random_instance(rng)

        with pytest.raises(DimensionError):
            NaiveGrounder().ground(tracklets, fmaps + fmaps[:1], lang)
