import numpy as np

from ..grounding.model import load_model
from ..grounding.tensor_io import read_tensor
from ..masks.rle import BinaryMask, encode
from ..tracklets.tracklet import load_mask_sequence, load_proposals
from .proposals import erode_boundary, scene_proposals
from .scene import SynthConfig, generate_scene, load_scene
from .suite import feature_dim, generate_suite, write_suite


def tree_bytes(root):
    files = [p for p in sorted(root.rglob("*")) if p.is_file()]
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in files}


def object_masks_at(scene, frame):
    return {scene.object_masks(i)[frame] for i in range(len(scene.objects))}


class TestProposals:
    """Test simulated key-frame proposals."""

    def test_noise_free_proposals_are_ground_truth(self):
        """Test clean scenes propose each object's exact mask on every frame."""
        config = SynthConfig()
        scene = generate_scene(config, 1)

        proposals = scene_proposals(scene, config)

        assert len(proposals) == scene.num_frames * len(scene.objects)
        for p in proposals:
            assert p.confidence == 1.0
            assert p.mask in object_masks_at(scene, p.key_frame)

    def test_noisy_proposals_are_deterministic(self):
        """Test noisy proposals repeat for the same scene."""
        config = SynthConfig(noise=0.3)
        scene = generate_scene(config, 2)

        assert scene_proposals(scene, config) == scene_proposals(scene, config)
        proposals = scene_proposals(scene, config)
        assert any(p.mask not in object_masks_at(scene, p.key_frame) for p in proposals)

    def test_erosion_never_empties(self):
        """Test dropping every boundary pixel of a thin mask keeps the mask."""
        grid = np.zeros((5, 5), dtype=bool)
        grid[2, 1:4] = True
        mask = encode(grid)

        assert erode_boundary(mask, 1.0, np.random.default_rng(0)) == mask
        empty = BinaryMask.empty(5, 5)
        assert erode_boundary(empty, 1.0, np.random.default_rng(0)).is_empty()


class TestSuite:
    """Test suite generation and the files it writes."""

    def setup_method(self):
        self.config = SynthConfig(num_frames=6, max_objects=3)

    def test_ids_and_determinism(self):
        """Test ids are sequential and the same seed regenerates the suite."""
        scenes = generate_suite(self.config, 3, seed=4)

        ids = [s.video_id for s in scenes]
        assert ids == ["scene-0000", "scene-0001", "scene-0002"]
        assert scenes == generate_suite(self.config, 3, seed=4)

    def test_layout(self, tmp_path):
        """Test every scene gets its scene, proposals, features and ground truth."""
        write_suite(tmp_path, self.config, 2, seed=1)
        video = tmp_path / "scenes" / "scene-0001"

        scene = load_scene(video / "scene.json")
        dims, proposals = load_proposals(video / "proposals.json")
        features = read_tensor(video / "features.tlg")
        tokens = read_tensor(video / "tokens.tlg")
        truth = load_mask_sequence(tmp_path / "ground_truth" / "scene-0001.json")

        assert dims.num_frames == scene.num_frames
        assert len(proposals) == scene.num_frames * len(scene.objects)
        assert features.shape == (6, 16, 16, feature_dim(self.config))
        assert tokens.shape == (len(scene.expression), feature_dim(self.config))
        assert truth.masks == scene.referent_masks()
        assert load_model(tmp_path / "analytic.tlgw", 2).dim == feature_dim(self.config)

    def test_rewrite_is_byte_identical(self, tmp_path):
        """Test two writes with the same seed produce identical files."""
        write_suite(tmp_path / "a", self.config, 2, seed=9)
        write_suite(tmp_path / "b", self.config, 2, seed=9)

        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
