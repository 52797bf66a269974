import numpy as np
import pytest

from ..errors import ConfigError, DimensionError, InputError
from ..grounding.features import TokenFeatures
from ..synth.scene import SynthConfig
from ..synth.suite import generate_suite, load_synth_config, write_suite
from .inputs import VideoInputs, ground_truth_of, inputs_from_scene, load_inputs


class TestLoadInputs:
    """Test pipeline inputs from disk and from memory agree."""

    def setup_method(self):
        self.config = SynthConfig(noise=0.2)

    def test_disk_matches_memory(self, tmp_path):
        """Test a written suite reloads to the in-memory inputs."""
        scenes = write_suite(tmp_path, self.config, 2, seed=3)

        loaded = load_inputs(tmp_path)

        assert [i.video_id for i in loaded] == [s.video_id for s in scenes]
        for disk, scene in zip(loaded, scenes, strict=True):
            memory = inputs_from_scene(scene, self.config)
            assert disk.proposals == memory.proposals
            assert disk.ground_truth == memory.ground_truth
            assert disk.scene.to_dict() == scene.to_dict()
            np.testing.assert_array_equal(disk.tokens.data, memory.tokens.data)
            for a, b in zip(disk.feature_maps, memory.feature_maps, strict=True):
                np.testing.assert_array_equal(a.data, b.data)

    def test_missing_suite(self, tmp_path):
        """Test a directory without scenes is an input error."""
        with pytest.raises(InputError, match="scenes"):
            load_inputs(tmp_path)

    def test_missing_ground_truth(self, tmp_path):
        """Test videos without ground truth cannot be evaluated."""
        write_suite(tmp_path, self.config, 1)
        (tmp_path / "ground_truth" / "scene-0000.json").unlink()

        inputs = load_inputs(tmp_path)

        assert inputs[0].ground_truth is None
        with pytest.raises(InputError, match="scene-0000"):
            ground_truth_of(inputs)


class TestVideoInputs:
    """Test consistency checks on bundled inputs."""

    def setup_method(self):
        config = SynthConfig()
        self.inputs = inputs_from_scene(generate_suite(config, 1)[0], config)

    def test_feature_width_mismatch(self):
        """Test token and feature widths must agree."""
        narrow = TokenFeatures(self.inputs.tokens.data[:, :-1])

        with pytest.raises(DimensionError):
            VideoInputs(
                self.inputs.video,
                self.inputs.proposals,
                self.inputs.feature_maps,
                narrow,
            )

    def test_frame_count_mismatch(self):
        """Test one feature map per frame is required."""
        with pytest.raises(DimensionError):
            VideoInputs(
                self.inputs.video,
                self.inputs.proposals,
                self.inputs.feature_maps[1:],
                self.inputs.tokens,
            )


class TestSynthConfigLoading:
    """Test synth config files and overrides."""

    def test_overrides(self, tmp_path):
        """Test flags replace file values and None is ignored."""
        path = tmp_path / "synth.json"
        path.write_text('{"num_frames": 8, "noise": 0.1}')

        config = load_synth_config(path, noise=None, hard=True)

        assert (config.num_frames, config.noise, config.hard) == (8, 0.1, True)

    def test_invalid(self, tmp_path):
        """Test unknown keys and bad files are config errors."""
        with pytest.raises(ConfigError):
            load_synth_config(num_objects=3)
        with pytest.raises(ConfigError):
            load_synth_config(tmp_path / "missing.json")
