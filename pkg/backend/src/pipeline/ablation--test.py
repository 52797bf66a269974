import pytest

from ..config import PipelineConfig
from ..errors import ConfigError
from ..grounding.model import analytic_model, save_model
from ..synth.scene import SynthConfig
from ..synth.suite import CHECKPOINTS, generate_suite, write_suite
from .ablation import VARIANTS, ablation_configs, format_ablation_table, run_ablation
from .inputs import inputs_from_scene, load_inputs


class TestAblationConfigs:
    """Test the cumulative variant settings."""

    def setup_method(self):
        self.config = PipelineConfig(keyframes=5, checkpoints=["a.tlgw", "b.tlgw"])

    def test_variants(self):
        """Test each row switches on one more component."""
        configs = dict(ablation_configs(self.config))

        baseline, propagated, transformer, full = (configs[v] for v in VARIANTS)
        assert baseline.keyframes == 1
        assert baseline.propagation == "none"
        assert baseline.grounder == "naive"
        assert propagated.keyframes == 5
        assert propagated.propagation == "oracle"
        assert propagated.use_nms is False
        assert transformer.grounder == "transformer"
        assert transformer.grounding_checkpoints == ["a.tlgw"]
        assert full.use_nms is True
        assert full.grounding_checkpoints == ["a.tlgw", "b.tlgw"]

    def test_needs_checkpoints(self):
        """Test the transformer rows cannot be built without weights."""
        with pytest.raises(ConfigError):
            ablation_configs(PipelineConfig())


class TestRunAblation:
    """Test the ablation on a small noisy suite."""

    def test_propagation_beats_image_level(self, tmp_path):
        """Test propagating key frames over the video raises J&F."""
        synth = SynthConfig(noise=0.2)
        inputs = [inputs_from_scene(s, synth) for s in generate_suite(synth, 6, seed=1)]
        path = tmp_path / "analytic.tlgw"
        save_model(analytic_model(synth.attribute_dims), path)

        rows = run_ablation(PipelineConfig(checkpoints=[str(path)], workers=2), inputs)

        assert [r.variant for r in rows] == list(VARIANTS)
        assert rows[1].report.mean_jf > rows[0].report.mean_jf
        table = format_ablation_table(rows)
        assert table.splitlines()[0].startswith("Variant")
        assert "+Tracklet-NMS & Model Ensemble" in table

    @pytest.mark.slow
    def test_hard_noisy_suite(self, tmp_path):
        """Test component ordering on fifty hard scenes with noisy proposals."""
        write_suite(tmp_path, SynthConfig(hard=True, noise=0.2), 50, seed=0)
        config = PipelineConfig(
            propagation_noise=0.2,
            propagation_decay=0.95,
            checkpoints=[str(tmp_path / name) for name in CHECKPOINTS],
        )

        rows = run_ablation(config, load_inputs(tmp_path))

        baseline, propagated, transformer, _ = (r.report.mean_jf for r in rows)
        assert propagated > baseline
        assert transformer >= baseline
