"""
End-to-end tests for the per-video pipeline.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from ..config import PipelineConfig
from ..errors import NumericError, StageError
from ..grounding.grounder import BaseGrounder, NaiveGrounder
from ..grounding.model import analytic_model, save_model
from ..grounding.scoring import GroundingResult
from ..metrics.evaluation import evaluate
from ..storage.artifacts import ArtifactStore
from ..synth.scene import SynthConfig
from ..synth.suite import generate_suite
from .inputs import VideoInputs, ground_truth_of, inputs_from_scene
from .runner import create_propagator, run_pipeline, run_video


class FailingGrounder(BaseGrounder):
    def score_frame(self, tracklet_feats, lang_feats):
        raise NumericError("non-finite logits", layer=1)

    def get_config(self):
        return {"name": "failing"}


def suite_inputs(config, count, seed=0):
    scenes = generate_suite(config, count, seed)
    return [inputs_from_scene(scene, config) for scene in scenes]


def store_files(store):
    paths = sorted(Path(store.root).rglob("*"))
    return {p.relative_to(store.root): p.read_bytes() for p in paths if p.is_file()}


class TestRunPipeline:
    """Test the full pipeline on synthetic suites."""

    def setup_method(self):
        self.synth = SynthConfig()
        self.inputs = suite_inputs(self.synth, 8)
        self.config = PipelineConfig(workers=1)

    def test_noise_free_naive_run(self):
        """Test exact proposals and oracle propagation recover the referents."""
        results = run_pipeline(self.config, self.inputs)
        predictions = {r.video_id: r.prediction for r in results}

        report = evaluate(predictions, ground_truth_of(self.inputs))

        assert [r.video_id for r in results] == sorted(i.video_id for i in self.inputs)
        assert report.mean_jf >= 0.95

    def test_single_tracklet_scores_one(self):
        """Test a one-object scene fuses to exactly 1.0 after NMS."""
        inputs = suite_inputs(SynthConfig(min_objects=1, max_objects=1), 1)

        [result] = run_pipeline(self.config, inputs)

        assert len(result.tracklet_ids) == 1
        assert result.result.fused.tolist() == [1.0]

    def test_store_is_deterministic(self):
        """Test two runs write byte-identical artifacts."""
        first, second = ArtifactStore.temporary(), ArtifactStore.temporary()

        run_pipeline(self.config.with_overrides(workers=4), self.inputs, first)
        run_pipeline(self.config, self.inputs, second)

        assert store_files(first) == store_files(second)
        assert len(store_files(first)) == 4 * len(self.inputs)

    def test_scores_log_reproduces_selection(self):
        """Test the stored per-frame scores re-fuse to the stored selection."""
        store = ArtifactStore.temporary()
        run_pipeline(self.config, self.inputs[:3], store)

        for inputs in self.inputs[:3]:
            scores = store.read_scores(inputs.video_id)
            kept = store.read_nms(inputs.video_id)

            refused = GroundingResult.from_dict(scores)

            assert refused.selected == scores["selected"]
            assert scores["tracklet_ids"][refused.selected] == scores["selected_id"]
            chosen = kept.select([scores["selected_id"]]).tracklets[0]
            assert chosen.masks == store.read_prediction(inputs.video_id).masks

    def test_frame_stride_recorded(self):
        """Test strided runs log the frames they grounded."""
        store = ArtifactStore.temporary()
        run_pipeline(self.config.with_overrides(frame_stride=4), self.inputs[:1], store)

        scores = store.read_scores(self.inputs[0].video_id)

        assert scores["frames"] == [0, 4, 8]
        assert len(scores["per_frame"]) == 3

    def test_ensemble_of_identical_models(self, tmp_path):
        """Test an ensemble of one checkpoint twice matches the single model."""
        path = tmp_path / "analytic.tlgw"
        save_model(analytic_model(self.synth.attribute_dims), path)
        single = PipelineConfig(
            grounder="transformer", checkpoints=[str(path)], workers=1
        )
        double = single.with_overrides(ensemble=[str(path), str(path)])

        one = run_pipeline(single, self.inputs[:4])
        two = run_pipeline(double, self.inputs[:4])

        for a, b in zip(one, two, strict=True):
            assert a.selected_id == b.selected_id
            np.testing.assert_allclose(
                a.result.per_frame, b.result.per_frame, atol=1e-12
            )


class TestCleanSuite:
    """Test the full-size noise-free suite."""

    @pytest.mark.slow
    def test_fifty_scenes_single_worker(self):
        """Test fifty clean scenes reach J&F 0.95 within a minute on one worker."""
        inputs = suite_inputs(SynthConfig(), 50)

        start = time.perf_counter()
        results = run_pipeline(PipelineConfig(workers=1), inputs)
        elapsed = time.perf_counter() - start

        predictions = {r.video_id: r.prediction for r in results}
        report = evaluate(predictions, ground_truth_of(inputs))
        assert report.mean_jf >= 0.95
        assert elapsed < 60.0


class TestRunVideo:
    """Test per-video edge cases and failure reporting."""

    def setup_method(self):
        self.config = PipelineConfig(workers=1)
        self.inputs = suite_inputs(SynthConfig(), 1)[0]
        self.propagator = create_propagator(self.config)

    def test_stage_failure_names_stage_and_video(self):
        """Test a grounding failure surfaces as a StageError with its exit code."""
        with pytest.raises(StageError) as exc:
            run_video(self.inputs, self.config, FailingGrounder(), self.propagator)

        assert exc.value.stage == "ground"
        assert exc.value.video_id == self.inputs.video_id
        assert exc.value.exit_code == 4

    def test_no_tracklets_predicts_empty_masks(self):
        """Test a video without proposals yields an all-empty prediction."""
        bare = VideoInputs(
            video=self.inputs.video,
            proposals=(),
            feature_maps=self.inputs.feature_maps,
            tokens=self.inputs.tokens,
            scene=self.inputs.scene,
        )
        store = ArtifactStore.temporary()

        result = run_video(bare, self.config, NaiveGrounder(), self.propagator, store)

        assert result.result is None
        assert all(m.is_empty() for m in result.prediction.masks)
        assert store.read_scores(bare.video_id)["selected_id"] is None

    def test_no_propagation_keeps_single_frames(self):
        """Test the image-level baseline leaves every other frame empty."""
        config = self.config.with_overrides(
            keyframes=1, propagation="none", use_nms=False
        )
        propagator = create_propagator(config)

        result = run_video(self.inputs, config, NaiveGrounder(), propagator)

        middle = self.inputs.video.num_frames // 2
        masks = result.prediction.masks
        nonempty = [t for t, m in enumerate(masks) if not m.is_empty()]
        assert nonempty == [middle]
