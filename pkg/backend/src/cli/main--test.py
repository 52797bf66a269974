import json

import pytest

from ..tracklets.tracklet import load_tracklet_set
from .main import main


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("suite")
    assert main(["synth", "--count", "3", "--seed", "7", "--out", str(out)]) == 0
    return out


@pytest.fixture(autouse=True)
def no_env_overrides(monkeypatch):
    monkeypatch.delenv("TLG_SEED", raising=False)
    monkeypatch.delenv("TLG_WORKERS", raising=False)


def propagate_args(video, scene, out):
    return [
        "propagate",
        "--proposals",
        str(video / "proposals.json"),
        "--scene",
        str(scene),
        "--out",
        str(out),
    ]


class TestSubcommands:
    """Test each subcommand end to end on a small suite."""

    def test_synth_layout(self, suite):
        """Test the suite holds scenes, ground truth and both checkpoints."""
        names = sorted(p.name for p in (suite / "scenes").iterdir())

        assert names == ["scene-0000", "scene-0001", "scene-0002"]
        assert (suite / "ground_truth" / "scene-0001.json").is_file()
        assert (suite / "analytic.tlgw").is_file()
        assert (suite / "analytic-sharp.tlgw").is_file()

    def test_stage_by_stage(self, suite, tmp_path):
        """Test propagate, nms and ground chained through files."""
        video = suite / "scenes" / "scene-0000"
        candidates = tmp_path / "candidates.json"
        kept = tmp_path / "nms.json"
        scores = tmp_path / "scores.json"

        propagate = propagate_args(video, video / "scene.json", candidates)
        assert main([*propagate, "--keyframes", "3"]) == 0
        assert main(["nms", "--tracklets", str(candidates), "--out", str(kept)]) == 0
        ground = [
            "ground",
            "--tracklets",
            str(kept),
            "--features",
            str(video / "features.tlg"),
            "--tokens",
            str(video / "tokens.tlg"),
            "--out",
            str(scores),
        ]
        assert main(ground) == 0

        assert len(load_tracklet_set(kept)) <= len(load_tracklet_set(candidates))
        data = json.loads(scores.read_text())
        assert data["selected_id"] == data["tracklet_ids"][data["selected"]]
        assert data["grounder"] == {"name": "naive"}

    def test_pipeline_is_deterministic(self, suite, tmp_path):
        """Test two runs produce byte-identical artifacts and reports."""
        first, second = tmp_path / "a", tmp_path / "b"
        run = ["pipeline", "--suite", str(suite), "--out"]

        assert main([*run, str(first), "--workers", "2"]) == 0
        assert main([*run, str(second), "--workers", "1"]) == 0

        files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        assert len(files) == 3 * 4 + 1
        for name in files:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_pipeline_then_evaluate(self, suite, tmp_path):
        """Test evaluate reads the pipeline's prediction layout."""
        out, report = tmp_path / "run", tmp_path / "report.json"
        assert main(["pipeline", "--suite", str(suite), "--out", str(out)]) == 0

        code = main(
            [
                "evaluate",
                "--pred",
                str(out),
                "--gt",
                str(suite / "ground_truth"),
                "--out",
                str(report),
            ]
        )

        assert code == 0
        stored = json.loads((out / "report.json").read_text())
        assert json.loads(report.read_text()) == stored

    def test_evaluate_flat_prediction_dir(self, suite, tmp_path):
        """Test evaluate also reads one <video>.json per prediction."""
        flat, report = tmp_path / "flat", tmp_path / "report.json"
        flat.mkdir()
        for gt in (suite / "ground_truth").glob("*.json"):
            (flat / gt.name).write_bytes(gt.read_bytes())

        code = main(
            [
                "evaluate",
                "--pred",
                str(flat),
                "--gt",
                str(suite / "ground_truth"),
                "--out",
                str(report),
            ]
        )

        assert code == 0
        assert json.loads(report.read_text())["mean_JF"] == 1.0

    def test_transformer_pipeline(self, suite, tmp_path):
        """Test transformer grounding with the suite's analytic checkpoint."""
        checkpoint = str(suite / "analytic.tlgw")

        code = main(
            [
                "pipeline",
                "--suite",
                str(suite),
                "--out",
                str(tmp_path),
                "--grounder",
                "transformer",
                "--checkpoint",
                checkpoint,
            ]
        )

        assert code == 0
        scores = json.loads((tmp_path / "scene-0000" / "scores.json").read_text())
        assert scores["grounder"]["checkpoint"] == checkpoint

    def test_ablate_defaults_to_suite_checkpoints(self, suite, tmp_path):
        """Test ablation finds the analytic checkpoints next to the scenes."""
        out = tmp_path / "ablation.json"

        assert main(["ablate", "--suite", str(suite), "--out", str(out)]) == 0

        variants = json.loads(out.read_text())["variants"]
        assert [v["variant"] for v in variants][0] == "Image-level Baseline"
        assert len(variants) == 4


class TestExitCodes:
    """Test errors map to documented exit codes."""

    def pipeline(self, suite, out, *flags):
        return main(["pipeline", "--suite", str(suite), "--out", str(out), *flags])

    def test_invalid_config(self, suite, tmp_path):
        """Test invalid values exit with 2."""
        assert self.pipeline(suite, tmp_path, "--keyframes", "0") == 2

    def test_transformer_without_checkpoint(self, suite, tmp_path):
        """Test transformer grounding without weights exits with 2."""
        assert self.pipeline(suite, tmp_path, "--grounder", "transformer") == 2

    def test_missing_input(self, tmp_path):
        """Test a missing suite exits with 3."""
        assert self.pipeline(tmp_path / "nothing", tmp_path / "out") == 3

    def test_malformed_checkpoint(self, suite, tmp_path):
        """Test an unreadable checkpoint exits with 3."""
        bad = tmp_path / "bad.tlgw"
        bad.write_bytes(b"not a checkpoint")

        flags = ("--grounder", "transformer", "--checkpoint", str(bad))

        code = self.pipeline(suite, tmp_path / "out", *flags)

        assert code == 3

    def test_missing_checkpoint(self, suite, tmp_path):
        """Test a checkpoint path that does not exist exits with 3."""
        missing = str(tmp_path / "nope.tlgw")
        flags = ("--grounder", "transformer", "--checkpoint", missing)

        code = self.pipeline(suite, tmp_path / "out", *flags)

        assert code == 3

    def test_missing_tracklet_file(self, tmp_path):
        """Test a tracklet file that does not exist exits with 3."""
        missing, out = tmp_path / "nope.json", tmp_path / "out.json"

        assert main(["nms", "--tracklets", str(missing), "--out", str(out)]) == 3

    def test_non_utf8_tracklet_file(self, tmp_path):
        """Test undecodable bytes exit with 3."""
        bad = tmp_path / "bad.json"
        bad.write_bytes(b"\xff\xfe\x00garbage")

        assert main(["nms", "--tracklets", str(bad), "--out", str(tmp_path / "o")]) == 3

    def test_missing_feature_file(self, suite, tmp_path):
        """Test a feature tensor that does not exist exits with 3."""
        video = suite / "scenes" / "scene-0000"
        candidates = tmp_path / "candidates.json"
        assert main(propagate_args(video, video / "scene.json", candidates)) == 0

        code = main(
            [
                "ground",
                "--tracklets",
                str(candidates),
                "--features",
                str(tmp_path / "nope.tlg"),
                "--tokens",
                str(video / "tokens.tlg"),
                "--out",
                str(tmp_path / "scores.json"),
            ]
        )

        assert code == 3

    def test_missing_scene_file(self, suite, tmp_path):
        """Test an absent scene.json for the oracle propagator exits with 3."""
        video = suite / "scenes" / "scene-0000"
        args = propagate_args(video, tmp_path / "scene.json", tmp_path / "c.json")

        assert main(args) == 3

    def test_bad_tolerance_flag(self, tmp_path):
        """Test argparse rejects a non-numeric tolerance."""
        with pytest.raises(SystemExit):
            main(
                [
                    "evaluate",
                    "--pred",
                    str(tmp_path),
                    "--gt",
                    str(tmp_path),
                    "--tolerance",
                    "wide",
                ]
            )
