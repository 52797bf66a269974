import json

import pytest

from .config import PipelineConfig, configure_logging, load_config
from .errors import ConfigError


class TestLoadConfig:
    """Test config loading, overrides and validation."""

    def setup_method(self):
        self.defaults = PipelineConfig()

    def test_defaults(self, monkeypatch):
        """Test the documented defaults."""
        monkeypatch.delenv("TLG_SEED", raising=False)
        monkeypatch.delenv("TLG_WORKERS", raising=False)
        config = load_config()

        assert (config.keyframes, config.nms_threshold, config.max_keep) == (7, 0.5, 10)
        assert config.grounder == "naive"
        assert config.preset == "desk"
        assert config.frame_stride == 1
        assert config.boundary_tolerance == "auto"

    def test_file_then_flags(self, tmp_path, monkeypatch):
        """Test flags override the file and None flags are ignored."""
        monkeypatch.delenv("TLG_SEED", raising=False)
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"keyframes": 3, "seed": 5}))

        config = load_config(path, keyframes=4, seed=None)

        assert config.keyframes == 4
        assert config.seed == 5

    def test_env_seed_wins(self, tmp_path, monkeypatch):
        """Test TLG_SEED beats both file and flags."""
        monkeypatch.setenv("TLG_SEED", "99")
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 5}))

        assert load_config(path, seed=7).seed == 99

    def test_env_workers_is_a_default(self, monkeypatch):
        """Test TLG_WORKERS applies only when nothing else sets workers."""
        monkeypatch.setenv("TLG_WORKERS", "3")

        assert load_config().worker_count == 3
        assert load_config(workers=2).worker_count == 2

    def test_bad_env_seed(self, monkeypatch):
        """Test a non-integer TLG_SEED is a config error."""
        monkeypatch.setenv("TLG_SEED", "abc")

        with pytest.raises(ConfigError):
            load_config()

    def test_unknown_key(self, tmp_path, monkeypatch):
        """Test unknown keys are rejected."""
        monkeypatch.delenv("TLG_SEED", raising=False)
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"keyframe": 3}))

        with pytest.raises(ConfigError, match="keyframe"):
            load_config(path)

    def test_invalid_values(self, monkeypatch):
        """Test out-of-range values are config errors with exit code 2."""
        monkeypatch.delenv("TLG_SEED", raising=False)
        invalid = (
            {"nms_threshold": 1.5},
            {"keyframes": 0},
            {"preset": "huge"},
            {"grounder": "magic"},
        )
        for overrides in invalid:
            with pytest.raises(ConfigError) as exc:
                load_config(**overrides)
            assert exc.value.exit_code == 2

    def test_transformer_needs_checkpoint(self, monkeypatch):
        """Test transformer grounding without weights is rejected."""
        monkeypatch.delenv("TLG_SEED", raising=False)
        with pytest.raises(ConfigError):
            load_config(grounder="transformer")

    def test_ensemble_takes_precedence(self):
        """Test ensemble members replace the checkpoint list."""
        config = PipelineConfig(
            grounder="transformer", checkpoints=["a"], ensemble=["b", "c"]
        )

        assert config.grounding_checkpoints == ["b", "c"]

    def test_missing_and_malformed_files(self, tmp_path):
        """Test unreadable config files are config errors."""
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")

        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_with_overrides(self):
        """Test copies are revalidated."""
        assert self.defaults.with_overrides(keyframes=1).keyframes == 1
        with pytest.raises(ConfigError):
            self.defaults.with_overrides(max_keep=0)


class TestConfigureLogging:
    """Test log level handling."""

    def test_unknown_level(self):
        """Test unknown levels are rejected."""
        with pytest.raises(ConfigError):
            configure_logging("LOUD")
