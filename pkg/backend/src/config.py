"""
Pipeline configuration.

Values come from a JSON file, then command-line overrides, then the
environment; `TLG_SEED` always wins for the seed. A `.env` file in the
working directory is loaded on import.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Literal

from dotenv import load_dotenv
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from .errors import ConfigError
from .grounding.model import MODEL_PRESETS

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class PipelineConfig(BaseModel):
    """Settings for one pipeline run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    keyframes: int = Field(7, ge=1)
    nms_threshold: float = Field(0.5, ge=0.0, le=1.0)
    max_keep: int = Field(10, ge=1)
    grounder: Literal["naive", "transformer"] = "naive"
    preset: str = "desk"
    checkpoints: list[str] = Field(default_factory=list)
    ensemble: list[str] = Field(default_factory=list)
    frame_stride: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    workers: int | None = Field(None, ge=1)
    propagation: Literal["oracle", "none"] = "oracle"
    propagation_noise: float = Field(0.0, ge=0.0, le=1.0)
    propagation_decay: float = Field(1.0, ge=0.0, le=1.0)
    use_nms: bool = True
    boundary_tolerance: int | Literal["auto"] = "auto"

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, value: str) -> str:
        if value not in MODEL_PRESETS:
            raise ValueError(
                f"unknown preset '{value}', expected one of {list(MODEL_PRESETS)}"
            )
        return value

    @field_validator("boundary_tolerance")
    @classmethod
    def _non_negative_tolerance(cls, value: int | str) -> int | str:
        if isinstance(value, int) and value < 0:
            raise ValueError("boundary tolerance must be non-negative")
        return value

    @model_validator(mode="after")
    def _transformer_needs_weights(self) -> "PipelineConfig":
        if self.grounder == "transformer" and not (self.checkpoints or self.ensemble):
            raise ValueError("transformer grounding needs at least one checkpoint")
        return self

    @property
    def grounding_checkpoints(self) -> list[str]:
        """Checkpoints to load: the ensemble members if given, else `checkpoints`."""
        return list(self.ensemble) if self.ensemble else list(self.checkpoints)

    @property
    def worker_count(self) -> int:
        return self.workers or os.cpu_count() or 1

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Copy with the non-None overrides applied and validated."""
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return build_config(values)


def build_config(values: dict[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig(**values)
    except ValidationError as e:
        problems = "; ".join(_describe(err) for err in e.errors())
        raise ConfigError(f"Invalid pipeline config: {problems}") from e


def _describe(err: dict[str, Any]) -> str:
    where = ".".join(str(p) for p in err["loc"]) or "config"
    return f"{where}: {err['msg']}"


def _env_int(name: str) -> int | None:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{name} must be an integer, got '{raw}'") from e


def load_config(path: str | Path | None = None, **overrides: Any) -> PipelineConfig:
    """
    Load, override and validate a pipeline config.

    Args:
        path: JSON config file, or None for defaults
        **overrides: Field values that replace the file's (None is ignored)

    Returns:
        Validated PipelineConfig

    Raises:
        ConfigError: for unreadable files, unknown keys or invalid values
    """
    values: dict[str, Any] = {}
    if path is not None:
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(
                f"Cannot read config file {path}: {e.strerror or e}"
            ) from e
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")

    values.update({k: v for k, v in overrides.items() if v is not None})
    if "workers" not in values and (workers := _env_int("TLG_WORKERS")) is not None:
        values["workers"] = workers
    if (seed := _env_int("TLG_SEED")) is not None:
        logger.info(f"TLG_SEED overrides config seed with {seed}")
        values["seed"] = seed
    return build_config(values)


def configure_logging(level: str | None = None) -> None:
    """Root logging setup shared by the CLI and the API."""
    level = (level or os.getenv("TLG_LOG_LEVEL") or "INFO").upper()
    if level not in logging.getLevelNamesMapping():
        raise ConfigError(f"Unknown log level '{level}'")
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
        force=True,
    )
