"""
Synthetic benchmark suites: many scenes plus every file the pipeline reads.

Layout written by `write_suite`:

    <out>/synth_config.json
    <out>/analytic.tlgw, <out>/analytic-sharp.tlgw
    <out>/scenes/<video>/scene.json
    <out>/scenes/<video>/proposals.json
    <out>/scenes/<video>/features.tlg      (T, h, w, D)
    <out>/scenes/<video>/tokens.tlg        (L, D)
    <out>/ground_truth/<video>.json
"""

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from ..errors import ConfigError
from ..grounding.model import analytic_dim, analytic_model, save_model
from ..grounding.tensor_io import write_tensor
from ..tracklets.tracklet import (
    MaskSequence,
    TrackletSet,
    dumps,
    save_mask_sequence,
    save_proposals,
)
from .features import attribute_features
from .proposals import scene_proposals
from .scene import Scene, SynthConfig, generate_scene

logger = logging.getLogger(__name__)

CHECKPOINTS = {"analytic.tlgw": 20.0, "analytic-sharp.tlgw": 40.0}


def load_synth_config(path: str | Path | None = None, **overrides: Any) -> SynthConfig:
    """Generator settings from an optional JSON file plus non-None overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            values = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"Cannot read synth config {path}: {e}") from e
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SynthConfig(**values)
    except (TypeError, ValidationError) as e:
        raise ConfigError(f"Invalid synth config: {e}") from e


def scene_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def generate_suite(config: SynthConfig, count: int, seed: int = 0) -> list[Scene]:
    """`count` scenes with ids scene-0000, scene-0001, ..."""
    return [
        generate_scene(config, scene_seed(seed, i), f"scene-{i:04d}")
        for i in range(count)
    ]


def feature_dim(config: SynthConfig) -> int:
    """Channel count of suite features; wide enough for the analytic model."""
    return analytic_dim(config.attribute_dims, config.num_heads)


def write_scene(scene: Scene, config: SynthConfig, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "scene.json").write_text(dumps(scene.to_dict()), encoding="utf-8")

    video = TrackletSet(scene.video_id, scene.width, scene.height, scene.num_frames)
    save_proposals(video, scene_proposals(scene, config), directory / "proposals.json")

    fmaps, tokens = attribute_features(
        scene, config.grid_width, config.grid_height, feature_dim(config)
    )
    write_tensor(directory / "features.tlg", np.stack([f.data for f in fmaps]))
    write_tensor(directory / "tokens.tlg", tokens.data)


def write_suite(
    out_dir: str | Path, config: SynthConfig, count: int, seed: int = 0
) -> list[Scene]:
    """Generate a suite and write it with ground truth and analytic checkpoints."""
    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    (out / "ground_truth").mkdir(parents=True, exist_ok=True)
    (out / "synth_config.json").write_text(dumps(config.model_dump()), encoding="utf-8")

    for name, temperature in CHECKPOINTS.items():
        model = analytic_model(
            config.attribute_dims,
            num_heads=config.num_heads,
            temperature=temperature,
        )
        save_model(model, out / name)

    scenes = generate_suite(config, count, seed)
    for scene in scenes:
        write_scene(scene, config, out / "scenes" / scene.video_id)
        truth = MaskSequence(scene.video_id, scene.referent_masks())
        save_mask_sequence(truth, out / "ground_truth" / f"{scene.video_id}.json")
    logger.info(f"Wrote {len(scenes)} synthetic scenes to {out}")
    return scenes
