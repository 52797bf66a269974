"""
Per-video pipeline inputs, from disk or straight from synthetic scenes.

A video directory holds `proposals.json`, `features.tlg` (T, h, w, D),
`tokens.tlg` (L, D) and optionally `scene.json`, which the oracle
propagator needs.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionError, InputError
from ..grounding.features import FeatureMap, TokenFeatures
from ..grounding.tensor_io import read_tensor
from ..synth.features import attribute_features
from ..synth.proposals import scene_proposals
from ..synth.scene import Scene, SynthConfig, load_scene
from ..synth.suite import feature_dim
from ..tracklets.tracklet import (
    MaskSequence,
    Proposal,
    TrackletSet,
    load_mask_sequence,
    load_proposals,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VideoInputs:
    """Everything the pipeline consumes for one (video, expression) pair."""

    video: TrackletSet
    proposals: tuple[Proposal, ...]
    feature_maps: tuple[FeatureMap, ...]
    tokens: TokenFeatures
    scene: Scene | None = None
    ground_truth: MaskSequence | None = None

    def __post_init__(self):
        object.__setattr__(self, "proposals", tuple(self.proposals))
        object.__setattr__(self, "feature_maps", tuple(self.feature_maps))
        if len(self.feature_maps) != self.video.num_frames:
            raise DimensionError(
                f"Video {self.video_id} has {self.video.num_frames} frames but "
                f"{len(self.feature_maps)} feature maps"
            )
        channels = {f.channels for f in self.feature_maps} | {self.tokens.channels}
        if len(channels) != 1:
            raise DimensionError(
                f"Video {self.video_id}: feature widths differ {sorted(channels)}"
            )
        truth = self.ground_truth
        if truth is not None and truth.num_frames != self.video.num_frames:
            raise DimensionError(
                f"Video {self.video_id}: ground truth length differs from the video"
            )

    @property
    def video_id(self) -> str:
        return self.video.video_id


def inputs_from_scene(scene: Scene, config: SynthConfig) -> VideoInputs:
    """In-memory inputs for a scene, identical to what `write_suite` stores."""
    fmaps, tokens = attribute_features(
        scene, config.grid_width, config.grid_height, feature_dim(config)
    )
    # the written suite stores float32; match it so both paths agree exactly
    fmaps = [FeatureMap(f.data.astype(np.float32)) for f in fmaps]
    tokens = TokenFeatures(tokens.data.astype(np.float32))
    return VideoInputs(
        video=TrackletSet(scene.video_id, scene.width, scene.height, scene.num_frames),
        proposals=tuple(scene_proposals(scene, config)),
        feature_maps=tuple(fmaps),
        tokens=tokens,
        scene=scene,
        ground_truth=MaskSequence(scene.video_id, scene.referent_masks()),
    )


def load_video_inputs(
    directory: str | Path, ground_truth: MaskSequence | None = None
) -> VideoInputs:
    directory = Path(directory)
    if not (directory / "proposals.json").is_file():
        raise InputError(f"{directory} has no proposals.json")
    video, proposals = load_proposals(directory / "proposals.json")

    features = read_tensor(directory / "features.tlg")
    if features.ndim != 4:
        raise DimensionError(
            f"{directory}/features.tlg must be (T, h, w, D), got {features.shape}"
        )
    tokens = read_tensor(directory / "tokens.tlg")

    scene = None
    if (directory / "scene.json").is_file():
        scene = load_scene(directory / "scene.json")
        if (scene.width, scene.height, scene.num_frames) != video.dims:
            raise DimensionError(
                f"{directory}: scene.json does not match proposals.json"
            )

    return VideoInputs(
        video=video,
        proposals=tuple(proposals),
        feature_maps=tuple(FeatureMap(f) for f in features),
        tokens=TokenFeatures(tokens),
        scene=scene,
        ground_truth=ground_truth,
    )


def load_inputs(root: str | Path) -> list[VideoInputs]:
    """
    Load every video under `<root>/scenes/`.

    `<root>/ground_truth/<video>.json` is attached when present. Videos are
    returned sorted by directory name.
    """
    root = Path(root)
    scenes_dir = root / "scenes"
    if not scenes_dir.is_dir():
        raise InputError(f"{root} has no scenes/ directory")
    inputs = []
    for directory in sorted(p for p in scenes_dir.iterdir() if p.is_dir()):
        truth_path = root / "ground_truth" / f"{directory.name}.json"
        truth = load_mask_sequence(truth_path) if truth_path.is_file() else None
        inputs.append(load_video_inputs(directory, truth))
    if not inputs:
        raise InputError(f"No videos found under {scenes_dir}")
    logger.info(f"Loaded inputs for {len(inputs)} videos from {root}")
    return inputs


def ground_truth_of(inputs: Sequence[VideoInputs]) -> dict[str, MaskSequence]:
    missing = [i.video_id for i in inputs if i.ground_truth is None]
    if missing:
        raise InputError(f"No ground truth for videos {missing}")
    return {i.video_id: i.ground_truth for i in inputs}
