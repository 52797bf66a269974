"""
Tracklet data model and its JSON file format.

A tracklet is one object candidate traced through every frame of a video:
a mask per frame, the detection confidence of the proposal it grew from,
and the propagation probability of each frame. Proposal files use the same
layout with masks present only at `source_frame`.
"""

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import DimensionError, FormatError, InputError
from ..masks.rle import BinaryMask

logger = logging.getLogger(__name__)


def _check_probability(value: float, what: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise InputError(f"{what} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class Tracklet:
    """A video-length mask sequence grown from one key-frame proposal."""

    id: str
    source_frame: int
    source_model: str
    masks: tuple[BinaryMask, ...]
    confidence: float
    prop_prob: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        object.__setattr__(self, "prop_prob", tuple(float(p) for p in self.prop_prob))
        if not self.masks:
            raise InputError(f"Tracklet {self.id} has no frames")
        if len(self.masks) != len(self.prop_prob):
            raise InputError(
                f"Tracklet {self.id}: {len(self.masks)} masks but "
                f"{len(self.prop_prob)} propagation probabilities"
            )
        if not 0 <= self.source_frame < len(self.masks):
            raise InputError(
                f"Tracklet {self.id}: source frame {self.source_frame} outside "
                f"[0, {len(self.masks)})"
            )
        shape = self.masks[0].shape
        if any(m.shape != shape for m in self.masks):
            raise DimensionError(f"Tracklet {self.id}: masks differ in size")
        _check_probability(self.confidence, f"Tracklet {self.id} confidence")
        for p in self.prop_prob:
            _check_probability(p, f"Tracklet {self.id} propagation probability")
        if self.prop_prob[self.source_frame] != 1.0:
            raise InputError(
                f"Tracklet {self.id}: propagation probability at its source frame "
                "must be 1"
            )

    @property
    def num_frames(self) -> int:
        return len(self.masks)

    @property
    def width(self) -> int:
        return self.masks[0].width

    @property
    def height(self) -> int:
        return self.masks[0].height

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "source_frame": self.source_frame,
            "source_model": self.source_model,
            "confidence": self.confidence,
            "prop_prob": list(self.prop_prob),
            "masks": [m.to_dict() for m in self.masks],
        }


@dataclass(frozen=True)
class TrackletSet:
    """Tracklets of one video; all members share width, height and frame count."""

    video_id: str
    width: int
    height: int
    num_frames: int
    tracklets: tuple[Tracklet, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "tracklets", tuple(self.tracklets))
        seen = set()
        for t in self.tracklets:
            if (t.width, t.height, t.num_frames) != self.dims:
                raise DimensionError(
                    f"Tracklet {t.id} is {t.width}x{t.height}x{t.num_frames}, "
                    f"video {self.video_id} is "
                    f"{self.width}x{self.height}x{self.num_frames}"
                )
            if t.id in seen:
                raise InputError(
                    f"Duplicate tracklet id '{t.id}' in video {self.video_id}"
                )
            seen.add(t.id)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.width, self.height, self.num_frames)

    def __len__(self) -> int:
        return len(self.tracklets)

    def __iter__(self):
        return iter(self.tracklets)

    def with_tracklets(self, tracklets: Iterable[Tracklet]) -> "TrackletSet":
        return TrackletSet(
            self.video_id, self.width, self.height, self.num_frames, tuple(tracklets)
        )

    def select(self, ids: Sequence[str]) -> "TrackletSet":
        """Subset in the order of `ids`."""
        by_id = {t.id: t for t in self.tracklets}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise InputError(
                f"Unknown tracklet ids in video {self.video_id}: {missing}"
            )
        return self.with_tracklets(by_id[i] for i in ids)

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "width": self.width,
            "height": self.height,
            "num_frames": self.num_frames,
            "tracklets": [t.to_dict() for t in self.tracklets],
        }


@dataclass(frozen=True)
class Proposal:
    """A single key-frame mask candidate before propagation."""

    key_frame: int
    mask: BinaryMask
    confidence: float
    source_model: str
    id: str = ""


def dumps(data: dict[str, Any]) -> str:
    """Stable JSON text used for every artifact file."""
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _read_json(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e.strerror or e}") from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e


def tracklet_set_from_dict(data: dict[str, Any]) -> TrackletSet:
    try:
        width = int(data["width"])
        height = int(data["height"])
        num_frames = int(data["num_frames"])
        tracklets = [
            Tracklet(
                id=str(item["id"]),
                source_frame=int(item["source_frame"]),
                source_model=str(item.get("source_model", "")),
                masks=tuple(BinaryMask.from_dict(m) for m in item["masks"]),
                confidence=float(item["confidence"]),
                prop_prob=tuple(item["prop_prob"]),
            )
            for item in data["tracklets"]
        ]
        return TrackletSet(
            str(data["video_id"]), width, height, num_frames, tuple(tracklets)
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise FormatError(f"Malformed tracklet set: {e!r}") from e


def load_tracklet_set(path: str | Path) -> TrackletSet:
    return tracklet_set_from_dict(_read_json(path))


def save_tracklet_set(tracklet_set: TrackletSet, path: str | Path) -> None:
    Path(path).write_text(dumps(tracklet_set.to_dict()), encoding="utf-8")
    logger.info(
        f"Wrote {len(tracklet_set)} tracklets for {tracklet_set.video_id} to {path}"
    )


def proposals_from_dict(data: dict[str, Any]) -> tuple[TrackletSet, list[Proposal]]:
    """
    Parse a proposal file.

    Returns:
        An empty TrackletSet carrying the video dimensions, and the proposals
    """
    try:
        video = TrackletSet(
            str(data["video_id"]),
            int(data["width"]),
            int(data["height"]),
            int(data["num_frames"]),
        )
        proposals = []
        for item in data["tracklets"]:
            key = int(item["source_frame"])
            masks = item["masks"]
            if not 0 <= key < video.num_frames or len(masks) != video.num_frames:
                raise InputError(
                    f"Proposal {item.get('id')} does not fit video {video.video_id}"
                )
            if masks[key] is None:
                raise InputError(
                    f"Proposal {item.get('id')} has no mask at its source frame"
                )
            mask = BinaryMask.from_dict(masks[key])
            if (mask.width, mask.height) != (video.width, video.height):
                raise DimensionError(
                    f"Proposal {item.get('id')} mask size differs from video"
                )
            proposals.append(
                Proposal(
                    key_frame=key,
                    mask=mask,
                    confidence=float(item["confidence"]),
                    source_model=str(item.get("source_model", "")),
                    id=str(item.get("id", "")),
                )
            )
        return video, proposals
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise FormatError(f"Malformed proposal file: {e!r}") from e


def proposals_to_dict(
    video: TrackletSet, proposals: Sequence[Proposal]
) -> dict[str, Any]:
    items = []
    for i, p in enumerate(proposals):
        masks: list[Any] = [None] * video.num_frames
        masks[p.key_frame] = p.mask.to_dict()
        items.append(
            {
                "id": p.id or f"{i:04d}",
                "source_frame": p.key_frame,
                "source_model": p.source_model,
                "confidence": p.confidence,
                "prop_prob": None,
                "masks": masks,
            }
        )
    return {
        "video_id": video.video_id,
        "width": video.width,
        "height": video.height,
        "num_frames": video.num_frames,
        "tracklets": items,
    }


def load_proposals(path: str | Path) -> tuple[TrackletSet, list[Proposal]]:
    return proposals_from_dict(_read_json(path))


def save_proposals(
    video: TrackletSet, proposals: Sequence[Proposal], path: str | Path
) -> None:
    Path(path).write_text(dumps(proposals_to_dict(video, proposals)), encoding="utf-8")


@dataclass(frozen=True)
class MaskSequence:
    """A single per-frame mask sequence: a prediction or a ground-truth track."""

    video_id: str
    masks: tuple[BinaryMask, ...]

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        if not self.masks:
            raise InputError(f"Mask sequence for {self.video_id} has no frames")
        shape = self.masks[0].shape
        if any(m.shape != shape for m in self.masks):
            raise DimensionError(
                f"Mask sequence for {self.video_id}: masks differ in size"
            )

    @property
    def num_frames(self) -> int:
        return len(self.masks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "width": self.masks[0].width,
            "height": self.masks[0].height,
            "num_frames": self.num_frames,
            "masks": [m.to_dict() for m in self.masks],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MaskSequence":
        try:
            masks = tuple(BinaryMask.from_dict(m) for m in data["masks"])
            sequence = cls(str(data["video_id"]), masks)
            declared = (
                int(data["width"]),
                int(data["height"]),
                int(data["num_frames"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InputError):
                raise
            raise FormatError(f"Malformed mask sequence: {e!r}") from e
        first = sequence.masks[0]
        actual = (first.width, first.height, sequence.num_frames)
        if declared != actual:
            raise DimensionError(
                f"Mask sequence {sequence.video_id} declares {declared} "
                f"but holds {actual}"
            )
        return sequence


def load_mask_sequence(path: str | Path) -> MaskSequence:
    return MaskSequence.from_dict(_read_json(path))


def save_mask_sequence(sequence: MaskSequence, path: str | Path) -> None:
    Path(path).write_text(dumps(sequence.to_dict()), encoding="utf-8")


def load_mask_sequences(directory: str | Path) -> dict[str, MaskSequence]:
    """Every `*.json` mask sequence in a directory, keyed by video id."""
    sequences: dict[str, MaskSequence] = {}
    for path in sorted(Path(directory).glob("*.json")):
        sequence = load_mask_sequence(path)
        if sequence.video_id in sequences:
            raise InputError(f"Video {sequence.video_id} appears twice in {directory}")
        sequences[sequence.video_id] = sequence
    return sequences
