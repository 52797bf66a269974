"""
Synthetic moving-shapes scenes with templated referring expressions.

Every scene is a short video of coloured shapes moving at constant integer
velocity. One object is the referent and the expression names just enough
of its attributes (colour, shape, motion direction) to single it out, so
the correct answer of the whole pipeline is known by construction.
"""

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image, ImageDraw
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import ConfigError, FormatError, InputError
from ..masks.rle import BinaryMask, encode

logger = logging.getLogger(__name__)

COLORS = ("red", "green", "blue", "yellow", "purple", "orange", "cyan", "white")
SHAPES = ("square", "disk", "triangle")
# index 0 is "static"; the rest are compass sectors counter-clockwise from east
MOTIONS = (
    "static",
    "east",
    "northeast",
    "north",
    "northwest",
    "west",
    "southwest",
    "south",
    "southeast",
)
# unit steps per sector, image y grows downwards
_MOTION_STEPS = {
    "static": (0, 0),
    "east": (1, 0),
    "northeast": (1, -1),
    "north": (0, -1),
    "northwest": (-1, -1),
    "west": (-1, 0),
    "southwest": (-1, 1),
    "south": (0, 1),
    "southeast": (1, 1),
}
ATTRIBUTES = ("color", "shape", "motion")
# (colour index, shape, motion)
Attributes = tuple[int, str, str]

MAX_OBJECTS = 5
_PLACEMENT_ATTEMPTS = 400
_SCENE_ATTEMPTS = 25


class SynthConfig(BaseModel):
    """Generator settings for one synthetic suite."""

    model_config = ConfigDict(extra="forbid")

    width: int = Field(64, ge=8)
    height: int = Field(64, ge=8)
    num_frames: int = Field(12, ge=1)
    min_objects: int = Field(1, ge=1, le=MAX_OBJECTS)
    max_objects: int = Field(MAX_OBJECTS, ge=1, le=MAX_OBJECTS)
    num_colors: int = Field(4, ge=1, le=len(COLORS))
    min_size: int = Field(6, ge=2)
    max_size: int = Field(12, ge=2)
    max_speed: int = Field(2, ge=0)
    cell_size: int = Field(4, ge=1)
    hard: bool = False
    noise: float = Field(0.0, ge=0.0, le=1.0)
    num_heads: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        if self.min_objects > self.max_objects:
            raise ValueError("min_objects exceeds max_objects")
        if self.min_size > self.max_size:
            raise ValueError("min_size exceeds max_size")
        if self.max_size > min(self.width, self.height):
            raise ValueError("max_size does not fit in the frame")
        if self.cell_size > min(self.width, self.height):
            raise ValueError("cell_size exceeds the frame size")
        return self

    @property
    def grid_width(self) -> int:
        return self.width // self.cell_size

    @property
    def grid_height(self) -> int:
        return self.height // self.cell_size

    @property
    def attribute_dims(self) -> int:
        return self.num_colors + len(SHAPES) + len(MOTIONS)


def motion_bucket(vx: int, vy: int) -> str:
    """Quantise a velocity into 8 compass sectors plus static."""
    if vx == 0 and vy == 0:
        return "static"
    angle = math.atan2(-vy, vx)
    sector = round(angle / (math.pi / 4)) % 8
    return MOTIONS[1 + sector]


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: int
    size: int
    start: tuple[int, int]
    velocity: tuple[int, int]

    @property
    def motion(self) -> str:
        return motion_bucket(*self.velocity)

    def attributes(self) -> Attributes:
        return (self.color, self.shape, self.motion)

    def position(self, frame: int) -> tuple[int, int]:
        return (
            self.start[0] + frame * self.velocity[0],
            self.start[1] + frame * self.velocity[1],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "shape": self.shape,
            "color": self.color,
            "size": self.size,
            "start": list(self.start),
            "velocity": list(self.velocity),
        }


def render_shape(
    shape: str, x: int, y: int, size: int, width: int, height: int
) -> np.ndarray:
    """Rasterise one shape whose bounding box has top-left corner (x, y)."""
    canvas = Image.new("1", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    box = [x, y, x + size - 1, y + size - 1]
    if shape == "square":
        draw.rectangle(box, fill=1)
    elif shape == "disk":
        draw.ellipse(box, fill=1)
    elif shape == "triangle":
        bottom = y + size - 1
        apex = (x + (size - 1) // 2, y)
        draw.polygon([(x, bottom), (x + size - 1, bottom), apex], fill=1)
    else:
        raise ConfigError(f"Unknown shape '{shape}'")
    return np.array(canvas, dtype=bool)


@dataclass(frozen=True)
class Scene:
    """A rendered synthetic video with one referring expression."""

    video_id: str
    seed: int
    width: int
    height: int
    num_frames: int
    num_colors: int
    objects: tuple[SceneObject, ...]
    referent_index: int
    expression: tuple[int, ...]

    @cached_property
    def _masks(self) -> tuple[tuple[BinaryMask, ...], ...]:
        return tuple(
            tuple(
                encode(
                    render_shape(
                        o.shape, *o.position(t), o.size, self.width, self.height
                    )
                )
                for t in range(self.num_frames)
            )
            for o in self.objects
        )

    def object_masks(self, index: int) -> tuple[BinaryMask, ...]:
        """Ground-truth mask sequence of one object."""
        return self._masks[index]

    def referent_masks(self) -> tuple[BinaryMask, ...]:
        return self.object_masks(self.referent_index)

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return vocabulary(self.num_colors)

    def expression_words(self) -> list[str]:
        return [self.vocabulary[i] for i in self.expression]

    def expression_text(self) -> str:
        words = self.expression_words()
        motions = [w for w in words if w in MOTIONS]
        nouns = [w for w in words if w in SHAPES] or ["object"]
        adjectives = [w for w in words if w in COLORS]
        text = " ".join(["the", *adjectives, *nouns])
        if motions:
            if motions[0] == "static":
                text += " that is static"
            else:
                text += f" moving {motions[0]}"
        return text

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_id": self.video_id,
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "num_frames": self.num_frames,
            "num_colors": self.num_colors,
            "objects": [o.to_dict() for o in self.objects],
            "referent_index": self.referent_index,
            "expression": list(self.expression),
            "expression_words": self.expression_words(),
            "expression_text": self.expression_text(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scene":
        try:
            return cls(
                video_id=str(data["video_id"]),
                seed=int(data["seed"]),
                width=int(data["width"]),
                height=int(data["height"]),
                num_frames=int(data["num_frames"]),
                num_colors=int(data["num_colors"]),
                objects=tuple(
                    SceneObject(
                        shape=o["shape"],
                        color=int(o["color"]),
                        size=int(o["size"]),
                        start=(int(o["start"][0]), int(o["start"][1])),
                        velocity=(int(o["velocity"][0]), int(o["velocity"][1])),
                    )
                    for o in data["objects"]
                ),
                referent_index=int(data["referent_index"]),
                expression=tuple(int(i) for i in data["expression"]),
            )
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise FormatError(f"Malformed scene description: {e!r}") from e


def vocabulary(num_colors: int) -> tuple[str, ...]:
    """Token vocabulary: colour words, then shape words, then motion words."""
    return COLORS[:num_colors] + SHAPES + MOTIONS


def _attribute_words(obj: SceneObject) -> dict[str, str]:
    return {"color": COLORS[obj.color], "shape": obj.shape, "motion": obj.motion}


def unique_description(
    objects: tuple[SceneObject, ...], referent: int
) -> tuple[str, ...] | None:
    """
    Smallest attribute subset that tells the referent apart from every other object.

    Subsets are tried by size, then in colour, shape, motion order.
    """
    subsets = [
        ("color",),
        ("shape",),
        ("motion",),
        ("color", "shape"),
        ("color", "motion"),
        ("shape", "motion"),
        ATTRIBUTES,
    ]
    target = _attribute_words(objects[referent])
    for subset in subsets:
        if all(
            any(_attribute_words(o)[a] != target[a] for a in subset)
            for i, o in enumerate(objects)
            if i != referent
        ):
            return subset
    return None


def _velocity_for(
    motion: str, rng: np.random.Generator, max_speed: int
) -> tuple[int, int]:
    dx, dy = _MOTION_STEPS[motion]
    if motion == "static":
        return (0, 0)
    speed = int(rng.integers(1, max_speed + 1))
    return (dx * speed, dy * speed)


def _motion_pool(config: SynthConfig) -> tuple[str, ...]:
    return MOTIONS if config.max_speed > 0 else ("static",)


def _sample_attributes(rng: np.random.Generator, config: SynthConfig) -> Attributes:
    motions = _motion_pool(config)
    return (
        int(rng.integers(config.num_colors)),
        SHAPES[int(rng.integers(len(SHAPES)))],
        motions[int(rng.integers(len(motions)))],
    )


def _one_off_variants(
    referent: Attributes, slot: int, config: SynthConfig
) -> list[Attributes]:
    """Every triple equal to the referent except at `slot`."""
    color, shape, motion = referent
    if slot == 0:
        return [(c, shape, motion) for c in range(config.num_colors) if c != color]
    if slot == 1:
        return [(color, s, motion) for s in SHAPES if s != shape]
    return [(color, shape, m) for m in _motion_pool(config) if m != motion]


def _hard_distractor(
    referent: Attributes,
    taken: list[Attributes],
    slot: int,
    rng: np.random.Generator,
    config: SynthConfig,
) -> Attributes | None:
    """
    A new triple sharing as many attributes with the referent as the scene allows.

    One-attribute variants are tried starting at `slot`; once those run out
    the distractor keeps at least one of the referent's attributes.
    """
    for offset in range(3):
        variants = _one_off_variants(referent, (slot + offset) % 3, config)
        choices = [a for a in variants if a not in taken]
        if choices:
            return choices[int(rng.integers(len(choices)))]
    choices = [
        (c, s, m)
        for c in range(config.num_colors)
        for s in SHAPES
        for m in _motion_pool(config)
        if (c, s, m) not in taken
        and (c == referent[0] or s == referent[1] or m == referent[2])
    ]
    if not choices:
        return None
    return choices[int(rng.integers(len(choices)))]


def _boxes_clear(a: SceneObject, b: SceneObject, frames: int, gap: int) -> bool:
    for t in range(frames):
        ax, ay = a.position(t)
        bx, by = b.position(t)
        apart_x = ax + a.size + gap <= bx or bx + b.size + gap <= ax
        apart_y = ay + a.size + gap <= by or by + b.size + gap <= ay
        if not (apart_x or apart_y):
            return False
    return True


def _place(
    attrs: Attributes,
    placed: list[SceneObject],
    rng: np.random.Generator,
    config: SynthConfig,
) -> SceneObject | None:
    color, shape, motion = attrs
    span = config.num_frames - 1
    # one full feature cell between objects keeps every cell single-object
    gap = max(
        math.ceil(config.width / config.grid_width),
        math.ceil(config.height / config.grid_height),
    )
    for _ in range(_PLACEMENT_ATTEMPTS):
        size = int(rng.integers(config.min_size, config.max_size + 1))
        vx, vy = _velocity_for(motion, rng, config.max_speed)
        lo_x, hi_x = max(0, -span * vx), config.width - size - max(0, span * vx)
        lo_y, hi_y = max(0, -span * vy), config.height - size - max(0, span * vy)
        if lo_x > hi_x or lo_y > hi_y:
            continue
        start = (int(rng.integers(lo_x, hi_x + 1)), int(rng.integers(lo_y, hi_y + 1)))
        candidate = SceneObject(shape, color, size, start, (vx, vy))
        frames = config.num_frames
        if all(_boxes_clear(candidate, other, frames, gap) for other in placed):
            return candidate
    return None


def generate_scene(
    config: SynthConfig, seed: int, video_id: str | None = None
) -> Scene:
    """
    Generate one scene deterministically from (config, seed).

    Objects never overlap and stay fully inside the frame. All attribute
    triples are distinct, so the expression always identifies exactly one
    object. In hard mode each distractor differs from the referent in one
    attribute while such triples remain and always shares at least one.

    Raises:
        ConfigError: if the attribute space or frame cannot hold the objects
    """
    rng = np.random.default_rng(seed)
    num_objects = int(rng.integers(config.min_objects, config.max_objects + 1))
    video_id = video_id or f"scene-{seed}"

    for _ in range(_SCENE_ATTEMPTS):
        referent_attrs = _sample_attributes(rng, config)
        attrs = [referent_attrs]
        while len(attrs) < num_objects:
            if config.hard:
                slot = (len(attrs) - 1) % 3
                candidate = _hard_distractor(referent_attrs, attrs, slot, rng, config)
                if candidate is None:
                    raise ConfigError(
                        f"Cannot make {num_objects} hard distractors from "
                        f"{config.num_colors} colours; increase num_colors or max_speed"
                    )
            else:
                candidate = _sample_attributes(rng, config)
            if candidate not in attrs:
                attrs.append(candidate)
            elif len(set(attrs)) >= _attribute_space(config):
                raise ConfigError(
                    f"Cannot make {num_objects} objects with distinct attributes from "
                    f"{config.num_colors} colours; increase num_colors or max_speed"
                )

        placed: list[SceneObject] = []
        for a in attrs:
            obj = _place(a, placed, rng, config)
            if obj is None:
                break
            placed.append(obj)
        if len(placed) < num_objects:
            continue

        # referent goes to a random slot so its index carries no information
        order = [int(i) for i in rng.permutation(num_objects)]
        objects = tuple(placed[i] for i in order)
        referent = order.index(0)
        subset = unique_description(objects, referent)
        if subset is None:
            raise ConfigError(
                "Referent cannot be described uniquely; add attribute variety"
            )
        vocab = vocabulary(config.num_colors)
        words = _attribute_words(objects[referent])
        expression = tuple(vocab.index(words[a]) for a in subset)
        return Scene(
            video_id=video_id,
            seed=seed,
            width=config.width,
            height=config.height,
            num_frames=config.num_frames,
            num_colors=config.num_colors,
            objects=objects,
            referent_index=referent,
            expression=expression,
        )

    raise ConfigError(
        f"Could not place {num_objects} non-overlapping objects in a "
        f"{config.width}x{config.height} frame; reduce object count, size or speed"
    )


def _attribute_space(config: SynthConfig) -> int:
    motions = len(MOTIONS) if config.max_speed > 0 else 1
    return config.num_colors * len(SHAPES) * motions


def load_scene(path: str | Path) -> Scene:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"Cannot read scene {path}: {e.strerror or e}") from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e
    return Scene.from_dict(data)
