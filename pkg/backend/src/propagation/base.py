"""
Mask propagation contract and candidate tracklet construction.

A propagator extends one key-frame mask to the other frames of a video.
Implementations only answer "where is this object on frame t, and how
sure are you"; `propagate` enforces the contract around them.
"""

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

from ..errors import DimensionError, InputError, PropagationError
from ..masks.rle import BinaryMask
from ..tracklets.tracklet import Proposal, Tracklet, TrackletSet
from .keyframes import KeyFramePlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VideoContext:
    """What a propagator may know about the video besides the seed mask."""

    video_id: str
    width: int
    height: int
    num_frames: int
    scene: Any = None

    def empty_set(self) -> TrackletSet:
        return TrackletSet(self.video_id, self.width, self.height, self.num_frames)


class Propagator(ABC):
    """Abstract base class for mask propagation models."""

    @abstractmethod
    def propagate_frame(
        self, seed: BinaryMask, key: int, target: int, context: VideoContext
    ) -> tuple[BinaryMask, float]:
        """
        Predict the seed object's mask on one frame.

        Args:
            seed: Mask of the object on the key frame
            key: Key frame index
            target: Frame to predict, never equal to `key`
            context: Video being processed

        Returns:
            Mask on `target` and its propagation probability in [0, 1]

        Raises:
            PropagationError: if the object cannot be followed to `target`
        """
        pass

    @abstractmethod
    def get_config(self) -> dict[str, Any]:
        """Parameters of this propagator, recorded in result logs."""
        pass


class NoPropagation(Propagator):
    """Image-level baseline: the proposal exists on its key frame only."""

    def propagate_frame(self, seed, key, target, context):
        return BinaryMask.empty(context.width, context.height), 0.0

    def get_config(self) -> dict[str, Any]:
        return {"name": "none"}


def propagate(
    seed: BinaryMask,
    key: int,
    context: VideoContext,
    impl: Propagator,
    tracklet_id: str = "0000",
    confidence: float = 1.0,
    source_model: str = "",
) -> Tracklet:
    """
    Grow a tracklet from one key-frame mask, forwards and backwards.

    A frame the propagator fails on gets an empty mask with probability 0
    instead of aborting the tracklet.
    """
    if not 0 <= key < context.num_frames:
        raise InputError(f"Key frame {key} outside [0, {context.num_frames})")
    if (seed.width, seed.height) != (context.width, context.height):
        raise DimensionError(
            f"Seed mask is {seed.width}x{seed.height}, video {context.video_id} is "
            f"{context.width}x{context.height}"
        )

    masks: list[BinaryMask] = []
    probs: list[float] = []
    for t in range(context.num_frames):
        if t == key:
            masks.append(seed)
            probs.append(1.0)
            continue
        try:
            mask, prob = impl.propagate_frame(seed, key, t, context)
            if (mask.width, mask.height) != (context.width, context.height):
                raise PropagationError(
                    f"propagator returned a {mask.width}x{mask.height} mask"
                )
            if not 0.0 <= prob <= 1.0:
                raise PropagationError(f"propagator returned probability {prob}")
        except PropagationError as e:
            logger.warning(
                f"Propagation of {tracklet_id} from frame {key} lost frame {t} "
                f"in {context.video_id}: {e}"
            )
            mask, prob = BinaryMask.empty(context.width, context.height), 0.0
        masks.append(mask)
        probs.append(float(prob))

    return Tracklet(
        tracklet_id, key, source_model, tuple(masks), confidence, tuple(probs)
    )


def build_candidate_set(
    proposals: Sequence[Proposal],
    context: VideoContext,
    impl: Propagator,
    plan: KeyFramePlan | None = None,
    workers: int = 1,
) -> TrackletSet:
    """
    Propagate every key-frame proposal into the full candidate tracklet set.

    Tracklet ids are issued in proposal order.
    """
    if plan is not None:
        stray = sorted({p.key_frame for p in proposals if p.key_frame not in plan})
        if stray:
            raise InputError(
                f"Proposals on frames {stray} are not in the key-frame plan "
                f"{plan.indices}"
            )

    def grow(item: tuple[int, Proposal]) -> Tracklet:
        index, p = item
        return propagate(
            p.mask,
            p.key_frame,
            context,
            impl,
            f"{index:04d}",
            p.confidence,
            p.source_model,
        )

    if workers > 1 and len(proposals) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tracklets = list(pool.map(grow, enumerate(proposals)))
    else:
        tracklets = [grow(item) for item in enumerate(proposals)]

    logger.info(f"Built {len(tracklets)} candidate tracklets for {context.video_id}")
    return context.empty_set().with_tracklets(tracklets)


def select_key_proposals(
    proposals: Sequence[Proposal], plan: KeyFramePlan
) -> list[Proposal]:
    """Proposals that sit on one of the plan's key frames."""
    return [p for p in proposals if p.key_frame in plan]
