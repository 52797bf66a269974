import logging
import zlib
from typing import Any

import numpy as np

from ..errors import InputError, PropagationError
from ..masks.rle import BinaryMask, frame_intersection_area, translate
from ..synth.proposals import erode_boundary
from .base import Propagator, VideoContext

logger = logging.getLogger(__name__)


class SyntheticOraclePropagator(Propagator):
    """
    Moves the seed mask with the known motion of the scene object it covers.

    The seed is matched to the scene object it overlaps most on the key
    frame; seeds overlapping nothing stay in place. With noise enabled each
    propagated frame loses boundary pixels at random and the probability
    decays by `decay` per frame of distance from the key frame.
    """

    def __init__(self, noise: float = 0.0, decay: float = 1.0, seed: int = 0):
        if not 0.0 <= noise <= 1.0:
            raise InputError(f"Oracle noise must lie in [0, 1], got {noise}")
        if not 0.0 <= decay <= 1.0:
            raise InputError(f"Oracle decay must lie in [0, 1], got {decay}")
        self.noise = noise
        self.decay = decay
        self.seed = seed

    def _velocity(
        self, seed: BinaryMask, key: int, context: VideoContext
    ) -> tuple[int, int]:
        scene = context.scene
        best, best_overlap = None, 0
        for i, obj in enumerate(scene.objects):
            overlap = frame_intersection_area(seed, scene.object_masks(i)[key])
            if overlap > best_overlap:
                best, best_overlap = obj, overlap
        return best.velocity if best is not None else (0, 0)

    def _rng(self, seed: BinaryMask, key: int, target: int) -> np.random.Generator:
        digest = zlib.crc32(np.asarray(seed.runs, dtype=np.int64).tobytes())
        return np.random.default_rng([self.seed, key, target, digest])

    def propagate_frame(self, seed, key, target, context):
        if context.scene is None:
            raise PropagationError(
                f"video {context.video_id} has no scene for the oracle"
            )
        vx, vy = self._velocity(seed, key, context)
        steps = target - key
        mask = translate(seed, steps * vx, steps * vy)
        if mask.is_empty():
            raise PropagationError(f"object left the frame at {target}")
        if self.noise > 0:
            mask = erode_boundary(mask, self.noise, self._rng(seed, key, target))
        return mask, self.decay ** abs(steps)

    def get_config(self) -> dict[str, Any]:
        return {
            "name": "oracle",
            "noise": self.noise,
            "decay": self.decay,
            "seed": self.seed,
        }
