"""
Simulated instance-segmentation proposals for synthetic scenes.

Noise-free scenes get the exact ground-truth mask of every object on every
frame with confidence 1. Noisy scenes get two imperfect proposals per
object (one per simulated model) plus occasional spurious fragments.
"""

import numpy as np

from ..masks.morphology import boundary_mask
from ..masks.rle import BinaryMask, decode, encode
from ..tracklets.tracklet import Proposal
from .scene import Scene, SynthConfig

SOURCE_MODELS = ("htc", "condinst")


def erode_boundary(
    mask: BinaryMask, rate: float, rng: np.random.Generator
) -> BinaryMask:
    """Drop each boundary pixel with probability `rate`; never empties a mask."""
    if rate <= 0 or mask.is_empty():
        return mask
    grid = decode(mask)
    edge = decode(boundary_mask(mask, 0))
    grid &= ~(edge & (rng.random(grid.shape) < rate))
    if not grid.any():
        return mask
    return encode(grid)


def _spurious(scene: Scene, rng: np.random.Generator) -> BinaryMask:
    size_w, size_h = (int(v) for v in rng.integers(3, 7, size=2))
    x = int(rng.integers(0, scene.width - size_w + 1))
    y = int(rng.integers(0, scene.height - size_h + 1))
    grid = np.zeros((scene.height, scene.width), dtype=bool)
    grid[y : y + size_h, x : x + size_w] = True
    return encode(grid)


def scene_proposals(scene: Scene, config: SynthConfig) -> list[Proposal]:
    """Proposals on every frame; the pipeline keeps those on its key frames."""
    rng = np.random.default_rng([scene.seed, 1])
    proposals = []
    for t in range(scene.num_frames):
        for i in range(len(scene.objects)):
            mask = scene.object_masks(i)[t]
            if mask.is_empty():
                continue
            if config.noise <= 0:
                source = SOURCE_MODELS[0]
                proposals.append(
                    Proposal(t, mask, 1.0, source, f"f{t:03d}-o{i}-{source}")
                )
                continue
            for source in SOURCE_MODELS:
                confidence = round(float(rng.uniform(0.6, 1.0)), 4)
                noisy = erode_boundary(mask, config.noise, rng)
                proposals.append(
                    Proposal(t, noisy, confidence, source, f"f{t:03d}-o{i}-{source}")
                )
        if config.noise > 0 and rng.random() < 0.5:
            confidence = round(float(rng.uniform(0.05, 0.4)), 4)
            spurious = _spurious(scene, rng)
            proposals.append(
                Proposal(
                    t, spurious, confidence, SOURCE_MODELS[1], f"f{t:03d}-spurious"
                )
            )
    return proposals
