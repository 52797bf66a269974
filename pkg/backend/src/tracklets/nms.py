"""
Tracklet similarity, scoring and tracklet-level non-maximum suppression.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import DimensionError, InputError
from ..masks.rle import frame_intersection_area
from .tracklet import Tracklet, TrackletSet

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_MAX_KEEP = 10


def tracklet_iou(p: Tracklet, q: Tracklet) -> float:
    """
    Summed intersection over summed union across all frames.

    This is one global ratio, not a mean of per-frame IoUs. Two tracklets
    that are empty on every frame have IoU 1.0.
    """
    if (p.width, p.height, p.num_frames) != (q.width, q.height, q.num_frames):
        raise DimensionError(
            f"Cannot compare tracklets {p.id} and {q.id}: dimensions differ"
        )
    inter = 0
    union = 0
    for mp, mq in zip(p.masks, q.masks, strict=True):
        overlap = frame_intersection_area(mp, mq)
        inter += overlap
        union += mp.area + mq.area - overlap
    if union == 0:
        return 1.0
    return inter / union


def tracklet_score(t: Tracklet) -> float:
    """Detection confidence times the mean propagation probability."""
    return t.confidence * (sum(t.prop_prob) / len(t.prop_prob))


def iou_matrix(tracklets: Sequence[Tracklet], workers: int = 1) -> np.ndarray:
    """Symmetric pairwise tracklet-IoU matrix."""
    n = len(tracklets)
    matrix = np.eye(n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def pair_iou(pair: tuple[int, int]) -> float:
        return tracklet_iou(tracklets[pair[0]], tracklets[pair[1]])

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(pair_iou, pairs))
    else:
        values = [pair_iou(pair) for pair in pairs]
    for (i, j), v in zip(pairs, values, strict=True):
        matrix[i, j] = matrix[j, i] = v
    for i, t in enumerate(tracklets):
        # an all-empty tracklet still matches itself
        matrix[i, i] = tracklet_iou(t, t)
    return matrix


def merge_sources(sets: Sequence[TrackletSet]) -> TrackletSet:
    """Concatenate proposal sources, re-issuing ids so they stay unique."""
    if not sets:
        raise InputError("merge_sources needs at least one tracklet set")
    first = sets[0]
    for s in sets[1:]:
        if s.dims != first.dims:
            raise DimensionError(
                f"Cannot merge {s.video_id} ({s.dims}) "
                f"with {first.video_id} ({first.dims})"
            )
    if len(sets) == 1:
        return first

    merged = []
    for t in (t for s in sets for t in s):
        merged.append(
            Tracklet(
                id=f"{len(merged):04d}",
                source_frame=t.source_frame,
                source_model=t.source_model,
                masks=t.masks,
                confidence=t.confidence,
                prop_prob=t.prop_prob,
            )
        )
    return first.with_tracklets(merged)


def rank_tracklets(tracklets: Sequence[Tracklet]) -> list[Tracklet]:
    """Descending score, ties broken by the smaller id."""
    return sorted(tracklets, key=lambda t: (-tracklet_score(t), t.id))


def tracklet_nms(
    tracklet_set: TrackletSet,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    max_keep: int = DEFAULT_MAX_KEEP,
    workers: int = 1,
) -> TrackletSet:
    """
    Greedy suppression of redundant tracklets.

    The highest-scoring remaining tracklet is kept and every remaining one
    whose tracklet-IoU with it reaches `iou_threshold` is dropped, until
    `max_keep` tracklets are kept or none remain.

    Args:
        tracklet_set: Candidate tracklets of one video
        iou_threshold: Suppression threshold in [0, 1]
        max_keep: Maximum number of tracklets kept
        workers: Threads used for the pairwise IoU matrix

    Returns:
        Kept tracklets in descending score order
    """
    if max_keep < 1:
        raise InputError(f"max_keep must be at least 1, got {max_keep}")
    if not 0.0 <= iou_threshold <= 1.0:
        raise InputError(f"iou_threshold must lie in [0, 1], got {iou_threshold}")

    ranked = rank_tracklets(tracklet_set.tracklets)
    ious = iou_matrix(ranked, workers)
    remaining = list(range(len(ranked)))
    kept: list[Tracklet] = []
    while remaining and len(kept) < max_keep:
        top, rest = remaining[0], remaining[1:]
        kept.append(ranked[top])
        remaining = [i for i in rest if ious[top, i] < iou_threshold]

    logger.info(
        f"NMS on {tracklet_set.video_id}: {len(tracklet_set)} candidates -> "
        f"{len(kept)} kept "
        f"(threshold={iou_threshold}, max_keep={max_keep})"
    )
    return tracklet_set.with_tracklets(kept)
