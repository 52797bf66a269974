"""
Region similarity (J), contour accuracy (F) and their mean, J&F.

Boundaries are the 4-connected edge pixels of each mask; a predicted
boundary pixel counts as matched when a ground-truth boundary pixel lies
within the tolerance (Chebyshev distance), and vice versa.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal

from ..errors import DimensionError, InputError
from ..masks.morphology import boundary_mask, dilate
from ..masks.rle import BinaryMask, frame_intersection_area, frame_iou
from ..tracklets.tracklet import MaskSequence

logger = logging.getLogger(__name__)

AUTO_TOLERANCE_RATIO = 0.0075

Tolerance = int | Literal["auto"]


def _check_pair(pred: Sequence[BinaryMask], gt: Sequence[BinaryMask]) -> None:
    if len(pred) != len(gt):
        raise InputError(
            f"Prediction has {len(pred)} frames, ground truth has {len(gt)}"
        )
    if not gt:
        raise InputError("Cannot evaluate an empty mask sequence")
    for t, (p, g) in enumerate(zip(pred, gt, strict=True)):
        if p.shape != g.shape:
            raise DimensionError(
                f"Frame {t}: prediction is {p.width}x{p.height}, "
                f"ground truth is {g.width}x{g.height}"
            )


def resolve_tolerance(tolerance: Tolerance, width: int, height: int) -> int:
    if tolerance == "auto":
        return math.ceil(AUTO_TOLERANCE_RATIO * math.hypot(width, height))
    if isinstance(tolerance, bool) or not isinstance(tolerance, int) or tolerance < 0:
        raise InputError(
            "Boundary tolerance must be 'auto' or a non-negative integer, "
            f"got {tolerance!r}"
        )
    return tolerance


def frame_boundary_f(pred: BinaryMask, gt: BinaryMask, tolerance: int) -> float:
    pred_edge = boundary_mask(pred)
    gt_edge = boundary_mask(gt)
    if pred_edge.is_empty() and gt_edge.is_empty():
        return 1.0
    if pred_edge.is_empty() or gt_edge.is_empty():
        return 0.0
    matched_pred = frame_intersection_area(pred_edge, dilate(gt_edge, tolerance))
    matched_gt = frame_intersection_area(gt_edge, dilate(pred_edge, tolerance))
    precision = matched_pred / pred_edge.area
    recall = matched_gt / gt_edge.area
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def region_similarity(pred: Sequence[BinaryMask], gt: Sequence[BinaryMask]) -> float:
    """Mean per-frame IoU; frames where both masks are empty score 1."""
    _check_pair(pred, gt)
    return sum(frame_iou(p, g) for p, g in zip(pred, gt, strict=True)) / len(gt)


def contour_accuracy(
    pred: Sequence[BinaryMask], gt: Sequence[BinaryMask], tolerance: Tolerance = "auto"
) -> float:
    """Mean per-frame boundary F-measure."""
    _check_pair(pred, gt)
    radius = resolve_tolerance(tolerance, gt[0].width, gt[0].height)
    pairs = zip(pred, gt, strict=True)
    return sum(frame_boundary_f(p, g, radius) for p, g in pairs) / len(gt)


@dataclass(frozen=True)
class VideoScore:
    video_id: str
    j: float
    f: float

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2


@dataclass(frozen=True)
class EvalReport:
    per_video: tuple[VideoScore, ...]
    mean_j: float
    mean_f: float

    @property
    def mean_jf(self) -> float:
        return (self.mean_j + self.mean_f) / 2

    @classmethod
    def from_scores(cls, scores: Sequence[VideoScore]) -> "EvalReport":
        if not scores:
            raise InputError("No videos to evaluate")
        ordered = tuple(sorted(scores, key=lambda s: s.video_id))
        return cls(
            per_video=ordered,
            mean_j=sum(s.j for s in ordered) / len(ordered),
            mean_f=sum(s.f for s in ordered) / len(ordered),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_video": [
                {"video_id": s.video_id, "J": s.j, "F": s.f, "JF": s.jf}
                for s in self.per_video
            ],
            "mean_J": self.mean_j,
            "mean_F": self.mean_f,
            "mean_JF": self.mean_jf,
        }


def evaluate_video(
    pred: MaskSequence, gt: MaskSequence, tolerance: Tolerance = "auto"
) -> VideoScore:
    return VideoScore(
        video_id=gt.video_id,
        j=region_similarity(pred.masks, gt.masks),
        f=contour_accuracy(pred.masks, gt.masks, tolerance),
    )


def evaluate(
    predictions: Mapping[str, MaskSequence],
    ground_truth: Mapping[str, MaskSequence],
    tolerance: Tolerance = "auto",
    workers: int = 1,
) -> EvalReport:
    """
    Score every predicted video against its ground truth.

    Dataset means are unweighted averages over videos.

    Raises:
        InputError: if a predicted video has no ground truth
    """
    missing = sorted(set(predictions) - set(ground_truth))
    if missing:
        raise InputError(f"No ground truth for predicted videos: {missing}")
    unscored = sorted(set(ground_truth) - set(predictions))
    if unscored:
        logger.warning(
            f"{len(unscored)} ground-truth videos have no prediction "
            f"and are not scored: {unscored}"
        )

    video_ids = sorted(predictions)

    def score(video_id: str) -> VideoScore:
        try:
            pred, gt = predictions[video_id], ground_truth[video_id]
            return evaluate_video(pred, gt, tolerance)
        except InputError as e:
            raise type(e)(f"Video {video_id}: {e}") from e

    if workers > 1 and len(video_ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score, video_ids))
    else:
        scores = [score(v) for v in video_ids]

    report = EvalReport.from_scores(scores)
    logger.info(
        f"Evaluated {len(scores)} videos: J={report.mean_j:.4f} "
        f"F={report.mean_f:.4f} J&F={report.mean_jf:.4f}"
    )
    return report


def format_report_table(report: EvalReport, title: str = "Video") -> str:
    """Aligned plain-text table, one row per video plus the mean."""
    rows = [(s.video_id, s.j, s.f, s.jf) for s in report.per_video]
    rows.append(("mean", report.mean_j, report.mean_f, report.mean_jf))
    return format_score_table(rows, title)


def format_score_table(
    rows: Sequence[tuple[str, float, float, float]], title: str
) -> str:
    """Rows of (label, J, F, J&F), scores printed as percentages."""
    width = max(len(title), *(len(r[0]) for r in rows))
    lines = [f"{title:<{width}}  {'J&F':>6}  {'J':>6}  {'F':>6}", "-" * (width + 24)]
    for label, j, f, jf in rows:
        scores = f"{jf * 100:>6.1f}  {j * 100:>6.1f}  {f * 100:>6.1f}"
        lines.append(f"{label:<{width}}  {scores}")
    return "\n".join(lines) + "\n"
