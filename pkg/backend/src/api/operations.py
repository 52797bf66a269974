import json
import logging
from typing import Any, Literal

import numpy as np
from fastapi import APIRouter, File, Form, HTTPException, UploadFile
from pydantic import BaseModel, Field

from ..errors import FormatError, InputError
from ..grounding.scoring import fuse_and_select
from ..metrics.evaluation import evaluate
from ..tracklets.nms import DEFAULT_IOU_THRESHOLD, DEFAULT_MAX_KEEP, tracklet_nms
from ..tracklets.tracklet import MaskSequence, tracklet_set_from_dict

logger = logging.getLogger(__name__)

router = APIRouter(tags=["operations"])

MAX_UPLOAD_SIZE_MB = 25


class FuseRequest(BaseModel):
    per_frame: list[list[float]] = Field(
        ..., description="(T, P) per-frame grounding probabilities"
    )


class EvaluateRequest(BaseModel):
    predictions: list[dict[str, Any]] = Field(
        ..., description="Predicted mask sequences"
    )
    ground_truth: list[dict[str, Any]] = Field(
        ..., description="Ground-truth mask sequences"
    )
    tolerance: int | Literal["auto"] = "auto"


async def _read_json_upload(file: UploadFile) -> dict[str, Any]:
    """Read an uploaded JSON document with a size limit."""
    content = await file.read()
    size_mb = len(content) / (1024 * 1024)
    if size_mb > MAX_UPLOAD_SIZE_MB:
        raise HTTPException(
            status_code=413,
            detail=f"File too large ({size_mb:.1f}MB). Maximum: {MAX_UPLOAD_SIZE_MB}MB",
        )
    try:
        return json.loads(content)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"{file.filename or 'upload'} is not valid JSON: {e}") from e


@router.post("/tracklets/nms")
async def run_tracklet_nms(
    file: UploadFile = File(..., description="TrackletSet JSON"),
    threshold: float = Form(
        DEFAULT_IOU_THRESHOLD, description="Tracklet-IoU suppression threshold"
    ),
    max_keep: int = Form(DEFAULT_MAX_KEEP, description="Maximum tracklets kept"),
):
    """
    Suppress redundant tracklets of one uploaded tracklet set.

    Returns:
        Kept ids in score order and the kept TrackletSet
    """
    candidates = tracklet_set_from_dict(await _read_json_upload(file))
    kept = tracklet_nms(candidates, threshold, max_keep)
    logger.info(
        f"NMS kept {len(kept)} of {len(candidates)} tracklets "
        f"for {candidates.video_id}"
    )
    return {
        "kept_ids": [t.id for t in kept],
        "suppressed": len(candidates) - len(kept),
        "tracklets": kept.to_dict(),
    }


@router.post("/grounding/fuse")
async def fuse_scores(request: FuseRequest):
    """Average per-frame scores over frames and select the best tracklet."""
    try:
        per_frame = np.asarray(request.per_frame, dtype=np.float64)
    except ValueError as e:
        raise InputError(f"per_frame rows differ in length: {e}") from e
    return fuse_and_select(per_frame).to_dict()


@router.post("/metrics/evaluate")
async def evaluate_predictions(request: EvaluateRequest):
    """J, F and J&F per video and their dataset means."""
    predictions = _by_video(request.predictions)
    ground_truth = _by_video(request.ground_truth)
    return evaluate(predictions, ground_truth, request.tolerance).to_dict()


def _by_video(items: list[dict[str, Any]]) -> dict[str, MaskSequence]:
    sequences = (MaskSequence.from_dict(d) for d in items)
    return {s.video_id: s for s in sequences}
