"""
Two-stage referring segmentation pipeline.

Per video: key-frame proposals -> propagation into candidate tracklets ->
tracklet NMS -> per-frame grounding -> fusion and selection. Each stage
logs one line with its wall time and, when a store is given, writes its
artifact so the stage can be re-run on its own.
"""

import logging
import time
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

from ..config import PipelineConfig
from ..errors import StageError
from ..grounding.grounder import BaseGrounder, create_grounder, grounded_frames
from ..grounding.scoring import GroundingResult, fuse_and_select
from ..masks.rle import BinaryMask
from ..propagation.base import (
    NoPropagation,
    Propagator,
    VideoContext,
    build_candidate_set,
    select_key_proposals,
)
from ..propagation.keyframes import sample_key_frames
from ..propagation.oracle import SyntheticOraclePropagator
from ..storage.artifacts import ArtifactStore
from ..tracklets.nms import tracklet_nms
from ..tracklets.tracklet import MaskSequence, TrackletSet
from .inputs import VideoInputs

logger = logging.getLogger(__name__)


@contextmanager
def stage(name: str, video_id: str, **fields) -> Iterator[dict]:
    """
    Time one stage, log it and tag failures with the stage and video.

    The yielded dict collects extra key=value pairs for the log line.
    """
    extra = dict(fields)
    start = time.perf_counter()
    try:
        yield extra
    except StageError:
        raise
    except Exception as e:
        raise StageError(name, video_id, e) from e
    elapsed_ms = (time.perf_counter() - start) * 1000
    details = "".join(f" {k}={v}" for k, v in extra.items())
    logger.info(f"stage={name} video={video_id} elapsed_ms={elapsed_ms:.1f}{details}")


@dataclass(frozen=True, eq=False)
class VideoResult:
    video_id: str
    prediction: MaskSequence
    tracklet_ids: tuple[str, ...]
    result: GroundingResult | None = None
    frames: tuple[int, ...] = field(default=())

    @property
    def selected_id(self) -> str | None:
        if self.result is None:
            return None
        return self.tracklet_ids[self.result.selected]

    def scores_dict(self, grounder: dict) -> dict:
        return scores_record(
            self.video_id, self.tracklet_ids, self.frames, self.result, grounder
        )


def scores_record(
    video_id: str,
    tracklet_ids: Sequence[str],
    frames: Sequence[int],
    result: GroundingResult | None,
    grounder: dict,
) -> dict:
    """Machine-readable record of every score behind one selection."""
    data = {
        "video_id": video_id,
        "grounder": grounder,
        "tracklet_ids": list(tracklet_ids),
        "frames": list(frames),
        "selected_id": None if result is None else tracklet_ids[result.selected],
    }
    if result is None:
        data.update({"per_frame": [], "fused": [], "selected": None})
    else:
        data.update(result.to_dict())
    return data


def create_propagator(config: PipelineConfig) -> Propagator:
    if config.propagation == "none":
        return NoPropagation()
    return SyntheticOraclePropagator(
        config.propagation_noise, config.propagation_decay, seed=config.seed
    )


def empty_prediction(video: TrackletSet) -> MaskSequence:
    blank = BinaryMask.empty(video.width, video.height)
    return MaskSequence(video.video_id, (blank,) * video.num_frames)


def run_video(
    inputs: VideoInputs,
    config: PipelineConfig,
    grounder: BaseGrounder,
    propagator: Propagator,
    store: ArtifactStore | None = None,
) -> VideoResult:
    """Run every stage for one video."""
    video_id = inputs.video_id
    video = inputs.video
    context = VideoContext(
        video_id, video.width, video.height, video.num_frames, inputs.scene
    )

    with stage("propagate", video_id) as log:
        plan = sample_key_frames(video.num_frames, config.keyframes)
        proposals = select_key_proposals(inputs.proposals, plan)
        candidates = build_candidate_set(proposals, context, propagator, plan)
        log.update(
            keyframes=len(plan.indices),
            proposals=len(proposals),
            tracklets=len(candidates),
        )
        if store is not None:
            store.write_candidates(candidates)

    with stage("nms", video_id) as log:
        kept = candidates
        if config.use_nms:
            kept = tracklet_nms(candidates, config.nms_threshold, config.max_keep)
        log.update(kept=len(kept), enabled=config.use_nms)
        if store is not None:
            store.write_nms(kept)

    ids = tuple(t.id for t in kept)
    if len(kept) == 0:
        logger.warning(
            f"Video {video_id} has no candidate tracklets; predicting empty masks"
        )
        result = VideoResult(video_id, empty_prediction(video), ids)
    else:
        with stage("ground", video_id) as log:
            per_frame = grounder.ground(
                kept, inputs.feature_maps, inputs.tokens, config.frame_stride
            )
            log.update(frames=per_frame.shape[0], tracklets=per_frame.shape[1])
        with stage("select", video_id) as log:
            grounding = fuse_and_select(per_frame)
            chosen = kept.tracklets[grounding.selected]
            score = grounding.fused[grounding.selected]
            log.update(selected=chosen.id, score=f"{score:.4f}")
        frames = tuple(grounded_frames(video.num_frames, config.frame_stride))
        prediction = MaskSequence(video_id, chosen.masks)
        result = VideoResult(video_id, prediction, ids, grounding, frames)

    if store is not None:
        store.write_scores(video_id, result.scores_dict(grounder.get_config()))
        store.write_prediction(result.prediction)
    return result


def run_pipeline(
    config: PipelineConfig,
    inputs: Sequence[VideoInputs],
    store: ArtifactStore | None = None,
) -> list[VideoResult]:
    """
    Run the pipeline over all videos with a bounded worker pool.

    Returns:
        One VideoResult per video, sorted by video id

    Raises:
        StageError: naming the first failing stage and video
    """
    grounder = create_grounder(
        config.grounder, config.grounding_checkpoints, config.preset
    )
    propagator = create_propagator(config)
    workers = min(config.worker_count, max(len(inputs), 1))
    logger.info(
        f"Running pipeline on {len(inputs)} videos with {workers} workers "
        f"(grounder={config.grounder}, keyframes={config.keyframes}, "
        f"nms={config.use_nms})"
    )

    def run(item: VideoInputs) -> VideoResult:
        return run_video(item, config, grounder, propagator, store)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, inputs))
    else:
        results = [run(item) for item in inputs]
    return sorted(results, key=lambda r: r.video_id)
