"""
Component ablation: the pipeline with its parts switched on one at a time.

Rows, each adding to the one before:

    Image-level Baseline             one key frame, no propagation, naive grounding
    +Video-level Propagation         K key frames propagated over the video
    +Transformer-based Grounding     first grounding checkpoint
    +Tracklet-NMS & Model Ensemble   tracklet NMS and every checkpoint averaged
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

from ..config import PipelineConfig
from ..errors import ConfigError
from ..metrics.evaluation import EvalReport, evaluate, format_score_table
from .inputs import VideoInputs, ground_truth_of
from .runner import run_pipeline

logger = logging.getLogger(__name__)

VARIANTS = (
    "Image-level Baseline",
    "+Video-level Propagation",
    "+Transformer-based Grounding",
    "+Tracklet-NMS & Model Ensemble",
)


@dataclass(frozen=True)
class AblationRow:
    variant: str
    config: PipelineConfig
    report: EvalReport


def ablation_configs(config: PipelineConfig) -> list[tuple[str, PipelineConfig]]:
    """
    The four cumulative variants derived from one base config.

    Raises:
        ConfigError: if the config names no grounding checkpoints
    """
    checkpoints = config.grounding_checkpoints
    if not checkpoints:
        raise ConfigError(
            "Ablation needs at least one grounding checkpoint for the transformer rows"
        )

    base = config.with_overrides(
        grounder="naive", use_nms=False, checkpoints=[], ensemble=[]
    )
    single = base.with_overrides(grounder="transformer", checkpoints=checkpoints[:1])
    full = base.with_overrides(
        grounder="transformer", checkpoints=list(checkpoints), use_nms=True
    )
    return [
        (VARIANTS[0], base.with_overrides(keyframes=1, propagation="none")),
        (VARIANTS[1], base),
        (VARIANTS[2], single),
        (VARIANTS[3], full),
    ]


def run_ablation(
    config: PipelineConfig, inputs: Sequence[VideoInputs]
) -> list[AblationRow]:
    """Run and score every variant on the same videos."""
    ground_truth = ground_truth_of(inputs)
    rows = []
    for variant, variant_config in ablation_configs(config):
        logger.info(f"Ablation variant: {variant}")
        results = run_pipeline(variant_config, inputs)
        predictions = {r.video_id: r.prediction for r in results}
        report = evaluate(
            predictions, ground_truth, config.boundary_tolerance, config.worker_count
        )
        rows.append(AblationRow(variant, variant_config, report))
    return rows


def format_ablation_table(rows: Sequence[AblationRow]) -> str:
    table = [
        (r.variant, r.report.mean_j, r.report.mean_f, r.report.mean_jf) for r in rows
    ]
    return format_score_table(table, "Variant")
