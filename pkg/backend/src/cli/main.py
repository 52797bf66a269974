"""
tlground command line.

    synth     generate a synthetic suite (scenes, proposals, features, ground truth)
    propagate propagate key-frame proposals into candidate tracklets
    nms       tracklet NMS over a tracklet set
    ground    per-frame grounding scores, fusion and selection for one video
    pipeline  every stage over a suite, with artifacts and an evaluation report
    ablate    component ablation table over a suite
    evaluate  J&F of stored predictions against ground truth

Exit codes: 0 success, 2 config error, 3 input error, 4 numeric error.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from ..config import PipelineConfig, configure_logging, load_config
from ..errors import DimensionError, InputError, TlgError
from ..grounding.features import FeatureMap, TokenFeatures
from ..grounding.grounder import create_grounder, grounded_frames
from ..grounding.scoring import fuse_and_select
from ..grounding.tensor_io import read_tensor
from ..metrics.evaluation import evaluate, format_report_table
from ..pipeline.ablation import format_ablation_table, run_ablation
from ..pipeline.inputs import load_inputs
from ..pipeline.runner import create_propagator, run_pipeline, scores_record
from ..propagation.base import VideoContext, build_candidate_set, select_key_proposals
from ..propagation.keyframes import sample_key_frames
from ..storage.artifacts import ArtifactStore
from ..synth.scene import load_scene
from ..synth.suite import CHECKPOINTS, load_synth_config, write_suite
from ..tracklets.nms import tracklet_nms
from ..tracklets.tracklet import (
    dumps,
    load_mask_sequences,
    load_proposals,
    load_tracklet_set,
    save_tracklet_set,
)

logger = logging.getLogger(__name__)


def tolerance_arg(value: str) -> int | str:
    if value == "auto":
        return value
    try:
        return int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"tolerance must be 'auto' or an integer, got '{value}'"
        ) from e


def config_parent() -> argparse.ArgumentParser:
    """Flags shared by every command that reads a PipelineConfig.

    Unset flags keep the file's values.
    """
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("pipeline config")
    group.add_argument("--config", type=Path, help="JSON pipeline config file")
    group.add_argument("--keyframes", type=int, help="Key frames per video")
    group.add_argument(
        "--nms-threshold", type=float, help="Tracklet-IoU suppression threshold"
    )
    group.add_argument("--max-keep", type=int, help="Tracklets kept by NMS")
    group.add_argument(
        "--no-nms",
        dest="use_nms",
        action="store_const",
        const=False,
        help="Skip tracklet NMS",
    )
    group.add_argument("--grounder", choices=["naive", "transformer"])
    group.add_argument("--preset", help="Model shape preset (desk, paper)")
    group.add_argument(
        "--checkpoint",
        dest="checkpoints",
        action="append",
        help="TLGW checkpoint (repeatable)",
    )
    group.add_argument(
        "--ensemble", action="append", help="Ensemble member checkpoint (repeatable)"
    )
    group.add_argument("--frame-stride", type=int, help="Ground every n-th frame")
    group.add_argument("--propagation", choices=["oracle", "none"])
    group.add_argument("--propagation-noise", type=float)
    group.add_argument("--propagation-decay", type=float)
    group.add_argument("--seed", type=int)
    group.add_argument(
        "--workers",
        type=int,
        help="Worker threads (default: CPU count or TLG_WORKERS)",
    )
    group.add_argument(
        "--tolerance",
        dest="boundary_tolerance",
        type=tolerance_arg,
        help="Boundary tolerance",
    )
    return parent


CONFIG_FLAGS = (
    "keyframes",
    "nms_threshold",
    "max_keep",
    "use_nms",
    "grounder",
    "preset",
    "checkpoints",
    "ensemble",
    "frame_stride",
    "propagation",
    "propagation_noise",
    "propagation_decay",
    "seed",
    "workers",
    "boundary_tolerance",
)


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    flags = {name: getattr(args, name, None) for name in CONFIG_FLAGS}
    return load_config(args.config, **flags)


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_synth_config(args.config, hard=args.hard or None, noise=args.noise)
    scenes = write_suite(args.out, config, args.count, args.seed)
    print(f"Wrote {len(scenes)} scenes to {args.out}")
    return 0


def cmd_propagate(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    video, proposals = load_proposals(args.proposals)
    scene = load_scene(args.scene) if args.scene else None
    context = VideoContext(
        video.video_id, video.width, video.height, video.num_frames, scene
    )

    plan = sample_key_frames(video.num_frames, config.keyframes)
    candidates = build_candidate_set(
        select_key_proposals(proposals, plan),
        context,
        create_propagator(config),
        plan,
        config.worker_count,
    )
    save_tracklet_set(candidates, args.out)
    print(
        f"{len(candidates)} candidate tracklets from key frames "
        f"{list(plan.indices)} -> {args.out}"
    )
    return 0


def cmd_nms(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    candidates = load_tracklet_set(args.tracklets)
    kept = tracklet_nms(
        candidates, config.nms_threshold, config.max_keep, config.worker_count
    )
    save_tracklet_set(kept, args.out)
    print(f"Kept {len(kept)} of {len(candidates)} tracklets -> {args.out}")
    return 0


def cmd_ground(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    tracklets = load_tracklet_set(args.tracklets)
    features = read_tensor(args.features)
    if features.ndim != 4:
        raise DimensionError(
            f"{args.features} must hold a (T, h, w, D) tensor, got {features.shape}"
        )
    tokens = TokenFeatures(read_tensor(args.tokens))

    grounder = create_grounder(
        config.grounder, config.grounding_checkpoints, config.preset
    )
    per_frame = grounder.ground(
        tracklets,
        [FeatureMap(f) for f in features],
        tokens,
        config.frame_stride,
        config.worker_count,
    )
    grounding = fuse_and_select(per_frame)
    ids = [t.id for t in tracklets]
    frames = grounded_frames(tracklets.num_frames, config.frame_stride)
    record = scores_record(
        tracklets.video_id, ids, frames, grounding, grounder.get_config()
    )
    write_text(args.out, dumps(record))
    selected = grounding.selected
    print(
        f"Selected tracklet {ids[selected]} "
        f"(fused {grounding.fused[selected]:.4f}) -> {args.out}"
    )
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    inputs = load_inputs(args.suite)
    store = ArtifactStore(args.out)
    results = run_pipeline(config, inputs, store)

    ground_truth = {
        i.video_id: i.ground_truth for i in inputs if i.ground_truth is not None
    }
    if ground_truth:
        predictions = {
            r.video_id: r.prediction for r in results if r.video_id in ground_truth
        }
        report = evaluate(
            predictions, ground_truth, config.boundary_tolerance, config.worker_count
        )
        write_text(store.root / "report.json", dumps(report.to_dict()))
        print(format_report_table(report), end="")
    else:
        logger.warning(f"No ground truth under {args.suite}; skipping evaluation")
    print(f"Processed {len(results)} videos -> {store.root}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    suite = Path(args.suite)
    config = config_from_args(args)
    if not config.grounding_checkpoints:
        checkpoints = [str(suite / name) for name in CHECKPOINTS]
        config = config.with_overrides(checkpoints=checkpoints)

    rows = run_ablation(config, load_inputs(suite))
    table = format_ablation_table(rows)
    if args.out:
        variants = [{"variant": r.variant, **r.report.to_dict()} for r in rows]
        write_text(args.out, dumps({"variants": variants}))
    print(table, end="")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred_dir = Path(args.pred)
    if not pred_dir.is_dir():
        raise InputError(f"Prediction directory {pred_dir} does not exist")
    store = ArtifactStore(pred_dir)
    if store.has_predictions():
        # pipeline output layout: <video>/prediction.json
        predictions = store.predictions()
    else:
        predictions = load_mask_sequences(pred_dir)
    report = evaluate(
        predictions, load_mask_sequences(args.gt), args.tolerance, args.workers or 1
    )
    if args.out:
        write_text(args.out, dumps(report.to_dict()))
    print(format_report_table(report), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlground", description="Tracklet-language grounding pipeline"
    )
    parser.add_argument(
        "--log-level", help="Logging level (default: TLG_LOG_LEVEL or INFO)"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    shared = config_parent()

    synth = commands.add_parser("synth", help="Generate a synthetic suite")
    synth.add_argument("--count", type=int, default=50)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--config", type=Path, help="JSON synth config file")
    synth.add_argument(
        "--hard",
        action="store_true",
        help="Distractors share attributes with the referent",
    )
    synth.add_argument("--noise", type=float, help="Proposal boundary noise rate")
    synth.add_argument("--out", type=Path, required=True)
    synth.set_defaults(func=cmd_synth)

    propagate = commands.add_parser(
        "propagate", parents=[shared], help="Build candidate tracklets"
    )
    propagate.add_argument("--proposals", type=Path, required=True)
    propagate.add_argument(
        "--scene", type=Path, help="scene.json for the oracle propagator"
    )
    propagate.add_argument("--out", type=Path, required=True)
    propagate.set_defaults(func=cmd_propagate)

    nms = commands.add_parser("nms", parents=[shared], help="Tracklet NMS")
    nms.add_argument("--tracklets", type=Path, required=True)
    nms.add_argument("--out", type=Path, required=True)
    nms.set_defaults(func=cmd_nms)

    ground = commands.add_parser(
        "ground", parents=[shared], help="Ground tracklets against an expression"
    )
    ground.add_argument("--tracklets", type=Path, required=True)
    ground.add_argument(
        "--features", type=Path, required=True, help="(T, h, w, D) TLG1 tensor"
    )
    ground.add_argument("--tokens", type=Path, required=True, help="(L, D) TLG1 tensor")
    ground.add_argument("--out", type=Path, required=True)
    ground.set_defaults(func=cmd_ground)

    pipeline = commands.add_parser(
        "pipeline", parents=[shared], help="Run every stage over a suite"
    )
    pipeline.add_argument("--suite", type=Path, required=True)
    pipeline.add_argument("--out", type=Path, required=True)
    pipeline.set_defaults(func=cmd_pipeline)

    ablate = commands.add_parser(
        "ablate", parents=[shared], help="Component ablation over a suite"
    )
    ablate.add_argument("--suite", type=Path, required=True)
    ablate.add_argument(
        "--out", type=Path, help="JSON file for the per-variant reports"
    )
    ablate.set_defaults(func=cmd_ablate)

    evaluation = commands.add_parser(
        "evaluate", help="Score predictions against ground truth"
    )
    evaluation.add_argument("--pred", type=Path, required=True)
    evaluation.add_argument("--gt", type=Path, required=True)
    evaluation.add_argument("--out", type=Path)
    evaluation.add_argument("--tolerance", type=tolerance_arg, default="auto")
    evaluation.add_argument("--workers", type=int)
    evaluation.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
        return args.func(args)
    except TlgError as e:
        logger.error(str(e))
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
