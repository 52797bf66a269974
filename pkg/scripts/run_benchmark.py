#!/usr/bin/env python3
"""
Synthetic benchmark: end-to-end J&F on clean scenes and the component
ablation on hard noisy scenes.
"""

import argparse
import sys
import tempfile
import time
from pathlib import Path

# Add the repository root to the path so backend.src imports resolve
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from backend.src.config import configure_logging, load_config  # noqa: E402
from backend.src.metrics.evaluation import evaluate, format_report_table  # noqa: E402
from backend.src.pipeline.ablation import (  # noqa: E402
    format_ablation_table,
    run_ablation,
)
from backend.src.pipeline.inputs import ground_truth_of, load_inputs  # noqa: E402
from backend.src.pipeline.runner import run_pipeline  # noqa: E402
from backend.src.synth.suite import (  # noqa: E402
    CHECKPOINTS,
    load_synth_config,
    write_suite,
)

MIN_CLEAN_JF = 0.95


def clean_run(out: Path, count: int, seed: int) -> float:
    """Noise-free scenes with oracle propagation and naive grounding on one thread."""
    write_suite(out, load_synth_config(), count, seed)
    inputs = load_inputs(out)
    config = load_config(workers=1, seed=seed)

    start = time.perf_counter()
    results = run_pipeline(config, inputs)
    elapsed = time.perf_counter() - start

    predictions = {r.video_id: r.prediction for r in results}
    report = evaluate(predictions, ground_truth_of(inputs))
    print(format_report_table(report))
    print(
        f"Clean suite: {count} scenes in {elapsed:.1f}s, "
        f"J&F {report.mean_jf * 100:.1f}"
    )
    return report.mean_jf


def ablation_run(out: Path, count: int, seed: int, noise: float) -> None:
    write_suite(out, load_synth_config(hard=True, noise=noise), count, seed)
    config = load_config(
        seed=seed,
        propagation_noise=noise,
        propagation_decay=0.95,
        checkpoints=[str(out / name) for name in CHECKPOINTS],
    )
    rows = run_ablation(config, load_inputs(out))
    print(format_ablation_table(rows))
    if rows[1].report.mean_jf <= rows[0].report.mean_jf:
        print("⚠️  Propagation did not improve on the image-level baseline")


def main():
    parser = argparse.ArgumentParser(description="tlground synthetic benchmark")
    parser.add_argument("--count", type=int, default=50, help="Scenes per suite")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--noise",
        type=float,
        default=0.2,
        help="Proposal and propagation noise for the ablation",
    )
    parser.add_argument(
        "--out", type=Path, help="Output directory (default: a temp directory)"
    )
    args = parser.parse_args()

    configure_logging("WARNING")
    out = args.out or Path(tempfile.mkdtemp(prefix="tlground-bench-"))
    print(f"Writing suites under {out}")

    clean_jf = clean_run(out / "clean", args.count, args.seed)
    ablation_run(out / "hard", args.count, args.seed, args.noise)

    sys.exit(0 if clean_jf >= MIN_CLEAN_JF else 1)


if __name__ == "__main__":
    main()
