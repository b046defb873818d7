"""Batch front-end: discovery -> fusion -> metrics -> reports.

Subcommands:
  fuse    run positive-feedback fusion over branch directories
  ablate  same pipeline with plain additive fusion
  eval    score one prediction directory against ground truth
  bench   time the fusion kernel alone on preloaded samples

Per-image work runs on a bounded thread pool; every operation is pure,
so outputs are byte-identical regardless of worker count.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import Sample, SampleSet, discover, load_gray, save_gray
from .fusion import FusionConfig, FusionTrace, additive_fuse, positive_feedback_fuse
from .imagecore import GrayImage, resize_bilinear
from .metrics import ImageEval, MetricReport, aggregate_report, evaluate_pair

_COMMANDS = ("fuse", "ablate", "eval", "bench")


@dataclass(frozen=True)
class RunConfig:
    command: str
    branch_dirs: tuple[Path, ...]
    gt_dir: Path | None = None
    out_dir: Path | None = None
    epsilon: float = 0.95
    max_iterations: int = 50
    beta_squared: float = 0.3
    parallelism: int = field(default_factory=lambda: os.cpu_count() or 1)
    strict: bool = False
    trace: bool = False

    def __post_init__(self) -> None:
        if self.command not in _COMMANDS:
            raise ValueError(f"command must be one of {_COMMANDS}, got {self.command!r}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")
        self.fusion_config()  # validates epsilon / max_iterations / beta_squared

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            epsilon=self.epsilon,
            max_iterations=self.max_iterations,
            beta_squared=self.beta_squared,
        )


def _report_skipped(sample_set: SampleSet) -> None:
    for skip in sample_set.skipped:
        print(f"skip {skip.stem}: missing from {skip.missing_from}", file=sys.stderr)


def _load_branches(sample: Sample) -> list[GrayImage]:
    branches = [load_gray(p) for p in sample.branch_paths]
    h, w = branches[0].shape
    return [b if b.shape == (h, w) else resize_bilinear(b, w, h) for b in branches]


def _validate_loadable(samples: Sequence[Sample], include_gt: bool = False) -> None:
    # strict mode decodes everything up front so bad files fail the run
    # before any output is written
    for sample in samples:
        for path in sample.branch_paths:
            load_gray(path)
        if include_gt and sample.gt_path is not None:
            load_gray(sample.gt_path)


def _write_trace(path: Path, trace: FusionTrace) -> None:
    lines = []
    for i, rec in enumerate(trace.per_iteration, start=1):
        scores = ",".join(repr(s) for s in rec.branch_scores)
        weights = ",".join(repr(w) for w in rec.weights)
        lines.append(f"iter={i} scores={scores} weights={weights} f={rec.convergence_f!r}")
    lines.append(
        f"converged={'true' if trace.converged else 'false'} iterations={trace.iterations}"
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _run_pool(
    samples: Sequence[Sample], worker: Callable[[Sample], object], config: RunConfig
) -> tuple[list[tuple[Sample, object]], int]:
    """Run worker over samples; returns (successes in sample order, failure count).

    Strict mode re-raises the first failure (in sample order) instead of
    skipping it.
    """
    results: list[tuple[Sample, object]] = []
    failures = 0
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures = [(s, pool.submit(worker, s)) for s in samples]
        for sample, future in futures:
            try:
                results.append((sample, future.result()))
            except Exception as exc:
                if config.strict:
                    for _, pending in futures:
                        pending.cancel()
                    raise
                failures += 1
                print(f"skip {sample.sample_id}: {exc}", file=sys.stderr)
    return results, failures


def _fuse_pipeline(config: RunConfig, additive: bool) -> int:
    if config.out_dir is None:
        print("error: --out is required", file=sys.stderr)
        return 1
    try:
        sample_set = discover(config.branch_dirs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _report_skipped(sample_set)
    if config.strict:
        try:
            _validate_loadable(sample_set.samples)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    fcfg = config.fusion_config()
    out_dir = Path(config.out_dir)

    def work(sample: Sample) -> FusionTrace | None:
        branches = _load_branches(sample)
        if additive:
            fused = additive_fuse(branches)
            trace = None
        else:
            fused, trace = positive_feedback_fuse(branches, fcfg)
        save_gray(fused, out_dir / f"{sample.sample_id}.png")
        if trace is not None and config.trace:
            _write_trace(out_dir / "trace" / f"{sample.sample_id}.log", trace)
        return trace

    try:
        results, failures = _run_pool(sample_set.samples, work, config)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    n = len(results)
    if additive:
        print(f"fused {n} samples (additive), {failures} failed")
    else:
        traces = [t for _, t in results if t is not None]
        mean_iters = float(np.mean([t.iterations for t in traces])) if traces else 0.0
        non_converged = sum(1 for t in traces if not t.converged)
        print(
            f"fused {n} samples: mean_iterations={mean_iters:.2f} "
            f"non_converged={non_converged}"
        )
    return 0


def cmd_fuse(config: RunConfig) -> int:
    return _fuse_pipeline(config, additive=False)


def cmd_ablate(config: RunConfig) -> int:
    return _fuse_pipeline(config, additive=True)


def _write_report_csv(path: Path, report: MetricReport) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "mae", "sm"])
        for sample_id in sorted(report.per_image):
            scores = report.per_image[sample_id]
            writer.writerow([sample_id, repr(scores.mae), repr(scores.sm)])
        writer.writerow(["dataset_mae_mean", repr(report.dataset.mae_mean), ""])
        writer.writerow(["dataset_max_f", repr(report.dataset.max_f), ""])
        writer.writerow(["dataset_sm_mean", repr(report.dataset.sm_mean), ""])


def _write_pr_csv(path: Path, report: MetricReport) -> None:
    pr = report.dataset.pr
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(pr.thresholds, pr.precision, pr.recall):
            writer.writerow([repr(float(t)), repr(float(p)), repr(float(r))])


def cmd_eval(config: RunConfig) -> int:
    if len(config.branch_dirs) != 1:
        print("error: eval takes exactly one prediction directory (--branch)", file=sys.stderr)
        return 1
    if config.gt_dir is None:
        print("error: eval requires --gt", file=sys.stderr)
        return 1
    if config.out_dir is None:
        print("error: --out is required", file=sys.stderr)
        return 1
    try:
        sample_set = discover(config.branch_dirs, config.gt_dir)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _report_skipped(sample_set)

    paired = [s for s in sample_set.samples if s.gt_path is not None]
    for sample in sample_set.samples:
        if sample.gt_path is None:
            print(f"skip {sample.sample_id}: no ground truth", file=sys.stderr)
    if config.strict and len(paired) != len(sample_set.samples):
        print("error: unpaired samples in strict mode", file=sys.stderr)
        return 1
    if not paired:
        print("error: no prediction/GT pairs to evaluate", file=sys.stderr)
        return 1
    if config.strict:
        try:
            _validate_loadable(paired, include_gt=True)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    def work(sample: Sample) -> ImageEval:
        pred = load_gray(sample.branch_paths[0])
        gt = load_gray(sample.gt_path)
        return evaluate_pair(sample.sample_id, pred, gt, config.beta_squared)

    try:
        results, _ = _run_pool(paired, work, config)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not results:
        print("error: every sample failed to evaluate", file=sys.stderr)
        return 1

    report = aggregate_report([ev for _, ev in results], config.beta_squared)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_report_csv(out_dir / "report.csv", report)
    _write_pr_csv(out_dir / "pr.csv", report)
    d = report.dataset
    print(f"mae={d.mae_mean:.3f} max_f={d.max_f:.3f} sm={d.sm_mean:.3f}")
    return 0


def cmd_bench(config: RunConfig) -> int:
    try:
        sample_set = discover(config.branch_dirs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _report_skipped(sample_set)
    fcfg = config.fusion_config()

    try:
        loaded, _ = _run_pool(sample_set.samples, _load_branches, config)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not loaded:
        print("error: no samples to benchmark", file=sys.stderr)
        return 1

    # fusion kernel only, timed serially: decode/encode stay out of the clock
    latencies = []
    iteration_counts = []
    for _, branches in loaded:
        start = time.perf_counter()
        _, trace = positive_feedback_fuse(branches, fcfg)
        latencies.append(time.perf_counter() - start)
        iteration_counts.append(trace.iterations)

    lat = np.asarray(latencies)
    n = len(latencies)
    fps = n / float(lat.sum())
    print(
        f"bench: {n} images, {fps:.1f} images/s, "
        f"latency mean={lat.mean() * 1e3:.2f}ms median={np.median(lat) * 1e3:.2f}ms "
        f"p95={np.percentile(lat, 95) * 1e3:.2f}ms, "
        f"mean_iterations={float(np.mean(iteration_counts)):.2f}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salfuse",
        description="Fuse saliency maps from multiple models and evaluate predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "fuse": "fuse branch maps by positive-feedback weighting",
        "ablate": "fuse branch maps by plain addition (ablation baseline)",
        "eval": "evaluate a prediction directory against ground truth",
        "bench": "benchmark the fusion kernel",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--branch",
            dest="branch_dirs",
            action="append",
            required=True,
            metavar="DIR",
            help="branch directory (repeatable, order defines branch order)",
        )
        p.add_argument("--gt", dest="gt_dir", metavar="DIR", help="ground-truth directory")
        p.add_argument("--out", dest="out_dir", metavar="DIR", help="output directory")
        p.add_argument("--epsilon", type=float, default=0.95, help="convergence threshold")
        p.add_argument("--max-iters", type=int, default=50, help="iteration cap")
        p.add_argument("--beta2", type=float, default=0.3, help="F-measure beta squared")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker count")
        p.add_argument("--strict", action="store_true", help="abort on any per-image failure")
        if name == "fuse":
            p.add_argument(
                "--trace", action="store_true", help="write per-image iteration logs"
            )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = RunConfig(
            command=args.command,
            branch_dirs=tuple(Path(d) for d in args.branch_dirs),
            gt_dir=Path(args.gt_dir) if args.gt_dir else None,
            out_dir=Path(args.out_dir) if args.out_dir else None,
            epsilon=args.epsilon,
            max_iterations=args.max_iters,
            beta_squared=args.beta2,
            parallelism=args.jobs,
            strict=args.strict,
            trace=getattr(args, "trace", False),
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    dispatch = {"fuse": cmd_fuse, "ablate": cmd_ablate, "eval": cmd_eval, "bench": cmd_bench}
    return dispatch[config.command](config)


if __name__ == "__main__":
    sys.exit(main())
