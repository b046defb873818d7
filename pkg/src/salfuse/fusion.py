"""Decision-level fusion of saliency maps.

``positive_feedback_fuse`` blends branch maps with weights that feed back
on themselves: each branch's binarization is scored (F-measure) against
the binarization of the current blend, the scores are normalized into
the next round's weights, and the loop stops once two successive fused
binarizations agree closely enough. Agreement with the consensus is
rewarded, so a branch that matches the emerging majority gains weight
each round. ``additive_fuse`` is the plain normalized-sum baseline the
feedback scheme is compared against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .imagecore import (
    BinaryMap,
    GrayImage,
    binarize,
    normalize_minmax,
    validate_gray,
    validate_mask,
    weighted_sum,
)

MODE_POSITIVE_FEEDBACK = "positive_feedback"
MODE_ADDITIVE = "additive"
_MODES = (MODE_POSITIVE_FEEDBACK, MODE_ADDITIVE)


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for a fusion run.

    ``epsilon`` is the convergence threshold on the F-measure between
    successive fused binarizations; the iteration cap bounds the loop
    when that threshold is never reached.
    """

    epsilon: float = 0.95
    max_iterations: int = 50
    beta_squared: float = 0.3
    mode: str = MODE_POSITIVE_FEEDBACK

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.beta_squared > 0.0:
            raise ValueError(f"beta_squared must be > 0, got {self.beta_squared}")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class IterationRecord:
    """One weight update: per-branch scores, the weights derived from
    them, and the F-measure between the new and previous fused masks."""

    branch_scores: tuple[float, ...]
    weights: tuple[float, ...]
    convergence_f: float


@dataclass(frozen=True)
class FusionTrace:
    iterations: int
    converged: bool
    per_iteration: tuple[IterationRecord, ...]


def binary_fmeasure(pred, reference, beta_squared: float = 0.3) -> float:
    """F-beta agreement between two masks, ``pred`` scored against ``reference``.

    F = (1 + b2) * P * R / (b2 * P + R) with P = TP/(TP+FP), R = TP/(TP+FN).
    No true positives scores 0, except that two entirely empty masks are a
    perfect match (1.0): all-background consensus must count as agreement,
    not as an undefined 0/0.
    """
    p = validate_mask(pred, "pred")
    r = validate_mask(reference, "reference")
    if p.shape != r.shape:
        raise ValueError(
            f"dimension mismatch: pred {p.shape[1]}x{p.shape[0]} vs "
            f"reference {r.shape[1]}x{r.shape[0]}"
        )
    if not beta_squared > 0.0:
        raise ValueError(f"beta_squared must be > 0, got {beta_squared}")
    tp = int(np.count_nonzero(p & r))
    pred_count = int(np.count_nonzero(p))
    ref_count = int(np.count_nonzero(r))
    if tp == 0:
        return 1.0 if pred_count == 0 and ref_count == 0 else 0.0
    precision = tp / pred_count
    recall = tp / ref_count
    return (1.0 + beta_squared) * precision * recall / (beta_squared * precision + recall)


def _pairwise_total(values: Sequence[float]) -> float:
    # balanced reduction, mirroring weighted_sum: N equal scores with N a
    # power of two sum exactly, so uniform branches get weights of exactly 1/N
    terms = list(values)
    while len(terms) > 1:
        paired = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            paired.append(terms[-1])
        terms = paired
    return terms[0]


def _checked_branches(branches: Sequence) -> list[GrayImage]:
    arrays = [validate_gray(b, name=f"branch {i}") for i, b in enumerate(branches)]
    if not arrays:
        raise ValueError("at least one branch map is required")
    base = arrays[0].shape
    for i, arr in enumerate(arrays):
        if arr.shape != base:
            raise ValueError(
                f"branch {i}: dimensions {arr.shape[1]}x{arr.shape[0]} do not match "
                f"branch 0 ({base[1]}x{base[0]})"
            )
    return arrays


def positive_feedback_fuse(
    branches: Sequence, config: FusionConfig | None = None
) -> tuple[GrayImage, FusionTrace]:
    """Fuse branch maps by iterative F-measure-weighted blending.

    Startup: the initial consensus mask is the binarized normalized sum
    of all branches (uniform weighting), and each branch is binarized
    once. Each iteration then scores every branch mask against the
    consensus, turns the scores into convex weights (uniform fallback
    when every score is zero, e.g. all-empty masks), re-blends, and
    re-binarizes. The loop stops when the F-measure between the new and
    previous fused masks reaches ``epsilon``; hitting the iteration cap
    is not an error and is reported as ``converged=False``. Returns the
    normalized last blend plus the full per-iteration trace.

    Branches must already share dimensions (resize to the first branch
    beforehand).
    """
    cfg = config if config is not None else FusionConfig()
    arrays = _checked_branches(branches)
    n = len(arrays)

    consensus: BinaryMap = binarize(normalize_minmax(weighted_sum(arrays, [1.0] * n)))
    branch_masks = [binarize(arr) for arr in arrays]

    records: list[IterationRecord] = []
    fused: GrayImage = arrays[0]
    converged = False
    for _ in range(cfg.max_iterations):
        scores = [binary_fmeasure(mask, consensus, cfg.beta_squared) for mask in branch_masks]
        total = _pairwise_total(scores)
        if total == 0.0:
            weights = [1.0 / n] * n
        else:
            weights = [s / total for s in scores]
        fused = weighted_sum(arrays, weights)
        fused_mask = binarize(fused)
        convergence_f = binary_fmeasure(fused_mask, consensus, cfg.beta_squared)
        records.append(IterationRecord(tuple(scores), tuple(weights), convergence_f))
        if convergence_f >= cfg.epsilon:
            converged = True
            break
        consensus = fused_mask

    trace = FusionTrace(
        iterations=len(records), converged=converged, per_iteration=tuple(records)
    )
    return normalize_minmax(fused), trace


def additive_fuse(branches: Sequence) -> GrayImage:
    """Ablation baseline: normalized pixel-level sum of the branches."""
    arrays = _checked_branches(branches)
    return normalize_minmax(weighted_sum(arrays, [1.0] * len(arrays)))


def fuse(branches: Sequence, config: FusionConfig | None = None):
    """Dispatch on ``config.mode``; additive mode returns a None trace."""
    cfg = config if config is not None else FusionConfig()
    if cfg.mode == MODE_ADDITIVE:
        return additive_fuse(branches), None
    return positive_feedback_fuse(branches, cfg)
