"""Dataset-level evaluation of saliency predictions against ground truth.

Provides the standard suite: mean absolute error, the 256-threshold
precision/recall sweep with its max F-measure, the structure measure,
and dataset aggregation into a report. All per-image operations are
pure; aggregation folds per-image results in sample-id order so results
never depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .imagecore import BinaryMap, resize_bilinear, validate_gray, validate_mask

#: The sweep thresholds k/255 for k = 0..255.
THRESHOLDS = np.arange(256, dtype=np.float64) / 255.0

_GT_BINARIZE_LEVEL = 0.5  # nominally binary GT files are occasionally anti-aliased


@dataclass(frozen=True)
class ConfusionCounts:
    """Pixel tallies of a predicted mask against a reference mask."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall at each of the 256 sweep thresholds."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray


@dataclass(frozen=True)
class ImageScores:
    mae: float
    sm: float


@dataclass(frozen=True)
class DatasetMetrics:
    mae_mean: float
    max_f: float
    sm_mean: float
    pr: PRCurve


@dataclass(frozen=True)
class MetricReport:
    per_image: dict[str, ImageScores]
    dataset: DatasetMetrics


@dataclass(frozen=True)
class ImageEval:
    """Everything measured on one prediction/GT pair."""

    sample_id: str
    mae: float
    sm: float
    precision: np.ndarray
    recall: np.ndarray


def _check_same_shape(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValueError(
            f"dimension mismatch: pred {pred.shape[1]}x{pred.shape[0]} vs "
            f"gt {gt.shape[1]}x{gt.shape[0]}"
        )


def confusion_counts(pred, reference) -> ConfusionCounts:
    """Count TP/FP/FN/TN between two masks of equal dimensions."""
    p = validate_mask(pred, "pred")
    r = validate_mask(reference, "reference")
    _check_same_shape(p, r)
    tp = int(np.count_nonzero(p & r))
    fp = int(np.count_nonzero(p & ~r))
    fn = int(np.count_nonzero(~p & r))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def mae(pred, gt) -> float:
    """Mean absolute per-pixel error between two gray images."""
    p = validate_gray(pred, "pred")
    g = validate_gray(gt, "gt")
    _check_same_shape(p, g)
    return float(np.mean(np.abs(p - g)))


def pr_sweep(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    """Per-image precision and recall vectors over the 256 thresholds.

    At threshold k/255 a pixel is predicted foreground iff its value is
    strictly greater. An empty prediction has precision 1 (no false
    alarms to penalize); an empty ground truth has recall 1.
    """
    p = validate_gray(pred, "pred")
    g = validate_mask(gt, "gt")
    _check_same_shape(p, g)

    # searchsorted against the very thresholds of the sweep: bin index b
    # counts thresholds strictly below the pixel value, so the pixel is
    # predicted positive at threshold k exactly when b > k
    bin_idx = np.searchsorted(THRESHOLDS, p.ravel(), side="left")
    hist_all = np.bincount(bin_idx, minlength=257)
    hist_fg = np.bincount(bin_idx[g.ravel()], minlength=257)
    tail_all = np.cumsum(hist_all[::-1])[::-1]
    tail_fg = np.cumsum(hist_fg[::-1])[::-1]
    predicted = tail_all[1:257].astype(np.float64)
    tp = tail_fg[1:257].astype(np.float64)

    precision = np.ones(256, dtype=np.float64)
    np.divide(tp, predicted, out=precision, where=predicted > 0)
    gt_count = int(np.count_nonzero(g))
    if gt_count == 0:
        recall = np.ones(256, dtype=np.float64)
    else:
        recall = tp / gt_count
    return precision, recall


def fbeta_curve(precision: np.ndarray, recall: np.ndarray, beta_squared: float) -> np.ndarray:
    """F-beta per threshold index; 0 where precision and recall both vanish."""
    num = (1.0 + beta_squared) * precision * recall
    den = beta_squared * precision + recall
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def max_fmeasure(
    per_image_sweeps: Sequence[tuple[np.ndarray, np.ndarray]], beta_squared: float = 0.3
) -> float:
    """Max F-beta over thresholds of the dataset-mean precision/recall.

    Precision and recall are averaged across images at each threshold
    index first, then F is computed per index and maximized.
    """
    sweeps = list(per_image_sweeps)
    if not sweeps:
        raise ValueError("max_fmeasure requires at least one sweep")
    for precision, recall in sweeps:
        if len(precision) != 256 or len(recall) != 256:
            raise ValueError("each sweep must hold 256 precision and 256 recall values")
    mean_p = np.mean([p for p, _ in sweeps], axis=0)
    mean_r = np.mean([r for _, r in sweeps], axis=0)
    return float(fbeta_curve(mean_p, mean_r, beta_squared).max())


def _object_similarity(region: np.ndarray) -> float:
    x = float(region.mean())
    if region.size > 1:
        sigma = float(region.std(ddof=1))
    else:
        sigma = 0.0
    return 2.0 * x / (x * x + 1.0 + 2.0 * sigma)


def _block_similarity(pred_block: np.ndarray, gt_block: np.ndarray) -> float:
    n = pred_block.size
    x = float(pred_block.mean())
    y = float(gt_block.mean())
    if n > 1:
        dx = pred_block - x
        dy = gt_block - y
        sigma_x2 = float((dx * dx).sum()) / (n - 1)
        sigma_y2 = float((dy * dy).sum()) / (n - 1)
        sigma_xy = float((dx * dy).sum()) / (n - 1)
    else:
        sigma_x2 = sigma_y2 = sigma_xy = 0.0
    # grouped so that identical inputs give bit-identical numerator and
    # denominator, making the perfect-match block score exactly 1
    alpha = (2.0 * x * y) * (2.0 * sigma_xy)
    beta = (x * x + y * y) * (sigma_x2 + sigma_y2)
    if beta == 0.0:
        return 1.0 if alpha == 0.0 else 0.0
    if alpha == 0.0:
        return 0.0
    return alpha / beta


def _foreground_centroid(gt: BinaryMap) -> tuple[int, int]:
    h, w = gt.shape
    counts = gt.astype(np.int64)
    total = int(counts.sum())
    col_mass = counts.sum(axis=0)
    row_mass = counts.sum(axis=1)
    cx = float((col_mass * np.arange(w)).sum()) / total
    cy = float((row_mass * np.arange(h)).sum()) / total
    # round half up for cross-platform determinism
    return int(np.floor(cx + 0.5)), int(np.floor(cy + 0.5))


def s_measure(pred, gt) -> float:
    """Structure measure: equal blend of object- and region-aware similarity.

    Degenerate ground truths short-circuit: all-background scores
    1 - mean(pred), all-foreground scores mean(pred). Otherwise the
    object term compares region means/spreads of the prediction on the
    GT foreground (and its complement on the background), and the region
    term averages an SSIM-like score over the four rectangles obtained
    by splitting both maps at the GT centroid, each weighted by its area
    share. The final score is clamped to >= 0.
    """
    p = validate_gray(pred, "pred")
    g = validate_mask(gt, "gt")
    _check_same_shape(p, g)

    fg_fraction = float(g.mean())
    if fg_fraction == 0.0:
        return 1.0 - float(p.mean())
    if fg_fraction == 1.0:
        return float(p.mean())

    o_fg = _object_similarity(p[g])
    o_bg = _object_similarity(1.0 - p[~g])
    s_object = fg_fraction * o_fg + (1.0 - fg_fraction) * o_bg

    cx, cy = _foreground_centroid(g)
    gt_f = g.astype(np.float64)
    weighted = 0.0
    for rows, cols in (
        (slice(None, cy), slice(None, cx)),
        (slice(None, cy), slice(cx, None)),
        (slice(cy, None), slice(None, cx)),
        (slice(cy, None), slice(cx, None)),
    ):
        pred_block = p[rows, cols]
        if pred_block.size == 0:
            continue  # centroid on the border: zero-area block, zero weight
        weighted += pred_block.size * _block_similarity(pred_block, gt_f[rows, cols])
    s_region = weighted / p.size

    return max(0.5 * s_object + 0.5 * s_region, 0.0)


def evaluate_pair(sample_id: str, pred, gt, beta_squared: float = 0.3) -> ImageEval:
    """Measure one prediction against one ground-truth image.

    The prediction is resized (bilinear) to the GT dimensions first.
    MAE compares against the continuous GT; the sweep and the structure
    measure compare against the GT thresholded at 0.5.
    """
    p = validate_gray(pred, "pred")
    g = validate_gray(gt, "gt")
    if p.shape != g.shape:
        p = resize_bilinear(p, g.shape[1], g.shape[0])
    gt_mask = g > _GT_BINARIZE_LEVEL
    precision, recall = pr_sweep(p, gt_mask)
    return ImageEval(
        sample_id=sample_id,
        mae=mae(p, g),
        sm=s_measure(p, gt_mask),
        precision=precision,
        recall=recall,
    )


def aggregate_report(samples: Iterable[ImageEval], beta_squared: float = 0.3) -> MetricReport:
    """Fold per-image results into dataset means, max-F, and the PR curve."""
    items = sorted(samples, key=lambda s: s.sample_id)
    if not items:
        raise ValueError("aggregate_report requires at least one sample")
    sweeps = [(s.precision, s.recall) for s in items]
    pr = PRCurve(
        thresholds=THRESHOLDS.copy(),
        precision=np.mean([p for p, _ in sweeps], axis=0),
        recall=np.mean([r for _, r in sweeps], axis=0),
    )
    dataset = DatasetMetrics(
        mae_mean=float(np.mean([s.mae for s in items])),
        max_f=max_fmeasure(sweeps, beta_squared),
        sm_mean=float(np.mean([s.sm for s in items])),
        pr=pr,
    )
    per_image = {s.sample_id: ImageScores(mae=s.mae, sm=s.sm) for s in items}
    return MetricReport(per_image=per_image, dataset=dataset)
