"""salfuse: training-free saliency-map fusion and SOD evaluation metrics."""

from .dataset import Sample, SampleSet, SkippedStem, discover, load_gray, save_gray
from .fusion import (
    FusionConfig,
    FusionTrace,
    IterationRecord,
    additive_fuse,
    binary_fmeasure,
    fuse,
    positive_feedback_fuse,
)
from .imagecore import (
    BinaryMap,
    GrayImage,
    binarize,
    normalize_minmax,
    otsu_threshold,
    resize_bilinear,
    weighted_sum,
)
from .metrics import (
    ConfusionCounts,
    DatasetMetrics,
    ImageEval,
    ImageScores,
    MetricReport,
    PRCurve,
    THRESHOLDS,
    aggregate_report,
    confusion_counts,
    evaluate_pair,
    mae,
    max_fmeasure,
    pr_sweep,
    s_measure,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMap",
    "ConfusionCounts",
    "DatasetMetrics",
    "FusionConfig",
    "FusionTrace",
    "GrayImage",
    "ImageEval",
    "ImageScores",
    "IterationRecord",
    "MetricReport",
    "PRCurve",
    "Sample",
    "SampleSet",
    "SkippedStem",
    "THRESHOLDS",
    "additive_fuse",
    "aggregate_report",
    "binarize",
    "binary_fmeasure",
    "confusion_counts",
    "discover",
    "evaluate_pair",
    "fuse",
    "load_gray",
    "mae",
    "max_fmeasure",
    "normalize_minmax",
    "otsu_threshold",
    "positive_feedback_fuse",
    "pr_sweep",
    "resize_bilinear",
    "s_measure",
    "save_gray",
    "weighted_sum",
]
