"""Pixel-level primitives shared by the fusion and evaluation layers.

A "gray image" is a 2-D float64 array, row-major, values in [0, 1].
A "binary map" is a 2-D bool array, True = foreground.

Every function here is pure: inputs are never mutated and outputs are
fresh arrays, so callers may parallelize over images freely.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

GrayImage = np.ndarray
BinaryMap = np.ndarray

HISTOGRAM_BINS = 256


def validate_gray(img, name: str = "image", check_range: bool = True) -> GrayImage:
    """Canonicalize an array-like into a gray image, rejecting bad shapes.

    With ``check_range`` the values must be finite and inside [0, 1];
    intermediate buffers (raw sums awaiting normalization) skip it.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(
            f"{name}: expected a 2-D image with positive dimensions, got shape {arr.shape}"
        )
    if check_range:
        if not np.isfinite(arr).all():
            raise ValueError(f"{name}: contains non-finite pixel values")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"{name}: pixel values outside [0, 1] (range [{lo}, {hi}])")
    return arr


def validate_mask(mask, name: str = "mask") -> BinaryMap:
    """Check that an array is a 2-D bool foreground mask."""
    arr = np.asarray(mask)
    if arr.dtype != np.bool_:
        raise ValueError(f"{name}: expected a bool mask, got dtype {arr.dtype}")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(
            f"{name}: expected a 2-D mask with positive dimensions, got shape {arr.shape}"
        )
    return arr


def _dims(arr: np.ndarray) -> str:
    return f"{arr.shape[1]}x{arr.shape[0]}"


def normalize_minmax(img) -> GrayImage:
    """Affinely rescale an image so its extrema land on 0 and 1.

    A constant image maps to all zeros, which binarizes to an empty
    foreground instead of dividing by zero. Raw (out-of-[0,1]) inputs
    are accepted; this is the canonical way back into range.
    """
    arr = validate_gray(img, check_range=False)
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def otsu_threshold(img) -> float:
    """Histogram threshold maximizing between-class variance.

    Pixels are quantized into 256 bins via floor(p * 255) and the split
    k (class A = bins 0..k, class B = bins k+1..255) with the largest
    between-class variance is selected; ties go to the smallest bin.
    The comparison runs in exact integer arithmetic so the winning bin
    never depends on floating-point luck. A constant image returns its
    own value, which makes ``binarize`` produce an empty foreground.
    """
    arr = validate_gray(img, check_range=False)
    flat = arr.ravel()
    lo = float(flat.min())
    if lo == float(flat.max()):
        return lo
    bins = np.clip((flat * 255.0).astype(np.int64), 0, 255)
    counts = np.bincount(bins, minlength=HISTOGRAM_BINS).tolist()
    total = flat.size
    mass_total = sum(k * c for k, c in enumerate(counts))

    best_k = 0
    best_num = -1  # variance numerators are >= 0, so bin 0 always replaces this
    best_den = 1
    w0 = 0
    s0 = 0
    for k in range(HISTOGRAM_BINS):
        w0 += counts[k]
        s0 += k * counts[k]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            num, den = 0, 1
        else:
            # w0*w1*(mu0 - mu1)^2 == (s0*w1 - (S - s0)*w0)^2 / (w0*w1)
            diff = s0 * w1 - (mass_total - s0) * w0
            num, den = diff * diff, w0 * w1
        if num * best_den > best_num * den:
            best_num, best_den, best_k = num, den, k
    return best_k / 255.0


def binarize(img) -> BinaryMap:
    """Foreground mask of the pixels strictly above the Otsu threshold."""
    arr = validate_gray(img, check_range=False)
    return arr > otsu_threshold(arr)


def _sample_coords(src_n: int, dst_n: int) -> np.ndarray:
    # half-pixel-center sampling, clamped to the source grid
    coords = (np.arange(dst_n, dtype=np.float64) + 0.5) * (src_n / dst_n) - 0.5
    return np.clip(coords, 0.0, float(src_n - 1))


def resize_bilinear(img, width: int, height: int) -> GrayImage:
    """Resample to ``width`` x ``height`` with bilinear interpolation.

    Samples at half-pixel centers with edge clamping. Resampling to the
    source dimensions reproduces the input bit-for-bit, and the output
    range never leaves [min(input), max(input)].
    """
    arr = validate_gray(img, check_range=False)
    if width < 1 or height < 1:
        raise ValueError(f"target dimensions must be positive, got {width}x{height}")
    src_h, src_w = arr.shape

    xs = _sample_coords(src_w, width)
    ys = _sample_coords(src_h, height)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = xs - x0
    fy = ys - y0

    a = arr[np.ix_(y0, x0)]
    b = arr[np.ix_(y0, x1)]
    c = arr[np.ix_(y1, x0)]
    d = arr[np.ix_(y1, x1)]
    # lerp as p + f*(q - p): exact for equal endpoints and at f == 0
    top = a + fx[None, :] * (b - a)
    bottom = c + fx[None, :] * (d - c)
    out = top + fy[:, None] * (bottom - top)
    return np.clip(out, arr.min(), arr.max())


def weighted_sum(maps: Sequence, weights: Sequence[float]) -> GrayImage:
    """Pixel-wise sum of ``weights[n] * maps[n]`` over the branches.

    The fold is a balanced pairwise reduction in branch order: fixed
    association keeps results deterministic, and a uniform blend of a
    power-of-two count of identical maps reproduces them bit-exactly.
    The output is not re-clamped; callers normalize.
    """
    arrays = [validate_gray(m, name=f"branch {i}", check_range=False) for i, m in enumerate(maps)]
    if not arrays:
        raise ValueError("weighted_sum requires at least one map")
    if len(weights) != len(arrays):
        raise ValueError(f"got {len(arrays)} maps but {len(weights)} weights")
    base = arrays[0].shape
    for i, arr in enumerate(arrays):
        if arr.shape != base:
            raise ValueError(
                f"branch {i}: dimensions {_dims(arr)} do not match branch 0 ({_dims(arrays[0])})"
            )
    for i, w in enumerate(weights):
        if not np.isfinite(w) or w < 0.0:
            raise ValueError(f"branch {i}: weight must be finite and >= 0, got {w}")

    terms = [arr * float(w) for arr, w in zip(arrays, weights)]
    while len(terms) > 1:
        paired = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            paired.append(terms[-1])
        terms = paired
    return terms[0]
