"""Shared synthetic-image generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

ROBUSTNESS_SEED = 20240601
ROBUSTNESS_SIZE = 96
ROBUSTNESS_COUNT = 50


def box_blur(img: np.ndarray, k: int = 5, passes: int = 1) -> np.ndarray:
    """Separable k x k mean filter with edge padding, clipped to [0, 1]."""

    def axis_blur(a: np.ndarray, axis: int) -> np.ndarray:
        pad = k // 2
        widths = [(0, 0), (0, 0)]
        widths[axis] = (pad, pad)
        p = np.pad(a, widths, mode="edge")
        c = np.cumsum(p, axis=axis)
        lead = [slice(None), slice(None)]
        lead[axis] = slice(0, 1)
        c = np.concatenate([np.zeros_like(c[tuple(lead)]), c], axis=axis)
        hi = [slice(None), slice(None)]
        hi[axis] = slice(k, None)
        lo = [slice(None), slice(None)]
        lo[axis] = slice(None, -k)
        return (c[tuple(hi)] - c[tuple(lo)]) / k

    out = img.astype(np.float64)
    for _ in range(passes):
        out = axis_blur(axis_blur(out, 0), 1)
    return np.clip(out, 0.0, 1.0)


def disc_mask(h: int, w: int, cy: float, cx: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def spanning_gray(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Random non-constant map rescaled so min is exactly 0 and max exactly 1."""
    m = rng.random((h, w))
    return (m - m.min()) / (m.max() - m.min())


def make_robustness_case(
    rng: np.random.Generator, size: int = ROBUSTNESS_SIZE, n_bad: int = 3
) -> tuple[np.ndarray, list[np.ndarray]]:
    """One GT disc plus branches: [lightly blurred GT, displaced random blobs...]."""
    h = w = size
    scale = size / 96.0
    r = int(rng.integers(round(16 * scale), round(23 * scale)))
    margin = max(2, round(6 * scale))
    cy = int(rng.integers(r + margin, h - r - margin))
    cx = int(rng.integers(r + margin, w - r - margin))
    gt = disc_mask(h, w, cy, cx, r)
    branches = [box_blur(gt.astype(np.float64), k=5, passes=1)]
    for _ in range(n_bad):
        ang = rng.uniform(0.0, 2.0 * np.pi)
        dist = rng.uniform(1.0, 1.5) * r
        bcy = float(np.clip(cy + dist * np.sin(ang), margin, h - margin - 1))
        bcx = float(np.clip(cx + dist * np.cos(ang), margin, w - margin - 1))
        blob_r = int(rng.integers(max(2, round(5 * scale)), max(3, round(9 * scale))))
        blob = disc_mask(h, w, bcy, bcx, blob_r).astype(np.float64)
        for _ in range(int(rng.integers(3, 6))):
            ny = int(rng.integers(margin, h - margin))
            nx = int(rng.integers(margin, w - margin))
            extra_r = int(rng.integers(max(1, round(3 * scale)), max(2, round(6 * scale))))
            blob = np.maximum(blob, disc_mask(h, w, ny, nx, extra_r))
        branches.append(box_blur(blob, k=5, passes=1))
    return gt, branches


def robustness_cases(
    count: int = ROBUSTNESS_COUNT, seed: int = ROBUSTNESS_SEED, n_bad: int = 3
) -> list[tuple[np.ndarray, list[np.ndarray]]]:
    rng = np.random.default_rng(seed)
    return [make_robustness_case(rng, n_bad=n_bad) for _ in range(count)]


@pytest.fixture(scope="session")
def robustness_fixture() -> list[tuple[np.ndarray, list[np.ndarray]]]:
    """The 50-image adversarial set: branch 0 matches GT, branches 1-3 do not."""
    return robustness_cases()
