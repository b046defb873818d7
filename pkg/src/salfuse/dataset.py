"""Discovery and 8-bit grayscale I/O for branch/GT directories.

Samples are joined across directories by bare file stem (case
sensitive). Supported rasters are binary PGM (P5, maxval 255) and PNG;
multi-channel PNGs are reduced by averaging the color channels. Decoded
bytes map to values b/255 and encoding rounds half up, so a save/load
round trip is byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .imagecore import GrayImage, validate_gray

_EXTENSIONS = (".png", ".pgm")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    branch_paths: tuple[Path, ...]
    gt_path: Path | None = None


@dataclass(frozen=True)
class SkippedStem:
    stem: str
    missing_from: str


@dataclass(frozen=True)
class SampleSet:
    samples: tuple[Sample, ...]
    skipped: tuple[SkippedStem, ...] = ()

    def __len__(self) -> int:
        return len(self.samples)


def _index_dir(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise ValueError(f"directory not readable: {directory}")
    try:
        entries = sorted(directory.iterdir())
    except OSError as exc:
        raise ValueError(f"directory not readable: {directory} ({exc})") from exc
    index: dict[str, Path] = {}
    for path in entries:
        if not path.is_file() or path.suffix.lower() not in _EXTENSIONS:
            continue
        stem = path.stem
        if stem in index:
            raise ValueError(
                f"ambiguous stem '{stem}' in {directory}: "
                f"{index[stem].name} and {path.name}"
            )
        index[stem] = path
    return index


def discover(branch_dirs: Sequence, gt_dir=None) -> SampleSet:
    """Pair files across branch directories (and optionally a GT directory).

    A sample exists iff its stem appears in every branch directory; the
    result is sorted by stem and independent of filesystem enumeration
    order. Stems missing from some branch are recorded as skipped with
    the first branch they are missing from. GT pairing is by identical
    stem; samples without a GT file keep ``gt_path=None``.
    """
    dirs = [Path(d) for d in branch_dirs]
    if not dirs:
        raise ValueError("at least one branch directory is required")
    indexes = [_index_dir(d) for d in dirs]
    gt_index = _index_dir(Path(gt_dir)) if gt_dir is not None else {}

    common = set(indexes[0])
    everything = set(indexes[0])
    for idx in indexes[1:]:
        common &= set(idx)
        everything |= set(idx)
    if not common:
        counts = ", ".join(f"{d}: {len(idx)} file(s)" for d, idx in zip(dirs, indexes))
        raise ValueError(f"no common stems across branch directories ({counts})")

    skipped = []
    for stem in sorted(everything - common):
        missing = next(str(d) for d, idx in zip(dirs, indexes) if stem not in idx)
        skipped.append(SkippedStem(stem=stem, missing_from=missing))

    samples = [
        Sample(
            sample_id=stem,
            branch_paths=tuple(idx[stem] for idx in indexes),
            gt_path=gt_index.get(stem),
        )
        for stem in sorted(common)
    ]
    return SampleSet(samples=tuple(samples), skipped=tuple(skipped))


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    # header: magic, width, height, maxval, separated by whitespace/comments
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval precedes the raster

    if fields[0] != b"P5":
        raise ValueError(f"{path}: unsupported PGM magic {fields[0]!r} (only binary P5)")
    try:
        width, height, maxval = (int(f) for f in fields[1:4])
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header fields {fields[1:4]}") from None
    if width < 1 or height < 1:
        raise ValueError(f"{path}: non-positive PGM dimensions {width}x{height}")
    if maxval != 255:
        raise ValueError(f"{path}: PGM maxval {maxval} unsupported (need 255)")
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError(
            f"{path}: PGM raster truncated ({len(raster)} of {width * height} bytes)"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _read_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            if mode == "1":
                im = im.convert("L")
                mode = "L"
            if mode not in ("L", "LA", "RGB", "RGBA"):
                raise ValueError(
                    f"{path}: unsupported image mode '{mode}' (8-bit grayscale or color required)"
                )
            arr = np.asarray(im)
    except ValueError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ValueError(f"{path}: cannot decode ({exc})") from exc
    if arr.ndim == 3:
        if arr.shape[2] == 4 or arr.shape[2] == 2:
            arr = arr[:, :, :-1]  # drop alpha
        arr = arr.astype(np.float64).mean(axis=2)
    return arr


def load_gray(path) -> GrayImage:
    """Decode an 8-bit grayscale raster into a gray image (values b/255)."""
    p = Path(path)
    if not p.is_file():
        raise ValueError(f"{p}: no such file")
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        raw = _read_pgm(p)
    elif suffix == ".png":
        raw = _read_png(p)
    else:
        raise ValueError(f"{p}: unsupported format '{suffix}' (expected .png or .pgm)")
    return raw.astype(np.float64) / 255.0


def save_gray(img, path) -> None:
    """Encode a gray image as 8-bit grayscale, byte = round-half-up(p*255)."""
    arr = validate_gray(img, "image")
    p = Path(path)
    raster = np.clip(np.floor(arr * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)
    p.parent.mkdir(parents=True, exist_ok=True)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        header = f"P5\n{raster.shape[1]} {raster.shape[0]}\n255\n".encode("ascii")
        p.write_bytes(header + raster.tobytes())
    elif suffix == ".png":
        Image.fromarray(raster, mode="L").save(p, format="PNG")
    else:
        raise ValueError(f"{p}: unsupported format '{suffix}' (expected .png or .pgm)")
