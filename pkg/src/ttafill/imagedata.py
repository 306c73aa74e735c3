"""Image I/O, value conventions, and dataset preprocessing.

Images are float32 arrays of shape (H, W, 3) with values in [0, 1],
channel order RGB.  Byte images map to floats by dividing by 255 exactly;
floats map back by round-half-up of v*255, so a save/load round trip is
accurate to 1/510 per value.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

MIN_SIDE = 8  # smallest input the generator's two stride-2 stages accept

IMAGE_EXTENSIONS = (".png", ".bmp", ".ppm", ".tif", ".tiff")


class ImageFormatError(ValueError):
    """Raised when a file decodes to something other than 8-bit RGB."""


class DatasetError(ValueError):
    """Raised for empty or undersized dataset inputs."""


@dataclass
class DatasetSpec:
    """Preprocessing recipe for a directory of images.

    ``downsample_factor`` > 1 replaces the shorter-side resize with an
    integer box-average (used for high-resolution document scans).
    """

    source_dir: str | Path
    max_images: int = 100
    crop_size: int = 256
    downsample_factor: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.crop_size % 4 != 0:
            raise ValueError(f"crop_size must be divisible by 4, got {self.crop_size}")
        if self.downsample_factor < 1:
            raise ValueError("downsample_factor must be >= 1")
        if self.max_images < 1:
            raise ValueError("max_images must be >= 1")


def validate_image(image: np.ndarray) -> np.ndarray:
    """Check the (H, W, 3) float [0,1] convention; returns the array."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {image.shape}")
    if image.shape[0] < MIN_SIDE or image.shape[1] < MIN_SIDE:
        raise ValueError(f"image sides must be >= {MIN_SIDE}, got {image.shape[:2]}")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return image


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit RGB raster as float32 in [0, 1] (values = raw/255)."""
    try:
        with PILImage.open(path) as img:
            if img.mode != "RGB":
                raise ImageFormatError(
                    f"{path}: expected 8-bit RGB, got mode {img.mode!r}"
                )
            raw = np.asarray(img, dtype=np.uint8)
    except ImageFormatError:
        raise
    except (OSError, SyntaxError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return raw.astype(np.float32) / 255.0


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Write as 8-bit RGB PNG; bytes are round-half-up of v*255."""
    validate_image(image)
    raw = np.floor(image.astype(np.float64) * 255.0 + 0.5).astype(np.uint8)
    try:
        PILImage.fromarray(raw, mode="RGB").save(path)
    except OSError as exc:
        raise OSError(f"cannot write image {path}: {exc}") from exc


def _box_downsample(image: np.ndarray, factor: int) -> np.ndarray:
    h, w, c = image.shape
    h2, w2 = h // factor, w // factor
    if h2 < MIN_SIDE or w2 < MIN_SIDE:
        raise DatasetError(f"image {h}x{w} too small for downsample factor {factor}")
    trimmed = image[: h2 * factor, : w2 * factor]
    return trimmed.reshape(h2, factor, w2, factor, c).mean(axis=(1, 3))


def _resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    # PIL's float ("F") mode resize, one channel at a time
    channels = [
        np.asarray(
            PILImage.fromarray(image[:, :, c], mode="F").resize(
                (out_w, out_h), resample=PILImage.Resampling.BILINEAR
            )
        )
        for c in range(3)
    ]
    return np.clip(np.stack(channels, axis=2), 0.0, 1.0).astype(np.float32)


def preprocess(image: np.ndarray, spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    """Shorter-side resize (or box-average downsample) + seeded random crop.

    The output is always crop_size x crop_size x 3 in [0, 1].
    """
    validate_image(image)
    if spec.downsample_factor > 1:
        image = _box_downsample(image, spec.downsample_factor)
    else:
        h, w = image.shape[:2]
        short = min(h, w)
        if short != spec.crop_size:
            scale = spec.crop_size / short
            out_h = spec.crop_size if h == short else max(spec.crop_size, round(h * scale))
            out_w = spec.crop_size if w == short else max(spec.crop_size, round(w * scale))
            image = _resize_bilinear(image, out_h, out_w)
    h, w = image.shape[:2]
    if h < spec.crop_size or w < spec.crop_size:
        raise DatasetError(
            f"image {h}x{w} smaller than crop size {spec.crop_size} after preprocessing"
        )
    top = int(rng.integers(0, h - spec.crop_size + 1))
    left = int(rng.integers(0, w - spec.crop_size + 1))
    out = image[top : top + spec.crop_size, left : left + spec.crop_size]
    return np.ascontiguousarray(out, dtype=np.float32)


def list_dataset_files(source_dir: str | Path) -> list[Path]:
    """Decodable raster files in lexicographic filename order."""
    root = Path(source_dir)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    files = sorted(
        p for p in root.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    return files


def ingest_dataset(spec: DatasetSpec) -> list[np.ndarray]:
    """Load the first max_images files (filename order) and preprocess each.

    Deterministic given directory contents and spec.seed.
    """
    files = list_dataset_files(spec.source_dir)
    if not files:
        raise DatasetError(f"no images found in {spec.source_dir}")
    files = files[: spec.max_images]
    rng = np.random.default_rng(spec.seed)
    return [preprocess(load_image(p), spec, rng) for p in files]


def default_output_dir() -> Path:
    """Output directory fallback, overridable via TTAFILL_OUTDIR."""
    return Path(os.environ.get("TTAFILL_OUTDIR", "runs"))
