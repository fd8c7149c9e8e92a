"""Region-feature files: 36 detector boxes of 2048 appearance + 6 geometry dims.

Binary layout of a ``.vfea`` file: magic bytes ``VFEA``, then two unsigned
32-bit little-endian integers (num_boxes, dim), then num_boxes*dim little-
endian float32 values, row-major. One file per image, named
``<image_id>.vfea``. The detector that produces them is upstream tooling;
here they are only read, validated, and fed to the model.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FeatureShapeError, UnknownImage

MAGIC = b"VFEA"
NUM_BOXES = 36
FEATURE_DIM = 2054  # 2048 appearance + 6 box location/size dims


@dataclass(frozen=True)
class VisualFeatures:
    image_id: str
    boxes: np.ndarray  # (num_boxes, dim) float32

    def validated(self, num_boxes: int = NUM_BOXES, dim: int = FEATURE_DIM) -> "VisualFeatures":
        if self.boxes.shape != (num_boxes, dim):
            raise FeatureShapeError(
                f"features for {self.image_id!r} have shape {self.boxes.shape}, "
                f"expected ({num_boxes}, {dim})"
            )
        if not np.isfinite(self.boxes).all():
            raise FeatureShapeError(f"features for {self.image_id!r} contain non-finite values")
        return self


def write_vfea(path: str | Path, features: VisualFeatures) -> None:
    boxes = np.ascontiguousarray(features.boxes, dtype="<f4")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", boxes.shape[0], boxes.shape[1]))
        f.write(boxes.tobytes())


def read_vfea(path: str | Path, image_id: str | None = None) -> VisualFeatures:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise FeatureShapeError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 12:
        raise FeatureShapeError(f"{path}: truncated header")
    num_boxes, dim = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * num_boxes * dim
    if len(data) != expected:
        raise FeatureShapeError(
            f"{path}: expected {expected} bytes for {num_boxes}x{dim}, got {len(data)}"
        )
    boxes = np.frombuffer(data[12:], dtype="<f4").reshape(num_boxes, dim)
    return VisualFeatures(image_id=image_id or path.stem, boxes=boxes.copy())


class FeatureStore:
    """Directory of ``<image_id>.vfea`` files."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def load(self, image_id: str) -> VisualFeatures:
        path = self.directory / f"{image_id}.vfea"
        if not path.is_file():
            raise UnknownImage(f"no feature file for image {image_id!r}")
        return read_vfea(path, image_id=image_id)

    def save(self, features: VisualFeatures) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{features.image_id}.vfea"
        write_vfea(path, features)
        return path

    def image_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.vfea"))


def random_features(image_id: str, seed: int, num_boxes: int = NUM_BOXES,
                    dim: int = FEATURE_DIM) -> VisualFeatures:
    """Synthetic stand-in features (tests, demos); detector output in practice."""
    rng = np.random.default_rng(seed)
    boxes = rng.normal(0.0, 1.0, size=(num_boxes, dim)).astype(np.float32)
    return VisualFeatures(image_id=image_id, boxes=boxes)
