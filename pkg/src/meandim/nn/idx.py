"""Readers and writers for the IDX image/label archive layout, with a CSV
fallback (rows of ``label, p0, p1, ...`` with pixel values 0..255)."""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "ArchiveError",
    "read_idx_images",
    "read_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "load_archive",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class ArchiveError(ValueError):
    pass


def _read_bytes(path) -> bytes:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ArchiveError(f"unreadable archive {path}: {exc}") from exc
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx_images(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise ArchiveError(f"{path}: truncated IDX image header")
    magic, n, h, w = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise ArchiveError(f"{path}: bad IDX image magic {magic:#010x}")
    if len(raw) != 16 + n * h * w:
        raise ArchiveError(f"{path}: expected {n * h * w} pixel bytes, got {len(raw) - 16}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, h, w).copy()


def read_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise ArchiveError(f"{path}: truncated IDX label header")
    magic, n = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise ArchiveError(f"{path}: bad IDX label magic {magic:#010x}")
    if len(raw) != 8 + n:
        raise ArchiveError(f"{path}: expected {n} label bytes, got {len(raw) - 8}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8).copy()


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IMAGES_MAGIC, n, h, w) + images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", LABELS_MAGIC, labels.size) + labels.tobytes())


def load_archive(images_path, labels_path=None) -> tuple[np.ndarray, np.ndarray]:
    """Load an archive as (images in [0,1] float64 (n,H,W), labels (n,)).

    ``images_path`` ending in .csv selects the CSV fallback (square images
    inferred from the column count); otherwise both IDX files are required.
    """
    images_path = Path(images_path)
    if images_path.suffix.lower() == ".csv":
        try:
            table = np.loadtxt(images_path, delimiter=",", dtype=float)
        except (OSError, ValueError) as exc:
            raise ArchiveError(f"unreadable CSV archive {images_path}: {exc}") from exc
        table = np.atleast_2d(table)
        labels = table[:, 0].astype(int)
        pixels = table[:, 1:]
        side = int(round(np.sqrt(pixels.shape[1])))
        if side * side != pixels.shape[1]:
            raise ArchiveError(f"{images_path}: {pixels.shape[1]} pixels is not a square image")
        images = pixels.reshape(-1, side, side) / 255.0
        return images, labels
    if labels_path is None:
        raise ArchiveError("IDX archives need a separate labels file")
    images = read_idx_images(images_path).astype(float) / 255.0
    labels = read_idx_labels(labels_path).astype(int)
    if images.shape[0] != labels.shape[0]:
        raise ArchiveError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    return images, labels
