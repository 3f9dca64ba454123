"""Per-pixel histogram input models built from image archives.

Pixel values are normalized to [0, 1] and quantized to ``levels`` gray
levels; bins are centered on the level values ``k / (levels - 1)`` so that
atoms-mode resampling reproduces observed values exactly.  One histogram
set is built per class plus a pooled set over all images.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..inputs import Histogram, InputModel
from .formats import load_histograms, save_histograms

__all__ = ["PixelHistogramSet", "build_histograms", "COMBINED"]

COMBINED = "combined"


def _level_edges(levels: int) -> np.ndarray:
    step = 1.0 / (levels - 1)
    return (np.arange(levels + 1) - 0.5) * step


@dataclass
class PixelHistogramSet:
    """Per-pixel gray-level histograms for each class and the pooled set.

    ``probs[key]`` has shape (pixels, levels); ``counts[key]`` is the number
    of source images.  Keys are ints 0..9 and :data:`COMBINED`.
    """

    height: int
    width: int
    levels: int
    probs: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def pixels(self) -> int:
        return self.height * self.width

    def available(self) -> list:
        return sorted(self.probs, key=str)

    def _key(self, key):
        key = COMBINED if key in (COMBINED, -1, None) else int(key)
        if key not in self.probs:
            raise KeyError(
                f"no histogram for class {key!r} (source had no such images); "
                f"available: {self.available()}"
            )
        return key

    def histograms(self, key, mode: str = "smooth") -> list[Histogram]:
        key = self._key(key)
        edges = _level_edges(self.levels)
        return [Histogram(edges, row, mode=mode) for row in self.probs[key]]

    def input_model(self, key, mode: str = "smooth") -> InputModel:
        """Independent per-pixel sampler for one class (or the pooled set)."""
        return InputModel(self.histograms(key, mode))

    def pixel_means(self, key) -> np.ndarray:
        key = self._key(key)
        centers = np.arange(self.levels) / (self.levels - 1)
        return self.probs[key] @ centers

    def save(self, out_dir, prefix: str = "h") -> list[Path]:
        """Write one MDHS file per available class; returns the paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for key in self.available():
            class_id = -1 if key == COMBINED else int(key)
            name = f"{prefix}_{'combined' if class_id < 0 else class_id}.mdhs"
            path = out_dir / name
            save_histograms(path, class_id, self.histograms(key, mode="smooth"))
            paths.append(path)
        return paths

    @classmethod
    def load(cls, paths, mode: str = "smooth") -> "PixelHistogramSet":
        """Reassemble a set from MDHS files (shapes must agree)."""
        probs: dict = {}
        counts: dict = {}
        height = width = levels = None
        for path in paths:
            class_id, hists = load_histograms(path, mode=mode)
            mat = np.stack([h.probs for h in hists])
            if levels is None:
                levels = mat.shape[1]
                side = int(round(np.sqrt(mat.shape[0])))
                height, width = side, side
            if mat.shape[1] != levels:
                raise ValueError(f"{path}: bin count {mat.shape[1]} != {levels}")
            key = COMBINED if class_id < 0 else class_id
            probs[key] = mat
            counts[key] = -1
        if not probs:
            raise ValueError("no MDHS files given")
        return cls(height, width, levels, probs, counts, {"source": "mdhs"})


def build_histograms(
    images: np.ndarray,
    labels: np.ndarray,
    levels: int = 256,
    classes=range(10),
) -> PixelHistogramSet:
    """Build per-pixel histograms from images in [0, 1].

    Classes with no images are skipped (recorded in metadata) and raise
    only when requested; all other classes and the pooled set proceed.
    """
    images = np.asarray(images, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if images.ndim != 3:
        raise ValueError("images must have shape (n, height, width)")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    if images.shape[0] == 0:
        raise ValueError("archive contains no images")
    if levels < 2:
        raise ValueError("need at least 2 gray levels")
    if images.min() < 0 or images.max() > 1:
        raise ValueError("images must be normalized to [0, 1]")
    n, h, w = images.shape
    pixels = h * w
    quantized = np.rint(images.reshape(n, pixels) * (levels - 1)).astype(np.int64)

    def tally(rows: np.ndarray) -> np.ndarray:
        flat = (np.arange(pixels)[None, :] * levels + rows).ravel()
        counts = np.bincount(flat, minlength=pixels * levels)
        return counts.reshape(pixels, levels) / rows.shape[0]

    out = PixelHistogramSet(h, w, levels)
    missing = []
    for y in classes:
        rows = quantized[labels == y]
        if rows.shape[0] == 0:
            missing.append(int(y))
            continue
        out.probs[int(y)] = tally(rows)
        out.counts[int(y)] = rows.shape[0]
    out.probs[COMBINED] = tally(quantized)
    out.counts[COMBINED] = n
    out.metadata = {
        "images": int(n),
        "levels": int(levels),
        "missing_classes": missing,
    }
    return out
