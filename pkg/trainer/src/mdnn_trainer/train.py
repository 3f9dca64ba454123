"""Build/train the digit classifier and export portable artifacts.

Two scales share one export path:

* ``full``  - the 28x28 architecture (28 conv kernels 3x3, 2x2 max pool,
  flatten, dense 128 relu, dropout 0.2, dense 10), trained with Adam on an
  IDX archive and evaluated on held-out images.
* ``toy``   - a scaled-down random-weight model (10x10 input, 4 kernels,
  dense 16) exported without training; used to generate checked-in CI
  fixtures so downstream tests never need the dataset.

Exports: an MDNN weight file (+ JSON sidecar), MDHS per-pixel histogram
fixtures, a golden-vector JSON holding forward passes of 5 fixed inputs
(all-zero, all-one, three sample images) computed by this framework, and a
run report.  The MDNN file is re-read and compared field by field before
the goldens are written; any mismatch aborts the run.
"""
from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export as ex

TOY_SHAPE = (10, 10, 1)
FULL_SHAPE = (28, 28, 1)
TOY_LEVELS = 16
FULL_LEVELS = 256


@dataclass
class TrainRun:
    scale: str = "toy"                 # "toy" | "full"
    data_dir: str | None = None
    epochs: int = 10
    seed: int = 0
    out_dir: str = "export"
    histogram_images: int = 80         # synthetic image count in toy mode
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scale not in ("toy", "full"):
            raise ValueError(f"scale must be 'toy' or 'full', got {self.scale!r}")
        if self.scale == "full" and not self.data_dir:
            raise ValueError("full-scale training needs --data")


# ---------------------------------------------------------------------------
# dataset loading (IDX layout, gzip transparent)
# ---------------------------------------------------------------------------

def _read_idx(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    magic = struct.unpack(">I", raw[:4])[0]
    if magic == 0x803:
        n, h, w = struct.unpack(">III", raw[4:16])
        return np.frombuffer(raw, np.uint8, offset=16).reshape(n, h, w)
    if magic == 0x801:
        n = struct.unpack(">I", raw[4:8])[0]
        return np.frombuffer(raw, np.uint8, offset=8)
    raise ValueError(f"{path}: not an IDX file")


def _find(data_dir: Path, stem: str) -> Path:
    for suffix in ("", ".gz"):
        p = data_dir / (stem + suffix)
        if p.exists():
            return p
    raise FileNotFoundError(f"{stem}[.gz] not found in {data_dir}")


def load_dataset(data_dir: str):
    d = Path(data_dir)
    xtr = _read_idx(_find(d, "train-images-idx3-ubyte")).astype("float32") / 255.0
    ytr = _read_idx(_find(d, "train-labels-idx1-ubyte")).astype("int64")
    xte = _read_idx(_find(d, "t10k-images-idx3-ubyte")).astype("float32") / 255.0
    yte = _read_idx(_find(d, "t10k-labels-idx1-ubyte")).astype("int64")
    return (xtr, ytr), (xte, yte)


def synthetic_images(n: int, shape, seed: int):
    """Deterministic blobby digit-ish images in [0,1] with cyclic labels."""
    h, w, _ = shape
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    images = np.empty((n, h, w), dtype=float)
    labels = np.arange(n) % 10
    for i, y in enumerate(labels):
        cy = (y % 5) / 4 * (h - 1)
        cx = (y // 5 + rng.random()) / 2 * (w - 1)
        r2 = (yy - cy) ** 2 + (xx - cx) ** 2
        blob = np.exp(-r2 / (2.0 + y))
        noise = rng.random((h, w)) * 0.3
        images[i] = np.clip(blob + noise, 0.0, 1.0)
    return images, labels


# ---------------------------------------------------------------------------
# model construction / export
# ---------------------------------------------------------------------------

def build_model(scale: str, seed: int):
    import keras

    keras.utils.set_random_seed(seed)
    if scale == "full":
        shape, kernels, hidden = FULL_SHAPE, 28, 128
    else:
        shape, kernels, hidden = TOY_SHAPE, 4, 16
    model = keras.Sequential([
        keras.layers.Input(shape=shape),
        keras.layers.Conv2D(kernels, (3, 3)),
        keras.layers.MaxPooling2D((2, 2)),
        keras.layers.Flatten(),
        keras.layers.Dense(hidden, activation="relu"),
        keras.layers.Dropout(0.2),
        keras.layers.Dense(10),          # logits; softmax applied downstream
    ])
    return model, shape


def model_records(model) -> list[ex.LayerRecord]:
    import keras

    records = []
    for layer in model.layers:
        if isinstance(layer, keras.layers.Conv2D):
            w, b = layer.get_weights()
            records.append(ex.conv_record(w, b, stride=layer.strides[0],
                                          padding=layer.padding, activation="identity"))
        elif isinstance(layer, keras.layers.MaxPooling2D):
            records.append(ex.pool_record(layer.pool_size))
        elif isinstance(layer, keras.layers.Flatten):
            records.append(ex.flatten_record())
        elif isinstance(layer, keras.layers.Dense):
            w, b = layer.get_weights()
            act = "relu" if layer.activation.__name__ == "relu" else "identity"
            records.append(ex.dense_record(w, b, activation=act))
        elif isinstance(layer, keras.layers.Dropout):
            records.append(ex.dropout_record(layer.rate))
        else:
            raise ValueError(f"unsupported layer {type(layer).__name__}")
    return records


def golden_inputs(shape, sample_images: np.ndarray) -> np.ndarray:
    h, w, c = shape
    flat = h * w * c
    rows = [np.zeros(flat), np.ones(flat)]
    for img in sample_images[:3]:
        rows.append(np.asarray(img, dtype=float).reshape(flat))
    return np.stack(rows)


def _histogram_probs(images: np.ndarray, levels: int) -> np.ndarray:
    n = images.shape[0]
    pixels = images.reshape(n, -1)
    q = np.rint(pixels * (levels - 1)).astype(np.int64)
    npix = q.shape[1]
    flat = (np.arange(npix)[None, :] * levels + q).ravel()
    counts = np.bincount(flat, minlength=npix * levels)
    return counts.reshape(npix, levels) / n


def export_histograms(out_dir: Path, images: np.ndarray, labels: np.ndarray, levels: int):
    step = 1.0 / (levels - 1)
    edges = (np.arange(levels + 1) - 0.5) * step
    written = []
    for y in range(10):
        sub = images[labels == y]
        if sub.shape[0] == 0:
            continue
        path = out_dir / f"h_{y}.mdhs"
        ex.write_mdhs(path, y, edges, _histogram_probs(sub, levels))
        written.append(path)
    path = out_dir / "h_combined.mdhs"
    ex.write_mdhs(path, -1, edges, _histogram_probs(images, levels))
    written.append(path)
    return written


def train_and_export(run: TrainRun) -> dict:
    """Produce MDNN weights, MDHS fixtures, golden vectors and a report.

    Returns a dict of output paths plus the achieved held-out accuracy
    (None in toy mode).
    """
    out_dir = Path(run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, shape = build_model(run.scale, run.seed)

    accuracy = None
    if run.scale == "full":
        (xtr, ytr), (xte, yte) = load_dataset(run.data_dir)
        import keras

        model.compile(
            optimizer="adam",
            loss=keras.losses.SparseCategoricalCrossentropy(from_logits=True),
            metrics=["accuracy"],
        )
        history = model.fit(xtr[..., None], ytr, epochs=run.epochs, verbose=2)
        if not np.all(np.isfinite(history.history["loss"])):
            raise RuntimeError("training diverged (non-finite loss)")
        _, accuracy = model.evaluate(xte[..., None], yte, verbose=0)
        hist_images, hist_labels = xte.astype(float), yte
        levels = FULL_LEVELS
        sample_images = xte[:3]
    else:
        hist_images, hist_labels = synthetic_images(
            run.histogram_images, shape, run.seed,
        )
        levels = TOY_LEVELS
        sample_images = hist_images[:3]

    records = model_records(model)
    mdnn_path = out_dir / "model.mdnn"
    metadata = {
        "scale": run.scale,
        "seed": run.seed,
        "epochs": run.epochs if run.scale == "full" else 0,
        "input_shape": list(shape),
        "trained": run.scale == "full",
        "accuracy": accuracy,
        **run.metadata,
    }
    ex.write_mdnn(mdnn_path, shape, records, metadata=metadata)

    # verify the container round-trips bit-exactly before emitting goldens
    rt_shape, rt_records = ex.read_mdnn(mdnn_path)
    if rt_shape != tuple(shape) or len(rt_records) != len(records) or any(
        a != b for a, b in zip(rt_records, records)
    ):
        raise RuntimeError(f"{mdnn_path}: round-trip verification failed; goldens not written")

    inputs = golden_inputs(shape, sample_images)
    logits = np.asarray(
        model.predict(inputs.reshape(-1, *shape).astype("float32"), verbose=0),
        dtype=float,
    )
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    goldens_path = out_dir / "goldens.json"
    goldens_path.write_text(json.dumps({
        "input_shape": list(shape),
        "inputs": inputs.tolist(),
        "logits": logits.tolist(),
        "probs": probs.tolist(),
        "labels": ["all-zero", "all-one", "sample-0", "sample-1", "sample-2"],
        "metadata": metadata,
    }, indent=2, sort_keys=True) + "\n")

    hist_paths = export_histograms(out_dir, hist_images, hist_labels, levels)

    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps({
        "scale": run.scale,
        "accuracy": accuracy,
        "mdnn": mdnn_path.name,
        "goldens": goldens_path.name,
        "histograms": [p.name for p in hist_paths],
        "seed": run.seed,
    }, indent=2, sort_keys=True) + "\n")

    return {
        "mdnn": mdnn_path,
        "goldens": goldens_path,
        "histograms": hist_paths,
        "report": report_path,
        "accuracy": accuracy,
    }
