"""Binary containers for network weights (MDNN) and per-pixel histogram
fixtures (MDHS).

Both formats are little-endian and fully self-describing:

``MDNN``: magic ``b"MDNN"``, version u32, input shape (H, W, C) u32x3,
layer count u32, then per layer a type tag u32 followed by that type's
shape ints, hyperparameters, and row-major float32 weights/biases:

* 1 conv:    kh, kw, cin, cout, stride u32; padding u32 (0=valid);
  activation u32 (0=identity, 1=relu); weights kh*kw*cin*cout; bias cout
* 2 maxpool: ph, pw u32
* 3 flatten: no payload
* 4 dense:   n_in, n_out u32; activation u32; weights n_in*n_out; bias n_out
* 5 dropout: rate f32

A JSON sidecar (``<path>.json``) mirrors the shapes for human inspection;
the loader never requires it.

``MDHS``: magic ``b"MDHS"``, version u32, class id i32 (-1 = pooled over
all classes), pixel count u32, then per pixel: bin count u32, bin edges
float64 (count+1), probabilities float64 (count).
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..inputs import Histogram
from .network import Conv2D, Dense, Dropout, Flatten, MaxPool, NetworkSpec, ShapeError

__all__ = [
    "FormatError",
    "BadMagicError",
    "VersionError",
    "TruncatedFileError",
    "save_network",
    "load_network",
    "save_histograms",
    "load_histograms",
    "MDNN_VERSION",
    "MDHS_VERSION",
]

MDNN_MAGIC = b"MDNN"
MDHS_MAGIC = b"MDHS"
MDNN_VERSION = 1
MDHS_VERSION = 1

_ACT_TAGS = {"identity": 0, "relu": 1}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}
_PAD_TAGS = {"valid": 0}
_PAD_NAMES = {v: k for k, v in _PAD_TAGS.items()}


class FormatError(ValueError):
    """Base class for container format problems."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"{self.what}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self.take(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self.take(4))[0]

    def f32_array(self, n: int, shape) -> np.ndarray:
        raw = self.take(4 * n)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()

    def f64_array(self, n: int) -> np.ndarray:
        raw = self.take(8 * n)
        return np.frombuffer(raw, dtype="<f8").copy()

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{self.what}: {len(self.data) - self.pos} trailing bytes")


# ---------------------------------------------------------------------------
# MDNN
# ---------------------------------------------------------------------------

def save_network(net: NetworkSpec, path, metadata: dict | None = None) -> None:
    """Write the network and a JSON sidecar mirroring its shapes."""
    path = Path(path)
    parts = [MDNN_MAGIC, struct.pack("<I", MDNN_VERSION)]
    parts.append(struct.pack("<III", *net.input_shape))
    parts.append(struct.pack("<I", len(net.layers)))
    side_layers = []
    for layer in net.layers:
        if isinstance(layer, Conv2D):
            kh, kw, cin, cout = layer.weights.shape
            parts.append(struct.pack("<I", 1))
            parts.append(struct.pack(
                "<IIIIIII", kh, kw, cin, cout, layer.stride,
                _PAD_TAGS[layer.padding], _ACT_TAGS[layer.activation],
            ))
            parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
            side_layers.append({
                "type": "conv", "kernel": [kh, kw, cin, cout],
                "stride": layer.stride, "padding": layer.padding,
                "activation": layer.activation,
            })
        elif isinstance(layer, MaxPool):
            parts.append(struct.pack("<I", 2))
            parts.append(struct.pack("<II", *layer.window))
            side_layers.append({"type": "maxpool", "window": list(layer.window)})
        elif isinstance(layer, Flatten):
            parts.append(struct.pack("<I", 3))
            side_layers.append({"type": "flatten"})
        elif isinstance(layer, Dense):
            n_in, n_out = layer.weights.shape
            parts.append(struct.pack("<I", 4))
            parts.append(struct.pack("<III", n_in, n_out, _ACT_TAGS[layer.activation]))
            parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
            side_layers.append({
                "type": "dense", "shape": [n_in, n_out], "activation": layer.activation,
            })
        elif isinstance(layer, Dropout):
            parts.append(struct.pack("<I", 5))
            parts.append(struct.pack("<f", layer.rate))
            side_layers.append({"type": "dropout", "rate": layer.rate})
        else:
            raise FormatError(f"cannot serialize layer {type(layer).__name__}")
    path.write_bytes(b"".join(parts))
    sidecar = {
        "format": "MDNN",
        "version": MDNN_VERSION,
        "input_shape": list(net.input_shape),
        "layers": side_layers,
        "metadata": {**net.metadata, **(metadata or {})},
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_network(path) -> NetworkSpec:
    """Load and validate an MDNN file (bit-exact float32 weights)."""
    path = Path(path)
    r = _Reader(path.read_bytes(), str(path))
    if r.take(4) != MDNN_MAGIC:
        raise BadMagicError(f"{path}: not an MDNN file")
    version = r.u32()
    if version != MDNN_VERSION:
        raise VersionError(f"{path}: MDNN version {version}, expected {MDNN_VERSION}")
    input_shape = (r.u32(), r.u32(), r.u32())
    n_layers = r.u32()
    layers = []
    for _ in range(n_layers):
        tag = r.u32()
        if tag == 1:
            kh, kw, cin, cout, stride, pad, act = (r.u32() for _ in range(7))
            if pad not in _PAD_NAMES or act not in _ACT_NAMES:
                raise FormatError(f"{path}: bad conv hyperparameter tags ({pad}, {act})")
            w = r.f32_array(kh * kw * cin * cout, (kh, kw, cin, cout))
            b = r.f32_array(cout, (cout,))
            layers.append(Conv2D(w, b, stride=stride, padding=_PAD_NAMES[pad],
                                 activation=_ACT_NAMES[act]))
        elif tag == 2:
            layers.append(MaxPool((r.u32(), r.u32())))
        elif tag == 3:
            layers.append(Flatten())
        elif tag == 4:
            n_in, n_out, act = r.u32(), r.u32(), r.u32()
            if act not in _ACT_NAMES:
                raise FormatError(f"{path}: bad dense activation tag {act}")
            w = r.f32_array(n_in * n_out, (n_in, n_out))
            b = r.f32_array(n_out, (n_out,))
            layers.append(Dense(w, b, activation=_ACT_NAMES[act]))
        elif tag == 5:
            layers.append(Dropout(r.f32()))
        else:
            raise FormatError(f"{path}: unknown layer tag {tag}")
    r.done()
    metadata = {}
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        try:
            metadata = json.loads(sidecar.read_text()).get("metadata", {})
        except (OSError, json.JSONDecodeError):
            metadata = {}
    try:
        return NetworkSpec(input_shape, layers, metadata=metadata)
    except ShapeError as exc:
        raise ShapeError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# MDHS
# ---------------------------------------------------------------------------

def save_histograms(path, class_id: int, histograms: list[Histogram]) -> None:
    """Write one class's per-pixel histograms (class id -1 = pooled)."""
    parts = [MDHS_MAGIC, struct.pack("<I", MDHS_VERSION)]
    parts.append(struct.pack("<i", class_id))
    parts.append(struct.pack("<I", len(histograms)))
    for h in histograms:
        parts.append(struct.pack("<I", h.probs.size))
        parts.append(np.ascontiguousarray(h.edges, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(h.probs, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_histograms(path, mode: str = "smooth") -> tuple[int, list[Histogram]]:
    """Read an MDHS file; returns (class id, per-pixel histograms)."""
    path = Path(path)
    r = _Reader(path.read_bytes(), str(path))
    if r.take(4) != MDHS_MAGIC:
        raise BadMagicError(f"{path}: not an MDHS file")
    version = r.u32()
    if version != MDHS_VERSION:
        raise VersionError(f"{path}: MDHS version {version}, expected {MDHS_VERSION}")
    class_id = r.i32()
    n_pixels = r.u32()
    out = []
    for _ in range(n_pixels):
        bins = r.u32()
        edges = r.f64_array(bins + 1)
        probs = r.f64_array(bins)
        out.append(Histogram(edges, probs, mode=mode))
    r.done()
    return class_id, out
