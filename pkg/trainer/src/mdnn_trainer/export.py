"""Self-contained writers (and verification readers) for the MDNN weight
container and MDHS histogram fixtures.

The layouts match the evaluator side byte for byte; this module keeps its
own implementation so the trainer couples to the *formats*, not to the
evaluator package.  See the evaluator's format documentation for the field
lists.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MDNN_MAGIC = b"MDNN"
MDHS_MAGIC = b"MDHS"
MDNN_VERSION = 1
MDHS_VERSION = 1

ACT_TAGS = {"identity": 0, "relu": 1}
PAD_TAGS = {"valid": 0}


class LayerRecord:
    """One exported layer: type name plus its arrays/hyperparameters."""

    def __init__(self, kind: str, **fields):
        self.kind = kind
        self.fields = fields

    def __eq__(self, other):
        if not isinstance(other, LayerRecord) or self.kind != other.kind:
            return False
        for key, val in self.fields.items():
            oval = other.fields.get(key)
            if isinstance(val, np.ndarray):
                if not (isinstance(oval, np.ndarray) and val.shape == oval.shape
                        and np.array_equal(val, oval)):
                    return False
            elif isinstance(val, float):
                if not np.float32(val) == np.float32(oval):
                    return False
            elif val != oval:
                return False
        return True


def conv_record(weights, bias, stride=1, padding="valid", activation="identity"):
    w = np.asarray(weights, dtype=np.float32)
    if w.ndim != 4:
        raise ValueError("conv weights must be (kh, kw, cin, cout)")
    return LayerRecord("conv", weights=w, bias=np.asarray(bias, dtype=np.float32),
                       stride=int(stride), padding=padding, activation=activation)


def pool_record(window=(2, 2)):
    return LayerRecord("maxpool", window=(int(window[0]), int(window[1])))


def flatten_record():
    return LayerRecord("flatten")


def dense_record(weights, bias, activation="identity"):
    w = np.asarray(weights, dtype=np.float32)
    if w.ndim != 2:
        raise ValueError("dense weights must be (n_in, n_out)")
    return LayerRecord("dense", weights=w, bias=np.asarray(bias, dtype=np.float32),
                       activation=activation)


def dropout_record(rate):
    return LayerRecord("dropout", rate=float(rate))


def write_mdnn(path, input_shape, layers: list[LayerRecord], metadata=None) -> None:
    parts = [MDNN_MAGIC, struct.pack("<I", MDNN_VERSION)]
    parts.append(struct.pack("<III", *input_shape))
    parts.append(struct.pack("<I", len(layers)))
    side = []
    for rec in layers:
        f = rec.fields
        if rec.kind == "conv":
            kh, kw, cin, cout = f["weights"].shape
            parts.append(struct.pack("<I", 1))
            parts.append(struct.pack("<IIIIIII", kh, kw, cin, cout, f["stride"],
                                     PAD_TAGS[f["padding"]], ACT_TAGS[f["activation"]]))
            parts.append(np.ascontiguousarray(f["weights"], dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(f["bias"], dtype="<f4").tobytes())
            side.append({"type": "conv", "kernel": [kh, kw, cin, cout],
                         "stride": f["stride"], "padding": f["padding"],
                         "activation": f["activation"]})
        elif rec.kind == "maxpool":
            parts.append(struct.pack("<I", 2))
            parts.append(struct.pack("<II", *f["window"]))
            side.append({"type": "maxpool", "window": list(f["window"])})
        elif rec.kind == "flatten":
            parts.append(struct.pack("<I", 3))
            side.append({"type": "flatten"})
        elif rec.kind == "dense":
            n_in, n_out = f["weights"].shape
            parts.append(struct.pack("<I", 4))
            parts.append(struct.pack("<III", n_in, n_out, ACT_TAGS[f["activation"]]))
            parts.append(np.ascontiguousarray(f["weights"], dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(f["bias"], dtype="<f4").tobytes())
            side.append({"type": "dense", "shape": [n_in, n_out],
                         "activation": f["activation"]})
        elif rec.kind == "dropout":
            parts.append(struct.pack("<I", 5))
            parts.append(struct.pack("<f", f["rate"]))
            side.append({"type": "dropout", "rate": f["rate"]})
        else:
            raise ValueError(f"unknown layer kind {rec.kind}")
    Path(path).write_bytes(b"".join(parts))
    sidecar = {"format": "MDNN", "version": MDNN_VERSION,
               "input_shape": list(input_shape), "layers": side,
               "metadata": metadata or {}}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_mdnn(path) -> tuple[tuple[int, int, int], list[LayerRecord]]:
    """Parse an MDNN file back into layer records (for round-trip checks)."""
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise ValueError(f"{path}: truncated at offset {pos}")
        out = data[pos:pos + n]
        pos += n
        return out

    def u32():
        return struct.unpack("<I", take(4))[0]

    if take(4) != MDNN_MAGIC:
        raise ValueError(f"{path}: bad magic")
    if u32() != MDNN_VERSION:
        raise ValueError(f"{path}: bad version")
    shape = (u32(), u32(), u32())
    act_names = {v: k for k, v in ACT_TAGS.items()}
    pad_names = {v: k for k, v in PAD_TAGS.items()}
    layers = []
    for _ in range(u32()):
        tag = u32()
        if tag == 1:
            kh, kw, cin, cout, stride, pad, act = (u32() for _ in range(7))
            w = np.frombuffer(take(4 * kh * kw * cin * cout), "<f4").reshape(kh, kw, cin, cout)
            b = np.frombuffer(take(4 * cout), "<f4")
            layers.append(conv_record(w, b, stride, pad_names[pad], act_names[act]))
        elif tag == 2:
            layers.append(pool_record((u32(), u32())))
        elif tag == 3:
            layers.append(flatten_record())
        elif tag == 4:
            n_in, n_out, act = u32(), u32(), u32()
            w = np.frombuffer(take(4 * n_in * n_out), "<f4").reshape(n_in, n_out)
            b = np.frombuffer(take(4 * n_out), "<f4")
            layers.append(dense_record(w, b, act_names[act]))
        elif tag == 5:
            layers.append(dropout_record(struct.unpack("<f", take(4))[0]))
        else:
            raise ValueError(f"{path}: unknown layer tag {tag}")
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes")
    return shape, layers


def write_mdhs(path, class_id: int, edges: np.ndarray, probs: np.ndarray) -> None:
    """Write per-pixel histograms sharing one edge grid.

    ``probs`` has shape (pixels, bins); ``edges`` has bins+1 entries.
    """
    probs = np.asarray(probs, dtype=float)
    edges = np.asarray(edges, dtype=float)
    parts = [MDHS_MAGIC, struct.pack("<I", MDHS_VERSION), struct.pack("<i", class_id)]
    parts.append(struct.pack("<I", probs.shape[0]))
    edge_bytes = np.ascontiguousarray(edges, dtype="<f8").tobytes()
    bins = struct.pack("<I", probs.shape[1])
    for row in probs:
        parts.append(bins)
        parts.append(edge_bytes)
        parts.append(np.ascontiguousarray(row, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))
