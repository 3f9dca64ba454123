"""Byte-stable serialization: CSV, JSON, and 16-bit PGM maps.

Floats are written with ``repr`` (shortest round-trip form) and rows in a
fixed order, so identical inputs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["write_json", "write_csv", "write_pgm16", "format_value", "ESTIMATE_FIELDS"]

ESTIMATE_FIELDS = [
    "strategy", "N", "R", "d", "delta_hat", "sigma2_hat", "nu_hat",
    "tau_total", "n_evals", "seed", "replicate", "se_delta", "degenerate",
    "sigma2_source", "order",
]


def format_value(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "|".join(format_value(v) for v in value)
    if value is None:
        return ""
    return str(value)


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def default(obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        raise TypeError(f"not JSON serializable: {type(obj)}")

    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=default,
                               allow_nan=True) + "\n")
    return path


def write_csv(path, fieldnames, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_value(row.get(name)) for name in fieldnames])
    return path


def write_pgm16(path, values: np.ndarray) -> Path:
    """Write a max-normalized 16-bit binary PGM (P5).

    Gray runs from black at 0 to white at the map maximum; non-positive
    maps render as all black.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("PGM maps must be 2-D")
    clipped = np.clip(values, 0.0, None)
    vmax = float(clipped.max())
    scaled = np.zeros_like(clipped) if vmax <= 0 else clipped / vmax
    pixels = np.rint(scaled * 65535).astype(">u2")
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n65535\n".encode("ascii")
    path.write_bytes(header + pixels.tobytes())
    return path
