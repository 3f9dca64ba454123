"""Product input models and the single-coordinate point operations.

An :class:`InputModel` is a product measure over ``d`` independent
coordinates, each described by a :class:`CoordinateDistribution`.  The two
point primitives every estimator is built from live here as well:
:func:`hybrid` (replace one coordinate of ``x`` by the matching coordinate
of ``z``) and :func:`winding_index` (the replacement-step index ``r(i, j) =
d*floor((i-j)/d) + j`` that says which update supplied coordinate ``j`` of
the ``i``-th point of a one-at-a-time update chain).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rng import RandomStream

__all__ = [
    "CoordinateDistribution",
    "Uniform01",
    "Bernoulli01",
    "StdGaussian",
    "Histogram",
    "FiniteSupport",
    "InputModel",
    "sample_point",
    "hybrid",
    "winding_index",
    "coordinate_from_dict",
]

_PROB_TOL = 1e-12


def _check_probs(probs: np.ndarray, what: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError(f"{what}: probabilities must be a non-empty 1-D sequence")
    if np.any(probs < 0):
        raise ValueError(f"{what}: probabilities must be non-negative")
    if abs(float(probs.sum()) - 1.0) > _PROB_TOL:
        raise ValueError(f"{what}: probabilities must sum to 1 within {_PROB_TOL}")
    return probs


class CoordinateDistribution:
    """Base class for one coordinate's distribution."""

    kind: str = "abstract"

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Uniform01(CoordinateDistribution):
    kind: str = field(default="uniform01", init=False)

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        return stream.generator.random(n)


@dataclass(frozen=True)
class Bernoulli01(CoordinateDistribution):
    """Fair coin on {0, 1}."""

    kind: str = field(default="bernoulli01", init=False)

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        return stream.generator.integers(0, 2, size=n).astype(float)


@dataclass(frozen=True)
class StdGaussian(CoordinateDistribution):
    kind: str = field(default="gaussian", init=False)

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        return stream.generator.standard_normal(n)


class Histogram(CoordinateDistribution):
    """Piecewise distribution over bins with strictly increasing edges.

    ``mode="smooth"`` draws by inverse CDF with uniform interpolation inside
    the selected bin (a continuous density that is constant per bin);
    ``mode="atoms"`` returns the bin centers exactly, i.e. resamples the
    discrete values the histogram was built from.  The mode is part of the
    descriptor so downstream records carry it.
    """

    kind = "histogram"

    def __init__(self, edges: Sequence[float], probs: Sequence[float], mode: str = "smooth"):
        edges_arr = np.asarray(edges, dtype=float)
        if edges_arr.ndim != 1 or edges_arr.size < 2:
            raise ValueError("histogram: need at least two bin edges")
        if not np.all(np.diff(edges_arr) > 0):
            raise ValueError("histogram: bin edges must be strictly increasing")
        probs_arr = _check_probs(probs, "histogram")
        if probs_arr.size != edges_arr.size - 1:
            raise ValueError("histogram: need one probability per bin")
        if mode not in ("smooth", "atoms"):
            raise ValueError(f"histogram: unknown mode {mode!r}")
        self.edges = edges_arr
        self.probs = probs_arr
        self.mode = mode
        self._cdf = np.concatenate([[0.0], np.cumsum(probs_arr)])
        self._cdf[-1] = 1.0

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        u = stream.generator.random(n)
        idx = np.searchsorted(self._cdf, u, side="right") - 1
        np.clip(idx, 0, self.probs.size - 1, out=idx)
        if self.mode == "atoms":
            centers = 0.5 * (self.edges[:-1] + self.edges[1:])
            return centers[idx]
        lo = self._cdf[idx]
        width = self.probs[idx]
        frac = np.where(width > 0, (u - lo) / np.where(width > 0, width, 1.0), 0.0)
        return self.edges[idx] + frac * (self.edges[idx + 1] - self.edges[idx])

    def mean(self) -> float:
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        return float(centers @ self.probs)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "edges": self.edges.tolist(),
            "probs": self.probs.tolist(),
            "mode": self.mode,
        }


class FiniteSupport(CoordinateDistribution):
    """Atoms at ``values`` with the given probabilities."""

    kind = "finite"

    def __init__(self, values: Sequence[float], probs: Sequence[float]):
        values_arr = np.asarray(values, dtype=float)
        probs_arr = _check_probs(probs, "finite support")
        if values_arr.ndim != 1 or values_arr.size != probs_arr.size:
            raise ValueError("finite support: values and probabilities must match")
        self.values = values_arr
        self.probs = probs_arr
        self._cdf = np.concatenate([[0.0], np.cumsum(probs_arr)])
        self._cdf[-1] = 1.0

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        u = stream.generator.random(n)
        idx = np.searchsorted(self._cdf, u, side="right") - 1
        np.clip(idx, 0, self.probs.size - 1, out=idx)
        return self.values[idx]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": self.values.tolist(), "probs": self.probs.tolist()}


_KINDS = {
    "uniform01": lambda d: Uniform01(),
    "bernoulli01": lambda d: Bernoulli01(),
    "gaussian": lambda d: StdGaussian(),
    "histogram": lambda d: Histogram(d["edges"], d["probs"], d.get("mode", "smooth")),
    "finite": lambda d: FiniteSupport(d["values"], d["probs"]),
}


def coordinate_from_dict(desc: dict) -> CoordinateDistribution:
    try:
        factory = _KINDS[desc["kind"]]
    except KeyError as exc:
        raise ValueError(f"unknown coordinate kind {desc.get('kind')!r}") from exc
    return factory(desc)


class InputModel:
    """Product distribution over ``dims`` independent coordinates."""

    def __init__(self, coords: Sequence[CoordinateDistribution]):
        coords = list(coords)
        if len(coords) < 1:
            raise ValueError("input model needs at least one coordinate")
        self.coords = coords
        self.dims = len(coords)

    @classmethod
    def iid(cls, dist: CoordinateDistribution, dims: int) -> "InputModel":
        return cls([dist] * dims)

    def sample(self, n: int, stream: RandomStream) -> np.ndarray:
        """Draw ``n`` points, shape ``(n, dims)``, consuming the stream
        coordinate by coordinate in ascending order."""
        out = np.empty((n, self.dims))
        for j, coord in enumerate(self.coords):
            out[:, j] = coord.sample(n, stream)
        return out

    def sample_coord(self, j: int, n: int, stream: RandomStream) -> np.ndarray:
        return self.coords[j].sample(n, stream)

    def to_dict(self) -> dict:
        return {"d": self.dims, "coords": [c.to_dict() for c in self.coords]}

    @classmethod
    def from_dict(cls, desc: dict) -> "InputModel":
        coords = [coordinate_from_dict(c) for c in desc["coords"]]
        model = cls(coords)
        if "d" in desc and int(desc["d"]) != model.dims:
            raise ValueError(f"descriptor d={desc['d']} but {model.dims} coordinates given")
        return model

    @classmethod
    def from_json(cls, path) -> "InputModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def sample_point(model: InputModel, stream: RandomStream) -> np.ndarray:
    """Draw one point from the model, advancing the stream."""
    return model.sample(1, stream)[0]


def hybrid(x: np.ndarray, z: np.ndarray, j: int) -> np.ndarray:
    """Return a copy of ``x`` with coordinate ``j`` (0-based) taken from ``z``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError("hybrid: points must have the same length")
    if not 0 <= j < x.shape[-1]:
        raise IndexError(f"hybrid: coordinate {j} out of range for d={x.shape[-1]}")
    out = x.copy()
    out[..., j] = z[..., j]
    return out


def winding_index(i: int, j: int, d: int) -> int:
    """Replacement step that supplied coordinate ``j`` of chain point ``i``.

    Coordinates use the 1-based convention ``1 <= j <= d`` so that the
    identity ``r(i, j) = d*floor((i-j)/d) + j`` holds literally; the chain is
    initialized as x_0 = (z_{-(d-1)}, ..., z_0), making the formula valid for
    every ``i >= 0`` with no burn-in.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 1 <= j <= d:
        raise IndexError(f"variable index {j} out of range 1..{d}")
    if i < 0:
        raise ValueError("step index must be >= 0")
    return d * ((i - j) // d) + j
