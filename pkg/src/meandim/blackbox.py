"""Black-box function wrapper with batch evaluation and finiteness checks."""
from __future__ import annotations

import threading
from typing import Callable

import numpy as np

__all__ = ["BlackBox", "EvaluationError"]


class EvaluationError(RuntimeError):
    """A function returned a non-finite value.

    Carries the offending input point (and, when raised inside a replicated
    run, the replicate index) so failures are reproducible.
    """

    def __init__(self, message: str, point: np.ndarray | None = None, replicate: int | None = None):
        super().__init__(message)
        self.point = None if point is None else np.array(point, copy=True)
        self.replicate = replicate


class BlackBox:
    """Deterministic map from points to reals, evaluated in batches.

    ``func`` receives an ``(n, dims)`` array and must return ``n`` values.
    Evaluation must be pure; outputs are checked for finiteness and an
    :class:`EvaluationError` naming the first offending point is raised
    otherwise.  Set ``thread_safe=False`` for callables that cannot run
    concurrently; evaluations are then serialized behind a lock.
    """

    def __init__(
        self,
        dims: int,
        func: Callable[[np.ndarray], np.ndarray],
        name: str = "blackbox",
        thread_safe: bool = True,
    ):
        if dims < 1:
            raise ValueError("dims must be >= 1")
        self.dims = int(dims)
        self.func = func
        self.name = name
        self.thread_safe = bool(thread_safe)
        self._lock = None if thread_safe else threading.Lock()

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dims:
            raise ValueError(f"{self.name}: expected {self.dims} coordinates, got {points.shape[1]}")
        if self._lock is not None:
            with self._lock:
                values = np.asarray(self.func(points), dtype=float)
        else:
            values = np.asarray(self.func(points), dtype=float)
        values = values.reshape(points.shape[0])
        bad = ~np.isfinite(values)
        if bad.any():
            k = int(np.argmax(bad))
            raise EvaluationError(
                f"{self.name}: non-finite value {values[k]!r} at point index {k}",
                point=points[k],
            )
        return values

    def evaluate_one(self, point: np.ndarray) -> float:
        return float(self(np.asarray(point, dtype=float)[None, :])[0])
