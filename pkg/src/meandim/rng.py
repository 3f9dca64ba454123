"""Deterministic, splittable random streams.

Every source of randomness in this package flows through a
:class:`RandomStream`, which wraps numpy's counter-based Philox generator
keyed by ``(seed, stream id, *path)``.  Two streams built from the same key
produce bit-identical draw sequences on every platform and thread count;
streams with different keys are statistically independent.  Workers never
share a stream: parents :meth:`~RandomStream.split` children and hand them
off, so parallel schedules cannot change the numbers drawn.
"""
from __future__ import annotations

import numpy as np

__all__ = ["RandomStream"]


class RandomStream:
    """A seeded, splittable random stream.

    Parameters
    ----------
    seed:
        Base seed (any non-negative int; 64-bit values are typical).
    stream:
        Stream id distinguishing top-level independent streams under the
        same seed.
    path:
        Optional tuple of sub-ids (e.g. ``(replicate, variable, role)``)
        produced by :meth:`split`.
    """

    __slots__ = ("seed", "stream", "path", "generator")

    def __init__(self, seed: int, stream: int = 0, path: tuple[int, ...] = ()):
        if seed < 0 or stream < 0 or any(p < 0 for p in path):
            raise ValueError("seed, stream id and path entries must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, *self.path))
        key = ss.generate_state(2, np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def split(self, *ids: int) -> "RandomStream":
        """Return an independent child stream addressed by ``ids``.

        Splitting is a pure function of the key: it does not consume or
        disturb this stream's state, so split order never matters.
        """
        return RandomStream(self.seed, self.stream, self.path + tuple(ids))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomStream(seed={self.seed}, stream={self.stream}, path={self.path})"
