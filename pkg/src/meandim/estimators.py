"""Monte Carlo estimators of the total-index sum and mean dimension.

Four sampling strategies produce paired evaluations differing in one
coordinate, feeding the squared-difference (Jansen) estimator
``tau2_j = (1/2N) sum_i (f(x_i) - f(x_i with coord j replaced))^2``:

* ``naive``              - fresh base and replacement points per variable;
  ``2*N*d`` evaluations, zero covariance between variables.
* ``radial``             - one base point per ``i`` reused against all ``d``
  single-coordinate changes; ``N*(d+1)`` evaluations.
* ``winding-full``       - a single one-at-a-time update chain cycling
  through the coordinates; ``N*d + 1`` evaluations.
* ``winding-truncated``  - ``N`` independent chains of ``d+1`` points;
  ``N*(d+1)`` evaluations.

All accumulation is order-fixed (per-chunk partial sums combined with
``math.fsum``), so results are bit-identical across runs and thread counts
for a given seed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .blackbox import BlackBox, EvaluationError
from .inputs import InputModel
from .rng import RandomStream

__all__ = [
    "Strategy",
    "DeltaEstimate",
    "ReplicateResult",
    "WindingState",
    "walk_winding_chain",
    "estimate_total_index_pairs",
    "estimate_lower_index",
    "estimate_sigma2",
    "estimate_delta",
    "replicate_variance",
]


class Strategy(str, Enum):
    NAIVE = "naive"
    RADIAL = "radial"
    WINDING_FULL = "winding-full"
    WINDING_TRUNCATED = "winding-truncated"

    def evaluation_count(self, N: int, d: int) -> int:
        if self is Strategy.NAIVE:
            return 2 * N * d
        if self is Strategy.WINDING_FULL:
            return N * d + 1
        return N * (d + 1)


# stream roles: (replicate, variable, role) keys every draw
_ROLE_X = 0
_ROLE_Z = 1
_ROLE_INIT = 2

_CHUNK_CELLS = 1 << 21  # floats per sampled chunk, bounds peak memory
_EVAL_BUDGET = 1 << 40


def _rows_per_chunk(d: int) -> int:
    return max(1, _CHUNK_CELLS // max(d, 1))


class _Moments:
    """Streaming mean/variance with deterministic pairwise combination."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values: np.ndarray) -> None:
        m = values.size
        if m == 0:
            return
        vm = float(values.mean())
        vm2 = float(np.sum((values - vm) ** 2))
        n = self.n + m
        delta = vm - self.mean
        self.mean += delta * m / n
        self.m2 += vm2 + delta * delta * self.n * m / n
        self.n = n

    def variance(self) -> float:
        if self.n < 2:
            return 0.0
        return self.m2 / (self.n - 1)

    def mean_square(self) -> float:
        return self.mean ** 2 + (self.m2 / self.n if self.n else 0.0)


@dataclass
class DeltaEstimate:
    """One estimate of the total-index sum and mean dimension.

    ``delta_hat`` is exactly ``math.fsum(tau_total)``; ``nu_hat`` is NaN
    with ``degenerate=True`` when the variance estimate sits below the
    degeneracy floor (so pathological ratios are flagged, never reported
    as plausible numbers).
    """

    strategy: Strategy
    N: int
    dims: int
    seed: int
    replicate: int
    tau_total: np.ndarray
    delta_hat: float
    sigma2_hat: float
    sigma2_source: str
    nu_hat: float
    degenerate: bool
    n_evals: int
    se_delta: float
    order: tuple[int, ...] | None = None

    def to_record(self, R: int | None = None) -> dict:
        return {
            "strategy": self.strategy.value,
            "N": self.N,
            "R": R,
            "d": self.dims,
            "delta_hat": self.delta_hat,
            "sigma2_hat": self.sigma2_hat,
            "nu_hat": self.nu_hat,
            "tau_total": [float(t) for t in self.tau_total],
            "n_evals": self.n_evals,
            "seed": self.seed,
            "replicate": self.replicate,
            "se_delta": self.se_delta,
            "degenerate": self.degenerate,
            "sigma2_source": self.sigma2_source,
            "order": list(self.order) if self.order is not None else None,
        }


@dataclass
class ReplicateResult:
    """Replicated estimates used to measure estimator variance."""

    strategy: Strategy
    N: int
    R: int
    seed: int
    deltas: np.ndarray
    sigma2s: np.ndarray
    nus: np.ndarray
    taus: np.ndarray  # (R, d)
    estimates: list[DeltaEstimate] = field(repr=False, default_factory=list)

    @property
    def mean_delta(self) -> float:
        return float(self.deltas.mean())

    @property
    def var_delta(self) -> float:
        return float(self.deltas.var(ddof=1))

    @property
    def se_var_delta(self) -> float:
        """Standard error of the variance estimate (plug-in)."""
        centered = (self.deltas - self.deltas.mean()) ** 2
        return float(centered.std() / math.sqrt(self.R))

    @property
    def se_mean_delta(self) -> float:
        return float(self.deltas.std(ddof=1) / math.sqrt(self.R))


@dataclass
class WindingState:
    """One step of the coordinate-cycling update chain.

    The update position cycles deterministically: step ``i`` (1-based)
    replaces the coordinate at cycle position ``1 + (i-1) mod d``.
    """

    step: int
    update_coord: int      # 0-based coordinate replaced at this step
    point: np.ndarray      # chain point after the update
    difference: float      # f(x_i) - f(x_{i-1})


def walk_winding_chain(
    f: BlackBox,
    model: InputModel,
    N: int,
    seed: int,
    *,
    replicate: int = 0,
    order: Sequence[int] | None = None,
):
    """Reference walk of the full update chain, one state per step.

    Draws the same per-coordinate replacement streams as
    :func:`estimate_delta` with the full-chain strategy, so the visited
    points and differences match the vectorized implementation; useful for
    cross-checking and for inspecting chains step by step.
    """
    _check_common(f, model, N)
    d = model.dims
    perm = _check_order(order, d)
    root = RandomStream(seed).split(replicate)
    ztab = np.empty((d, N + 1))
    for p in range(d):
        ztab[p] = model.sample_coord(perm[p], N + 1, root.split(perm[p], _ROLE_Z))
    x = np.empty(d)
    x[perm] = ztab[:, 0]
    fprev = f(x[None, :])[0]
    for i in range(1, N * d + 1):
        pos = (i - 1) % d
        j = perm[pos]
        x[j] = ztab[pos, (i - 1) // d + 1]
        fcur = f(x[None, :])[0]
        yield WindingState(step=i, update_coord=j, point=x.copy(),
                           difference=fcur - fprev)
        fprev = fcur


def _check_common(f: BlackBox, model: InputModel, N: int) -> None:
    if f.dims != model.dims:
        raise ValueError(f"function has {f.dims} inputs but model has {model.dims}")
    if N < 1:
        raise ValueError("N must be >= 1")
    if N * model.dims > _EVAL_BUDGET:
        raise ValueError(f"N*d = {N * model.dims} exceeds the evaluation budget {_EVAL_BUDGET}")


def _check_order(order: Sequence[int] | None, d: int) -> list[int]:
    if order is None:
        return list(range(d))
    order = [int(j) for j in order]
    if sorted(order) != list(range(d)):
        raise ValueError("order must be a permutation of 0..d-1")
    return order


def estimate_total_index_pairs(
    f: BlackBox, model: InputModel, j: int, N: int, stream: RandomStream,
) -> float:
    """Squared-difference estimate of the total index of coordinate ``j``
    from ``N`` fresh base/replacement pairs (2N evaluations)."""
    _check_common(f, model, N)
    if not 0 <= j < model.dims:
        raise IndexError(f"coordinate {j} out of range")
    sx, sz = stream.split(j, _ROLE_X), stream.split(j, _ROLE_Z)
    rows = _rows_per_chunk(model.dims)
    parts = []
    for a in range(0, N, rows):
        m = min(N, a + rows) - a
        x = model.sample(m, sx)
        fx = f(x)
        x[:, j] = model.sample_coord(j, m, sz)
        parts.append(float(np.sum((fx - f(x)) ** 2)))
    return math.fsum(parts) / (2 * N)


def estimate_lower_index(
    f: BlackBox, model: InputModel, j: int, N: int, stream: RandomStream,
) -> float:
    """Correlation-form estimate of the lower (closed) index of ``j``:
    ``(1/N) sum_i f(x_i) * (f(z_i with coord j from x_i) - f(z_i))``.

    Unbiased but not a sum of squares, so sampling noise can push it
    slightly negative.  Uses 3N evaluations.
    """
    _check_common(f, model, N)
    if not 0 <= j < model.dims:
        raise IndexError(f"coordinate {j} out of range")
    sx, sz = stream.split(j, _ROLE_X), stream.split(j, _ROLE_Z)
    rows = _rows_per_chunk(model.dims)
    parts = []
    for a in range(0, N, rows):
        m = min(N, a + rows) - a
        x = model.sample(m, sx)
        z = model.sample(m, sz)
        fx = f(x)
        fz = f(z)
        z[:, j] = x[:, j]
        parts.append(float(np.sum(fx * (f(z) - fz))))
    return math.fsum(parts) / N


def estimate_sigma2(f: BlackBox, model: InputModel, N: int, stream: RandomStream) -> float:
    """Unbiased sample variance of ``f`` over ``N`` iid draws."""
    _check_common(f, model, N)
    if N < 2:
        raise ValueError("N must be >= 2 for a variance estimate")
    rows = _rows_per_chunk(model.dims)
    mom = _Moments()
    for a in range(0, N, rows):
        m = min(N, a + rows) - a
        mom.add(f(model.sample(m, stream)))
    return mom.variance()


def estimate_delta(
    f: BlackBox,
    model: InputModel,
    strategy: Strategy | str,
    N: int,
    seed: int,
    *,
    order: Sequence[int] | None = None,
    replicate: int = 0,
    variance_floor: float | None = None,
) -> DeltaEstimate:
    """Estimate ``delta = sum_j tau2_j`` with the chosen sampling strategy.

    The replacement chains restart from a fully stationary state (the
    initial point is treated as the 0-th block of updates), so no burn-in is
    discarded.  ``order`` permutes the coordinate update cycle of the
    winding strategies (position ``p`` updates coordinate ``order[p]``); it
    has no effect on the naive or radial patterns.  ``sigma2_hat`` reuses
    evaluations as noted in ``sigma2_source``: all of them for naive and the
    winding chains, the N base points for radial — every reused point is
    marginally distributed as the input model, so the variance estimate
    stays unbiased.
    """
    strategy = Strategy(strategy)
    _check_common(f, model, N)
    if strategy is Strategy.WINDING_FULL and N < 2:
        raise ValueError("winding-full needs N >= 2 so lag covariances are exercised")
    d = model.dims
    perm = _check_order(order, d)
    root = RandomStream(seed).split(replicate)
    rows = _rows_per_chunk(d)

    tau_parts: list[list[float]] = [[] for _ in range(d)]
    block = np.zeros(N)  # per-index contributions, for the internal SE
    mom = _Moments()

    if strategy is Strategy.NAIVE:
        for j in range(d):
            sx, sz = root.split(j, _ROLE_X), root.split(j, _ROLE_Z)
            for a in range(0, N, rows):
                m = min(N, a + rows) - a
                x = model.sample(m, sx)
                fx = f(x)
                mom.add(fx)
                x[:, j] = model.sample_coord(j, m, sz)
                fy = f(x)
                mom.add(fy)
                dsq = (fx - fy) ** 2
                tau_parts[j].append(float(dsq.sum()))
                block[a:a + m] += 0.5 * dsq
        sigma2_source = "all-evaluations"

    elif strategy is Strategy.RADIAL:
        sx, sz = root.split(0, _ROLE_X), root.split(0, _ROLE_Z)
        for a in range(0, N, rows):
            m = min(N, a + rows) - a
            x = model.sample(m, sx)
            z = model.sample(m, sz)
            fx = f(x)
            mom.add(fx)
            for j in range(d):
                saved = x[:, j].copy()
                x[:, j] = z[:, j]
                dsq = (fx - f(x)) ** 2
                x[:, j] = saved
                tau_parts[j].append(float(dsq.sum()))
                block[a:a + m] += 0.5 * dsq
        sigma2_source = "base-points"

    elif strategy is Strategy.WINDING_TRUNCATED:
        si = root.split(0, _ROLE_INIT)
        zstreams = [root.split(j, _ROLE_Z) for j in range(d)]
        for a in range(0, N, rows):
            m = min(N, a + rows) - a
            cur = model.sample(m, si)
            fcur = f(cur)
            mom.add(fcur)
            for p in range(d):
                j = perm[p]
                cur[:, j] = model.sample_coord(j, m, zstreams[j])
                fnew = f(cur)
                mom.add(fnew)
                dsq = (fnew - fcur) ** 2
                tau_parts[j].append(float(dsq.sum()))
                block[a:a + m] += 0.5 * dsq
                fcur = fnew
        sigma2_source = "all-evaluations"

    else:  # WINDING_FULL
        # one chain of N*d+1 points; point i, cycle position p (1-based)
        # carries the value from update step d*floor((i-p)/d)+p, which is
        # entry floor((i-p)/d)+1 of that position's draw sequence
        ztab = np.empty((d, N + 1))
        for p in range(d):
            j = perm[p]
            ztab[p] = model.sample_coord(j, N + 1, root.split(j, _ROLE_Z))
        pos1 = np.arange(1, d + 1)
        prow = np.arange(d)
        total_points = N * d + 1
        prev_val: float | None = None
        for a in range(0, total_points, rows):
            idx = np.arange(a, min(total_points, a + rows))
            t = (idx[:, None] - pos1[None, :]) // d + 1
            xpos = ztab[prow[None, :], t]
            x = np.empty_like(xpos)
            x[:, perm] = xpos
            vals = f(x)
            mom.add(vals)
            if prev_val is None:
                seq = vals
                m0 = 1  # first difference is step 1
            else:
                seq = np.concatenate(([prev_val], vals))
                m0 = a
            dsq = np.diff(seq) ** 2
            steps = np.arange(m0, m0 + dsq.size)
            coords = np.asarray(perm)[(steps - 1) % d]
            tau_chunk = np.bincount(coords, weights=dsq, minlength=d)
            for j in range(d):
                tau_parts[j].append(float(tau_chunk[j]))
            np.add.at(block, (steps - 1) // d, 0.5 * dsq)
            prev_val = float(vals[-1])
        sigma2_source = "chain-points"

    tau_total = np.array([math.fsum(parts) / (2 * N) for parts in tau_parts])
    delta_hat = math.fsum(tau_total.tolist())
    sigma2_hat = mom.variance()

    floor = variance_floor
    if floor is None:
        floor = 1e-12 * max(mom.mean_square(), 1e-300)
    degenerate = sigma2_hat <= floor
    nu_hat = float("nan") if degenerate else delta_hat / sigma2_hat

    if strategy is Strategy.WINDING_FULL:
        # adjacent blocks of the chain are dependent: lag-1 corrected SE
        c0 = float(block.var(ddof=1))
        c1 = float(np.mean((block[:-1] - block.mean()) * (block[1:] - block.mean())))
        se = math.sqrt(max(c0 + 2 * c1, 0.0) / N)
    else:
        se = float(block.std(ddof=1) / math.sqrt(N)) if N > 1 else float("nan")

    return DeltaEstimate(
        strategy=strategy,
        N=N,
        dims=d,
        seed=seed,
        replicate=replicate,
        tau_total=tau_total,
        delta_hat=delta_hat,
        sigma2_hat=sigma2_hat,
        sigma2_source=sigma2_source,
        nu_hat=nu_hat,
        degenerate=degenerate,
        n_evals=strategy.evaluation_count(N, d),
        se_delta=se,
        order=tuple(perm) if order is not None else None,
    )


def replicate_variance(
    f: BlackBox,
    model: InputModel,
    strategy: Strategy | str,
    N: int,
    R: int,
    seed: int,
    *,
    order: Sequence[int] | None = None,
    threads: int = 1,
    variance_floor: float | None = None,
) -> ReplicateResult:
    """Run ``R`` independent estimates (distinct replicate stream ids) and
    return the across-replicate sample variance of ``delta_hat``.

    Thread count affects wall time only: replicate ``r`` always uses the
    stream keyed by ``(seed, r, ...)`` and results are reduced in replicate
    order.
    """
    strategy = Strategy(strategy)
    if R < 2:
        raise ValueError("R must be >= 2")

    def run(r: int) -> DeltaEstimate:
        try:
            return estimate_delta(
                f, model, strategy, N, seed,
                order=order, replicate=r, variance_floor=variance_floor,
            )
        except EvaluationError as exc:
            raise EvaluationError(f"replicate {r}: {exc}", point=exc.point, replicate=r) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            estimates = list(pool.map(run, range(R)))
    else:
        estimates = [run(r) for r in range(R)]

    return ReplicateResult(
        strategy=strategy,
        N=N,
        R=R,
        seed=seed,
        deltas=np.array([e.delta_hat for e in estimates]),
        sigma2s=np.array([e.sigma2_hat for e in estimates]),
        nus=np.array([e.nu_hat for e in estimates]),
        taus=np.stack([e.tau_total for e in estimates]),
        estimates=estimates,
    )
