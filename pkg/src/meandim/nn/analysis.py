"""Per-pixel Sobol' index maps and mean-dimension report tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..blackbox import BlackBox
from ..estimators import Strategy, estimate_delta
from ..inputs import InputModel
from ..rng import RandomStream
from .network import NetworkSpec

__all__ = ["IndexMap", "index_maps", "estimate_lower_indices", "mean_dimension_report", "ReportCell"]

_ROLE_X = 0
_ROLE_Z = 1
_CHUNK_CELLS = 1 << 21


def estimate_lower_indices(
    f: BlackBox, model: InputModel, N: int, stream: RandomStream,
) -> np.ndarray:
    """All d lower (closed) indices from one pass of base/donor pairs.

    Per pair the base value f(x) and donor value f(z) are shared across all
    coordinates, so the pass costs N*(d+2) evaluations.  Noise can make
    entries slightly negative.
    """
    d = model.dims
    rows = max(1, _CHUNK_CELLS // max(d, 1))
    parts: list[list[float]] = [[] for _ in range(d)]
    sx, sz = stream.split(0, _ROLE_X), stream.split(0, _ROLE_Z)
    for a in range(0, N, rows):
        m = min(N, a + rows) - a
        x = model.sample(m, sx)
        z = model.sample(m, sz)
        fx = f(x)
        fz = f(z)
        for j in range(d):
            saved = z[:, j].copy()
            z[:, j] = x[:, j]
            parts[j].append(float(np.sum(fx * (f(z) - fz))))
            z[:, j] = saved
    return np.array([math.fsum(p) / N for p in parts])


@dataclass
class IndexMap:
    """Per-pixel index values on the network's input grid."""

    values: np.ndarray  # (H, W)
    kind: str           # "total" | "lower"
    target: str         # "g" | "f"
    output: int
    sampler: str
    strategy: str
    N: int
    seed: int
    sigma2_hat: float | None = None
    degenerate: bool = False

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "target": self.target,
            "output": self.output,
            "sampler": self.sampler,
            "strategy": self.strategy,
            "N": self.N,
            "seed": self.seed,
            "sigma2_hat": self.sigma2_hat,
            "degenerate": self.degenerate,
            "height": int(self.values.shape[0]),
            "width": int(self.values.shape[1]),
            "values": [float(v) for v in self.values.ravel()],
        }


def index_maps(
    net: NetworkSpec,
    output: int,
    target: str,
    model: InputModel,
    sampler_name: str,
    kind: str = "total",
    strategy: Strategy | str = Strategy.WINDING_TRUNCATED,
    N: int = 1000,
    seed: int = 0,
    order: Sequence[int] | None = None,
) -> IndexMap:
    """Estimate a per-pixel index map for one classifier output.

    Total-index maps come from one multi-pixel pass of the chosen strategy
    (truncated winding stairs by default, updating pixels in raster order);
    lower-index maps reuse a base/donor pair per draw.
    """
    if kind not in ("total", "lower"):
        raise ValueError("kind must be 'total' or 'lower'")
    h, w, c = net.input_shape
    if model.dims != h * w * c:
        raise ValueError(f"sampler has {model.dims} pixels, network wants {h * w * c}")
    f = net.as_blackbox(output, target)
    if kind == "total":
        est = estimate_delta(f, model, strategy, N, seed, order=order)
        values = est.tau_total.reshape(h, w)
        sigma2, degenerate = est.sigma2_hat, est.degenerate
    else:
        stream = RandomStream(seed).split(0)
        values = estimate_lower_indices(f, model, N, stream).reshape(h, w)
        sigma2, degenerate = None, False
    return IndexMap(
        values=values,
        kind=kind,
        target=target,
        output=output,
        sampler=sampler_name,
        strategy=Strategy(strategy).value,
        N=N,
        seed=seed,
        sigma2_hat=sigma2,
        degenerate=degenerate,
    )


@dataclass
class ReportCell:
    sampler: str
    target: str
    output: int
    nu_hat: float
    delta_hat: float
    sigma2_hat: float
    se_delta: float
    degenerate: bool
    n_evals: int


@dataclass
class MeanDimensionReport:
    strategy: str
    N: int
    seed: int
    cells: list[ReportCell] = field(default_factory=list)

    def cell(self, sampler: str, target: str, output: int) -> ReportCell:
        for c in self.cells:
            if (c.sampler, c.target, c.output) == (sampler, target, output):
                return c
        raise KeyError((sampler, target, output))

    def rows(self) -> list[dict]:
        return [
            {
                "sampler": c.sampler,
                "target": c.target,
                "y": c.output,
                "nu_hat": c.nu_hat,
                "delta_hat": c.delta_hat,
                "sigma2_hat": c.sigma2_hat,
                "se_delta": c.se_delta,
                "degenerate": c.degenerate,
                "n_evals": c.n_evals,
                "strategy": self.strategy,
                "N": self.N,
                "seed": self.seed,
            }
            for c in self.cells
        ]


def mean_dimension_report(
    net: NetworkSpec,
    samplers: dict[str, InputModel],
    outputs: Sequence[int],
    targets: Sequence[str] = ("g", "f"),
    strategy: Strategy | str = Strategy.WINDING_TRUNCATED,
    N: int = 1000,
    seed: int = 0,
    variance_floor: float | None = None,
) -> MeanDimensionReport:
    """Mean-dimension table over (sampler, target, output) cells.

    Cells whose variance estimate falls below the degeneracy floor are
    flagged (``nu_hat`` is NaN there) instead of reporting a wild ratio.
    Each cell uses its own replicate stream id, so the table is
    reproducible cell-by-cell.
    """
    report = MeanDimensionReport(strategy=Strategy(strategy).value, N=N, seed=seed)
    cell_index = 0
    for sampler_name, model in samplers.items():
        for target in targets:
            for y in outputs:
                est = estimate_delta(
                    net.as_blackbox(y, target), model, strategy, N, seed,
                    replicate=cell_index, variance_floor=variance_floor,
                )
                report.cells.append(ReportCell(
                    sampler=sampler_name,
                    target=target,
                    output=int(y),
                    nu_hat=est.nu_hat,
                    delta_hat=est.delta_hat,
                    sigma2_hat=est.sigma2_hat,
                    se_delta=est.se_delta,
                    degenerate=est.degenerate,
                    n_evals=est.n_evals,
                ))
                cell_index += 1
    return report
