"""Closed-form variance and mean-dimension oracles.

Everything here is exact (up to float rounding): fourth-moment identities
for iid differences, the estimator variances for additive and product
functions under all four sampling strategies, the product-function mean
dimension, and a brute-force ANOVA decomposition over finite product grids.
The estimators module is validated against these results, never the other
way around.

The strategy variance formulas are assembled from the per-difference
covariances of the underlying update chains:

* ``cov_same``  - two squared differences inside one block of ``d``
  consecutive updates (positions ``j < k``),
* ``cov_adj``   - a position-``j`` difference in one block against a
  position-``k`` difference in the *previous* block,
* ``cov_lag``   - two differences updating the same coordinate exactly
  ``d`` steps apart (they share the value introduced by the first and
  removed by the second).

The full-chain estimator sees all three with exact ``N`` / ``N-1`` counts;
the truncated (restarted) variant sees only ``cov_same``; the radial
pattern replaces the between-positions structure by a common baseline
point; the naive pattern has no cross terms at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .blackbox import BlackBox
from .inputs import (
    Bernoulli01,
    CoordinateDistribution,
    FiniteSupport,
    Histogram,
    InputModel,
    StdGaussian,
    Uniform01,
)

__all__ = [
    "MomentProfile",
    "Lemma1Moments",
    "lemma1_moments",
    "var_additive",
    "var_product",
    "nu_product",
    "covariance_sign_condition",
    "VarianceComponents",
    "anova_enumerate",
    "WindingLagStructure",
    "winding_lag_covariance_structure",
    "Strategy",
]

_CONSISTENCY_TOL = 1e-10

# strategy names shared with the estimators module (kept here as plain
# strings so the oracle layer has no dependency on the sampling layer)
Strategy = str
NAIVE = "naive"
RADIAL = "radial"
WINDING_FULL = "winding-full"
WINDING_TRUNCATED = "winding-truncated"
_STRATEGIES = (NAIVE, RADIAL, WINDING_FULL, WINDING_TRUNCATED)


# ---------------------------------------------------------------------------
# moment profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentProfile:
    """First four moments of one factor, centered and uncentered.

    ``eta = E[g(x)^2 (g(x) - g(z))^2]`` for iid ``x, z`` is the mixed
    fourth moment entering every product-function covariance;
    it equals both ``mu4 - 2*mu*mu3 + mu2**2`` and
    ``2*mu^2*sigma2 + 2*mu*gamma*sigma^3 + (kappa+4)*sigma2**2``.

    Attributes
    ----------
    mu, sigma2, gamma, kappa:
        Mean, variance, skewness, excess kurtosis.
    mu2, mu3, mu4:
        Uncentered moments ``E g^2``, ``E g^3``, ``E g^4``.
    eta:
        The mixed moment above.
    source:
        How the profile was constructed ("analytic", "quadrature",
        "samples", ...); recorded in exported metadata.
    """

    mu: float
    sigma2: float
    gamma: float
    kappa: float
    mu2: float
    mu3: float
    mu4: float
    eta: float
    source: str = "analytic"

    def __post_init__(self):
        if self.sigma2 < -_CONSISTENCY_TOL:
            raise ValueError(f"variance must be >= 0, got {self.sigma2}")
        if self.kappa < -2 - 1e-9:
            raise ValueError(f"kurtosis must be >= -2, got {self.kappa}")
        scale = max(1.0, self.mu2 ** 2, abs(self.mu4))
        if abs(self.mu2 - (self.sigma2 + self.mu ** 2)) > _CONSISTENCY_TOL * scale:
            raise ValueError("mu2 inconsistent with mu and sigma2")
        if self.sigma2 > 0:
            m4c = self.mu4 - 4 * self.mu * self.mu3 + 6 * self.mu ** 2 * self.mu2 - 3 * self.mu ** 4
            kappa_check = m4c / self.sigma2 ** 2 - 3.0
            if abs(kappa_check - self.kappa) > 1e-8 * max(1.0, abs(self.kappa)):
                raise ValueError(f"kurtosis {self.kappa} inconsistent with moments ({kappa_check})")
        eta_a = self.mu4 - 2 * self.mu * self.mu3 + self.mu2 ** 2
        s = math.sqrt(max(self.sigma2, 0.0))
        eta_b = (
            2 * self.mu ** 2 * self.sigma2
            + 2 * self.mu * self.gamma * s ** 3
            + (self.kappa + 4) * self.sigma2 ** 2
        )
        if abs(eta_a - eta_b) > 1e-8 * scale or abs(self.eta - eta_a) > _CONSISTENCY_TOL * scale:
            raise ValueError("eta closed forms disagree")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_central(
        cls, mu: float, sigma2: float, gamma: float = 0.0, kappa: float = 0.0,
        source: str = "analytic",
    ) -> "MomentProfile":
        s = math.sqrt(sigma2)
        m3c = gamma * s ** 3
        m4c = (kappa + 3.0) * sigma2 ** 2
        mu2 = sigma2 + mu ** 2
        mu3 = m3c + 3 * mu * sigma2 + mu ** 3
        mu4 = m4c + 4 * mu * m3c + 6 * mu ** 2 * sigma2 + mu ** 4
        eta = mu4 - 2 * mu * mu3 + mu2 ** 2
        return cls(mu, sigma2, gamma, kappa, mu2, mu3, mu4, eta, source)

    @classmethod
    def from_uncentered(
        cls, mu: float, mu2: float, mu3: float, mu4: float, source: str = "analytic",
    ) -> "MomentProfile":
        sigma2 = mu2 - mu ** 2
        m3c = mu3 - 3 * mu * mu2 + 2 * mu ** 3
        m4c = mu4 - 4 * mu * mu3 + 6 * mu ** 2 * mu2 - 3 * mu ** 4
        if sigma2 > 0:
            gamma = m3c / sigma2 ** 1.5
            kappa = m4c / sigma2 ** 2 - 3.0
        else:
            sigma2, gamma, kappa = 0.0, 0.0, -2.0
        eta = mu4 - 2 * mu * mu3 + mu2 ** 2
        return cls(mu, sigma2, gamma, kappa, mu2, mu3, mu4, eta, source)

    @classmethod
    def gaussian(cls, mean: float = 0.0, variance: float = 1.0) -> "MomentProfile":
        return cls.from_central(mean, variance, 0.0, 0.0)

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "MomentProfile":
        return cls.from_central((a + b) / 2, (b - a) ** 2 / 12, 0.0, -1.2)

    @classmethod
    def bernoulli(cls, p: float = 0.5, lo: float = 0.0, hi: float = 1.0) -> "MomentProfile":
        values = np.array([lo, hi])
        probs = np.array([1 - p, p])
        m = [float((values ** k) @ probs) for k in (1, 2, 3, 4)]
        return cls.from_uncentered(*m)

    @classmethod
    def constant(cls, c: float) -> "MomentProfile":
        return cls.from_uncentered(c, c ** 2, c ** 3, c ** 4)

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "MomentProfile":
        v = np.asarray(values, dtype=float)
        return cls.from_uncentered(
            float(v.mean()), float((v ** 2).mean()), float((v ** 3).mean()),
            float((v ** 4).mean()), source="samples",
        )

    @classmethod
    def from_quadrature(
        cls,
        g: Callable[[np.ndarray], np.ndarray],
        dist: CoordinateDistribution,
        nodes: int = 256,
        split_points: Sequence[float] = (),
    ) -> "MomentProfile":
        """Moments of ``g(x)`` for ``x ~ dist`` by quadrature / exact sums.

        ``split_points`` subdivides continuous integration at known kinks
        of ``g`` so Gauss rules keep spectral accuracy.
        """
        xs, ws = _quadrature_rule(dist, nodes, split_points)
        gx = np.asarray(g(xs), dtype=float)
        m = [float((gx ** k) @ ws) for k in (1, 2, 3, 4)]
        return cls.from_uncentered(*m, source="quadrature")


def _gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return (a + b) / 2 + (b - a) / 2 * t, (b - a) / 2 * w


def _quadrature_rule(
    dist: CoordinateDistribution, nodes: int, split_points: Sequence[float],
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dist, FiniteSupport):
        return dist.values, dist.probs
    if isinstance(dist, Bernoulli01):
        return np.array([0.0, 1.0]), np.array([0.5, 0.5])
    if isinstance(dist, Uniform01):
        cuts = sorted({0.0, 1.0, *(float(s) for s in split_points if 0.0 < s < 1.0)})
        xs, ws = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            x, w = _gauss_legendre(a, b, nodes)
            xs.append(x)
            ws.append(w)
        return np.concatenate(xs), np.concatenate(ws)
    if isinstance(dist, StdGaussian):
        t, w = np.polynomial.hermite.hermgauss(nodes)
        return math.sqrt(2.0) * t, w / math.sqrt(math.pi)
    if isinstance(dist, Histogram):
        if dist.mode == "atoms":
            centers = 0.5 * (dist.edges[:-1] + dist.edges[1:])
            return centers, dist.probs
        xs, ws = [], []
        per_bin = max(4, nodes // max(1, dist.probs.size))
        for lo, hi, p in zip(dist.edges[:-1], dist.edges[1:], dist.probs):
            if p == 0:
                continue
            x, w = _gauss_legendre(float(lo), float(hi), per_bin)
            xs.append(x)
            ws.append(w * p / (hi - lo))
        return np.concatenate(xs), np.concatenate(ws)
    raise ValueError(f"no quadrature rule for coordinate kind {dist.kind!r}")


# ---------------------------------------------------------------------------
# fourth-moment identities for iid differences
# ---------------------------------------------------------------------------

class Lemma1Moments(NamedTuple):
    """Fourth-moment identities for iid Y with variance sigma2, kurtosis kappa."""

    diff4_mean: float        # E (Y1-Y2)^4                  = (12+2k) s^4
    diff2_var: float         # Var((Y1-Y2)^2)               = (8+2k) s^4
    cross_disjoint: float    # E (Y1-Y2)^2 (Y3-Y4)^2        = 4 s^4
    cross_shared: float      # E (Y1-Y2)^2 (Y1-Y3)^2        = (6+k) s^4


def lemma1_moments(sigma2: float, kappa: float) -> Lemma1Moments:
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    if kappa < -2:
        raise ValueError("kurtosis must be >= -2")
    s4 = sigma2 ** 2
    return Lemma1Moments(
        (12 + 2 * kappa) * s4,
        (8 + 2 * kappa) * s4,
        4 * s4,
        (6 + kappa) * s4,
    )


# ---------------------------------------------------------------------------
# estimator variances
# ---------------------------------------------------------------------------

def _check_strategy(strategy: str) -> str:
    s = str(strategy)
    if s not in _STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    return s


def var_additive(strategy: str, profiles: Sequence[MomentProfile], N: int) -> float:
    """Exact variance of the total-index-sum estimator for a sum of
    independent centered factors with the given moment profiles."""
    strategy = _check_strategy(strategy)
    if N < 1:
        raise ValueError("N must be >= 1")
    base = sum((2 + p.kappa / 2) * p.sigma2 ** 2 for p in profiles) / N
    if strategy == WINDING_FULL:
        extra = sum((p.kappa + 2) * p.sigma2 ** 2 for p in profiles)
        return base + (N - 1) / (2 * N ** 2) * extra
    return base


def _reorder(profiles: Sequence[MomentProfile], order: Sequence[int] | None):
    profiles = list(profiles)
    if order is None:
        return profiles
    order = list(order)
    if sorted(order) != list(range(len(profiles))):
        raise ValueError("order must be a permutation of 0..d-1")
    return [profiles[j] for j in order]


def var_product(
    strategy: str,
    profiles: Sequence[MomentProfile],
    N: int,
    order: Sequence[int] | None = None,
) -> float:
    """Exact variance of the total-index-sum estimator for a product of
    independent factors.

    ``order`` is the update-cycle permutation (position ``p`` updates factor
    ``order[p]``); it matters only for the winding strategies, whose pair
    covariances depend on cycle positions, not just on which factors pair
    up.  Empty products are 1, so ``d = 1`` degenerates correctly.  Cost is
    O(d^3); intended for the moderate d where closed forms are useful.
    """
    strategy = _check_strategy(strategy)
    if N < 1:
        raise ValueError("N must be >= 1")
    ps = _reorder(profiles, order)
    d = len(ps)
    s2 = np.array([p.sigma2 for p in ps])
    kap = np.array([p.kappa for p in ps])
    eta = np.array([p.eta for p in ps])
    m2 = np.array([p.mu2 for p in ps])
    m4 = np.array([p.mu4 for p in ps])
    m2sq = m2 ** 2

    def prod_except(arr, skip: set[int]) -> float:
        return float(np.prod([arr[t] for t in range(d) if t not in skip])) if d > len(skip) else 1.0

    def prod_range(arr, lo: int, hi: int) -> float:
        # product over open interval (lo, hi)
        return float(np.prod(arr[lo + 1:hi])) if hi - lo > 1 else 1.0

    def prod_outside(arr, lo: int, hi: int) -> float:
        # product over t < lo and t > hi
        return float(np.prod(arr[:lo]) * np.prod(arr[hi + 1:]))

    var_diag = (12 + 2 * kap) * s2 ** 2 * np.array([prod_except(m4, {j}) for j in range(d)]) \
        - 4 * s2 ** 2 * np.array([prod_except(m2sq, {j}) for j in range(d)])
    base = float(var_diag.sum()) / (4 * N)

    if strategy == NAIVE:
        return base

    def sub_term(j: int, k: int) -> float:
        return 4 * s2[j] * s2[k] * m2[j] * m2[k] * prod_except(m2sq, {j, k})

    if strategy == RADIAL:
        cov = 0.0
        for j in range(d):
            for k in range(j + 1, d):
                cov += eta[j] * eta[k] * prod_except(m4, {j, k}) - sub_term(j, k)
        return base + cov / (2 * N)

    cov_same = 0.0
    for j in range(d):
        for k in range(j + 1, d):
            cov_same += (
                eta[j] * eta[k] * prod_range(m2sq, j, k) * prod_outside(m4, j, k)
                - sub_term(j, k)
            )
    if strategy == WINDING_TRUNCATED:
        return base + cov_same / (2 * N)

    # full chain: adjacent-block cross terms plus the same-coordinate
    # lag-d term, both appearing N-1 times over N blocks
    cov_adj = 0.0
    for j in range(d):
        for k in range(j + 1, d):
            cov_adj += (
                eta[j] * eta[k] * prod_range(m4, j, k) * prod_outside(m2sq, j, k)
                - sub_term(j, k)
            )
    cov_lag = float(sum(
        (2 + kap[j]) * s2[j] ** 2 * prod_except(m2sq, {j}) for j in range(d)
    ))
    total = (
        N * float(var_diag.sum())
        + 2 * (N - 1) * cov_lag
        + 2 * N * cov_same
        + 2 * (N - 1) * cov_adj
    )
    return total / (4 * N ** 2)


def nu_product(profiles: Sequence[MomentProfile]) -> float:
    """Mean dimension of a product of independent factors:
    ``sum_j s2_j/mu2_j  /  (1 - prod_j mu_j^2/mu2_j)``."""
    m2 = np.array([p.mu2 for p in profiles])
    if np.any(m2 <= 0):
        raise ValueError("every factor needs E g^2 > 0")
    num = float(np.sum([p.sigma2 for p in profiles] / m2))
    den = 1.0 - float(np.prod([p.mu ** 2 for p in profiles] / m2))
    if den <= 0:
        raise ValueError("all factors are degenerate (zero variance)")
    return num / den


def covariance_sign_condition(profiles: Sequence[MomentProfile]) -> np.ndarray:
    """Per-factor flag ``kappa_j >= -5/16`` (boundary inclusive).

    A low-kurtosis screen reported alongside variance comparisons; it is a
    heuristic indicator only, not a guarantee of any variance ordering.
    """
    return np.array([p.kappa >= -5 / 16 for p in profiles], dtype=bool)


# ---------------------------------------------------------------------------
# brute-force ANOVA on finite product grids
# ---------------------------------------------------------------------------

MAX_GRID = 10 ** 6
MAX_DIMS = 20


def _finite_coords(model: InputModel) -> list[FiniteSupport]:
    out = []
    for j, c in enumerate(model.coords):
        if isinstance(c, FiniteSupport):
            out.append(c)
        elif isinstance(c, Bernoulli01):
            out.append(FiniteSupport([0.0, 1.0], [0.5, 0.5]))
        elif isinstance(c, Histogram) and c.mode == "atoms":
            keep = c.probs > 0
            centers = 0.5 * (c.edges[:-1] + c.edges[1:])
            out.append(FiniteSupport(centers[keep], c.probs[keep] / c.probs[keep].sum()))
        else:
            raise ValueError(f"coordinate {j} ({c.kind}) has no finite support")
    return out


@dataclass
class VarianceComponents:
    """Exact ANOVA table of a function on a finite product grid.

    ``components`` maps subset bitmasks (bit ``j`` set = coordinate ``j``
    participates, 0-based) to variance components.  ``effects`` holds the
    centered effect tables on the grid, axes ordered by coordinate.
    """

    dims: int
    mean: float
    sigma2: float
    components: dict[int, float]
    effects: dict[int, np.ndarray]
    supports: list[FiniteSupport]
    delta: float
    nu: float

    def component(self, u: Iterable[int]) -> float:
        mask = 0
        for j in u:
            mask |= 1 << j
        return self.components.get(mask, 0.0)

    def total_index(self, j: int) -> float:
        return sum(v for m, v in self.components.items() if m >> j & 1)

    def lower_index(self, u: Iterable[int]) -> float:
        mask = 0
        for j in u:
            mask |= 1 << j
        return sum(v for m, v in self.components.items() if m & ~mask == 0)

    def max_orthogonality_defect(self) -> float:
        """Largest |E f_u f_v| over distinct subsets (should be ~0)."""
        worst = 0.0
        weights = [c.probs for c in self.supports]
        masks = list(self.effects)
        for a in range(len(masks)):
            for b in range(a + 1, len(masks)):
                fa = self._expand(masks[a])
                fb = self._expand(masks[b])
                prod = fa * fb
                for ax in reversed(range(self.dims)):
                    if prod.shape[ax] == 1:
                        prod = np.take(prod, 0, axis=ax)
                    else:
                        prod = np.tensordot(prod, weights[ax], axes=([ax], [0]))
                worst = max(worst, abs(float(prod)))
                del fa, fb
        return worst

    def _expand(self, mask: int) -> np.ndarray:
        table = self.effects[mask]
        shape = [c.values.size if mask >> j & 1 else 1 for j, c in enumerate(self.supports)]
        return table.reshape(shape)


def anova_enumerate(f: BlackBox, model: InputModel) -> VarianceComponents:
    """Exact ANOVA decomposition by enumeration of a finite product grid.

    Computes conditional means for every subset, Moebius-inverts them into
    orthogonal effects, and returns all variance components together with
    the total-index sum ``delta = sum_u |u| sigma2_u`` and the mean
    dimension ``nu = delta / sigma2``.
    """
    coords = _finite_coords(model)
    d = model.dims
    if d > MAX_DIMS:
        raise ValueError(f"enumeration supports d <= {MAX_DIMS}")
    sizes = [c.values.size for c in coords]
    grid_size = math.prod(sizes)
    if grid_size > MAX_GRID:
        raise ValueError(f"grid has {grid_size} points, cap is {MAX_GRID}")

    mesh = np.meshgrid(*[c.values for c in coords], indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=1)
    F = f(points).reshape(sizes)
    weights = [c.probs for c in coords]

    def marginalize(table: np.ndarray, keep_mask: int) -> np.ndarray:
        out = table
        for ax in reversed(range(d)):
            if not (keep_mask >> ax & 1):
                out = np.tensordot(out, weights[ax], axes=([ax], [0]))
        return out

    cond_mean = {0: np.asarray(marginalize(F, 0), dtype=float)}
    mu = float(cond_mean[0])
    for mask in range(1, 1 << d):
        cond_mean[mask] = marginalize(F, mask)

    # second moment of f under the product weights
    w_full = F ** 2
    for ax in reversed(range(d)):
        w_full = np.tensordot(w_full, weights[ax], axes=([ax], [0]))
    sigma2 = float(w_full) - mu ** 2

    def expand(mask: int, table) -> np.ndarray:
        shape = [sizes[j] if mask >> j & 1 else 1 for j in range(d)]
        return np.asarray(table, dtype=float).reshape(shape)

    effects: dict[int, np.ndarray] = {}
    components: dict[int, float] = {}
    for mask in range(1, 1 << d):
        acc = np.zeros([sizes[j] if mask >> j & 1 else 1 for j in range(d)])
        sub = mask
        while True:
            sign = -1.0 if (bin(mask).count("1") - bin(sub).count("1")) % 2 else 1.0
            acc = acc + sign * expand(sub, cond_mean[sub])
            if sub == 0:
                break
            sub = (sub - 1) & mask
        sq = acc ** 2
        for ax in reversed(range(d)):
            if mask >> ax & 1:
                sq = np.tensordot(sq, weights[ax], axes=([ax], [0]))
            else:
                sq = np.sum(sq, axis=ax)  # size-1 axis
        var_u = float(sq)
        if var_u < -1e-9 * max(1.0, sigma2):
            raise AssertionError(f"negative variance component {var_u} for mask {mask}")
        components[mask] = max(var_u, 0.0)
        effects[mask] = np.squeeze(acc)

    total = sum(components.values())
    if abs(total - sigma2) > 1e-9 * max(1.0, abs(sigma2)):
        raise AssertionError(f"components sum to {total}, variance is {sigma2}")
    delta = sum(bin(m).count("1") * v for m, v in components.items())
    nu = delta / sigma2 if sigma2 > 0 else float("nan")
    return VarianceComponents(
        dims=d, mean=mu, sigma2=sigma2, components=components, effects=effects,
        supports=coords, delta=delta, nu=nu,
    )


# ---------------------------------------------------------------------------
# winding-chain dependence structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindingLagStructure:
    """Which squared differences of a one-at-a-time update chain may covary.

    ``Delta_i`` and ``Delta_i'`` are dependent exactly when ``|i - i'| <=
    d``: within that window the two differences still share z values, and at
    lag exactly ``d`` the pair updates the same coordinate and shares the
    value introduced by the earlier step.  Covariances are shift invariant
    (``cov(D_{i+d}^2, D_{i'+d}^2) = cov(D_i^2, D_{i'}^2)``), so each
    coordinate pair contributes one same-block and one adjacent-block class.
    """

    d: int

    def dependent(self, i: int, i_prime: int) -> bool:
        return abs(i - i_prime) <= self.d

    def dependent_range(self, i: int) -> tuple[int, int]:
        """Inclusive range of steps whose differences may covary with step i."""
        return (i - self.d, i + self.d)

    def pair_lag_classes(self, j: int, k: int) -> list[tuple[str, int]]:
        """Shift-invariance classes for cycle positions ``1 <= j <= k <= d``.

        Returns (class name, lag) pairs: for j < k a same-block lag ``k-j``
        and an adjacent-block lag ``k-j-d``; for j == k the variance itself
        plus the same-coordinate lag ``d``.
        """
        if not (1 <= j <= self.d and 1 <= k <= self.d and j <= k):
            raise ValueError("need 1 <= j <= k <= d")
        if j == k:
            return [("variance", 0), ("self_lag", self.d)]
        return [("same_block", k - j), ("adjacent_block", k - j - self.d)]


def winding_lag_covariance_structure(d: int) -> WindingLagStructure:
    if d < 1:
        raise ValueError("d must be >= 1")
    return WindingLagStructure(d)
