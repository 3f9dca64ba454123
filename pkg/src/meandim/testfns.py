"""Analytic benchmark functions with attached moment profiles and exact
mean dimensions where closed forms exist."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .blackbox import BlackBox
from .inputs import (
    CoordinateDistribution,
    FiniteSupport,
    InputModel,
    StdGaussian,
    Uniform01,
    coordinate_from_dict,
)
from .oracles import MomentProfile, nu_product
from .rng import RandomStream

__all__ = [
    "TestFunction",
    "make_additive",
    "make_product",
    "make_sobol_g",
    "make_two_norm",
    "make_random_discrete",
    "from_descriptor",
]

Factor = tuple[CoordinateDistribution, Callable[[np.ndarray], np.ndarray]]


@dataclass
class TestFunction:
    """A black box paired with its input model and known exact quantities."""

    name: str
    blackbox: BlackBox
    model: InputModel
    nu: float | None = None
    sigma2: float | None = None
    delta: float | None = None
    profiles: list[MomentProfile] | None = None
    descriptor: dict | None = None

    def __post_init__(self):
        if self.nu is not None and self.sigma2 is not None and self.delta is None:
            self.delta = self.nu * self.sigma2
        if None not in (self.nu, self.sigma2, self.delta):
            if abs(self.delta - self.nu * self.sigma2) > 1e-9 * max(1.0, abs(self.delta)):
                raise ValueError("delta inconsistent with nu * sigma2")


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def make_additive(
    mu: float,
    factors: Sequence[Factor],
    name: str = "additive",
) -> TestFunction:
    """Sum of independent single-coordinate factors, centered internally.

    ``f(x) = mu + sum_j (g_j(x_j) - E g_j)``; the mean dimension is exactly
    1 and the variance is the sum of factor variances.
    """
    dists = [d for d, _ in factors]
    gs = [g for _, g in factors]
    profiles = [
        MomentProfile.from_quadrature(g, dist) for dist, g in factors
    ]
    offsets = np.array([p.mu for p in profiles])
    centered = [
        MomentProfile.from_central(0.0, p.sigma2, p.gamma, p.kappa, source=p.source)
        for p in profiles
    ]
    sigma2 = float(sum(p.sigma2 for p in centered))
    if not np.isfinite(sigma2):
        raise ValueError("a factor has non-finite variance")

    def func(points: np.ndarray) -> np.ndarray:
        acc = np.full(points.shape[0], float(mu))
        for j, g in enumerate(gs):
            acc += g(points[:, j]) - offsets[j]
        return acc

    model = InputModel(dists)
    return TestFunction(
        name=name,
        blackbox=BlackBox(model.dims, func, name=name),
        model=model,
        nu=1.0,
        sigma2=sigma2,
        profiles=centered,
    )


def make_product(
    factors: Sequence[Factor],
    name: str = "product",
    profiles: Sequence[MomentProfile] | None = None,
) -> TestFunction:
    """Product of independent single-coordinate factors.

    Profiles default to quadrature of each factor; the exact mean dimension
    comes from the product-function closed form.
    """
    dists = [d for d, _ in factors]
    gs = [g for _, g in factors]
    if profiles is None:
        profiles = [MomentProfile.from_quadrature(g, dist) for dist, g in factors]
    profiles = list(profiles)
    if all(p.sigma2 == 0 for p in profiles):
        raise ValueError("all factors are degenerate")
    sigma2 = float(np.prod([p.mu2 for p in profiles]) - np.prod([p.mu for p in profiles]) ** 2)

    def func(points: np.ndarray) -> np.ndarray:
        acc = np.ones(points.shape[0])
        for j, g in enumerate(gs):
            acc *= g(points[:, j])
        return acc

    model = InputModel(dists)
    return TestFunction(
        name=name,
        blackbox=BlackBox(model.dims, func, name=name),
        model=model,
        nu=nu_product(profiles),
        sigma2=sigma2,
        profiles=profiles,
    )


def _g_factor_profile(a: float) -> MomentProfile:
    # |4x-2| for x ~ U(0,1) is U(0,2), so E|4x-2|^k = 2^k/(k+1) exactly
    u1, u2, u3, u4 = 1.0, 4 / 3, 2.0, 16 / 5
    s = 1.0 + a
    return MomentProfile.from_uncentered(
        (u1 + a) / s,
        (u2 + 2 * a * u1 + a ** 2) / s ** 2,
        (u3 + 3 * a * u2 + 3 * a ** 2 * u1 + a ** 3) / s ** 3,
        (u4 + 4 * a * u3 + 6 * a ** 2 * u2 + 4 * a ** 3 * u1 + a ** 4) / s ** 4,
    )


def make_sobol_g(a: Sequence[float], name: str = "sobol-g") -> TestFunction:
    """The classic g-function ``prod_j (|4x_j - 2| + a_j) / (1 + a_j)`` on
    the unit cube, with exact factor moments (each factor is an affine image
    of a U(0,2) variable, so all moments are closed-form)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("g-function constants must be >= 0")
    profiles = [_g_factor_profile(float(aj)) for aj in a]

    def func(points: np.ndarray) -> np.ndarray:
        return np.prod((np.abs(4 * points - 2) + a) / (1 + a), axis=1)

    d = a.size
    model = InputModel.iid(Uniform01(), d)
    sigma2 = float(np.prod([p.mu2 for p in profiles]) - 1.0)
    return TestFunction(
        name=name,
        blackbox=BlackBox(d, func, name=name),
        model=model,
        nu=nu_product(profiles),
        sigma2=sigma2,
        profiles=profiles,
        descriptor={"kind": "sobol_g", "a": a.tolist()},
    )


def make_two_norm(d: int, name: str = "two-norm") -> TestFunction:
    """Euclidean norm of a standard Gaussian vector.

    No closed-form mean dimension is attached; this is an estimation target
    (known to sit just below 1 and to decrease with dimension).
    """
    if d < 1:
        raise ValueError("d must be >= 1")

    def func(points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points, axis=1)

    return TestFunction(
        name=name,
        blackbox=BlackBox(d, func, name=name),
        model=InputModel.iid(StdGaussian(), d),
        descriptor={"kind": "two_norm", "d": d},
    )


def make_random_discrete(
    d: int, max_support: int, seed: int, name: str | None = None,
) -> TestFunction:
    """Random lookup table on a random finite product grid.

    Useful as a target whose exact ANOVA is computable by enumeration.
    Support sizes are 2..max_support, probabilities are bounded away from
    zero, and table values are standard normal draws.
    """
    if d < 1 or max_support < 2:
        raise ValueError("need d >= 1 and max_support >= 2")
    gen = RandomStream(seed, stream=0).generator
    coords = []
    for _ in range(d):
        n = int(gen.integers(2, max_support + 1))
        values = np.sort(gen.normal(0.0, 1.0, n))
        probs = gen.random(n) + 0.2
        coords.append(FiniteSupport(values, probs / probs.sum()))
    sizes = [c.values.size for c in coords]
    table = gen.normal(0.0, 1.0, sizes)

    def func(points: np.ndarray) -> np.ndarray:
        idx = tuple(
            np.searchsorted(coords[j].values, points[:, j]) for j in range(d)
        )
        return table[idx]

    model = InputModel(coords)
    return TestFunction(
        name=name or f"discrete-{seed}",
        blackbox=BlackBox(d, func, name=name or "discrete"),
        model=model,
    )


_FORMS: dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
    "identity": lambda **kw: _identity,
    "affine": lambda scale=1.0, shift=0.0, **kw: (lambda x: scale * x + shift),
    "abs_affine": lambda scale=1.0, shift=0.0, **kw: (lambda x: np.abs(scale * x + shift)),
}


def _factor_from_dict(desc: dict) -> Factor:
    dist = coordinate_from_dict(desc["dist"])
    form = dict(desc.get("g", {"form": "identity"}))
    kind = form.pop("form")
    try:
        g = _FORMS[kind](**form)
    except KeyError as exc:
        raise ValueError(f"unknown factor form {kind!r}") from exc
    return dist, g


def from_descriptor(desc: dict) -> TestFunction:
    """Build a test function from its JSON descriptor."""
    kind = desc.get("kind")
    if kind == "additive":
        return make_additive(desc.get("mu", 0.0), [_factor_from_dict(f) for f in desc["factors"]])
    if kind == "product":
        return make_product([_factor_from_dict(f) for f in desc["factors"]])
    if kind == "sobol_g":
        return make_sobol_g(desc["a"])
    if kind == "two_norm":
        return make_two_norm(int(desc["d"]))
    if kind == "discrete":
        return make_random_discrete(
            int(desc["d"]), int(desc.get("max_support", 4)), int(desc.get("seed", 0)),
        )
    raise ValueError(f"unknown test function kind {kind!r}")
