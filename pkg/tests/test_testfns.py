import numpy as np
import pytest

from meandim import (
    Bernoulli01,
    InputModel,
    MomentProfile,
    RandomStream,
    StdGaussian,
    Uniform01,
    anova_enumerate,
    make_additive,
    make_product,
    make_random_discrete,
    make_sobol_g,
    make_two_norm,
)
from meandim.testfns import from_descriptor


class TestAdditive:
    def test_uniform_centered_factors(self):
        fn = make_additive(0.0, [(Uniform01(), lambda x: x)] * 5)
        assert fn.nu == 1.0
        assert fn.sigma2 == pytest.approx(5 / 12, rel=1e-10)
        assert fn.delta == pytest.approx(5 / 12, rel=1e-10)

    def test_gaussian_single_factor(self):
        fn = make_additive(0.0, [(StdGaussian(), lambda x: x)])
        assert fn.sigma2 == pytest.approx(1.0, rel=1e-9)

    def test_centering_applied(self):
        fn = make_additive(2.0, [(Uniform01(), lambda x: x + 10)])
        draws = fn.model.sample(50_000, RandomStream(1))
        vals = fn.blackbox(draws)
        assert abs(vals.mean() - 2.0) < 0.01  # offset removed, mu kept

    def test_profiles_are_centered(self):
        fn = make_additive(0.0, [(Uniform01(), lambda x: 3 * x)])
        assert fn.profiles[0].mu == 0.0
        assert fn.profiles[0].sigma2 == pytest.approx(9 / 12, rel=1e-9)


class TestProduct:
    def test_gaussian_factors(self):
        fn = make_product([(StdGaussian(), lambda x: x)] * 3)
        assert fn.nu == pytest.approx(3.0)
        assert fn.sigma2 == pytest.approx(1.0, rel=1e-9)

    def test_constant_factor_drops_out(self):
        base = make_product([(StdGaussian(), lambda x: x)] * 2)
        with_const = make_product(
            [(StdGaussian(), lambda x: x)] * 2
            + [(Uniform01(), lambda x: np.full_like(x, 2.5))]
        )
        assert with_const.nu == pytest.approx(base.nu, rel=1e-9)

    def test_bernoulli_matches_enumeration(self):
        fn = make_product([(Bernoulli01(), lambda x: x)] * 3)
        vc = anova_enumerate(fn.blackbox, fn.model)
        assert fn.nu == pytest.approx(vc.nu, abs=1e-9)
        assert fn.nu == pytest.approx(12 / 7)

    def test_all_degenerate_rejected(self):
        with pytest.raises(ValueError):
            make_product([(Uniform01(), lambda x: np.ones_like(x))] * 2)


class TestSobolG:
    def test_single_variable(self):
        assert make_sobol_g([0.0]).nu == pytest.approx(1.0)

    def test_two_zero_constants(self):
        fn = make_sobol_g([0.0, 0.0])
        assert fn.nu == pytest.approx(8 / 7)
        # cross-check the analytic factor moments by quadrature with the kink split
        q = MomentProfile.from_quadrature(
            lambda x: np.abs(4 * x - 2), Uniform01(), split_points=[0.5]
        )
        p = fn.profiles[0]
        assert p.mu2 == pytest.approx(q.mu2, rel=1e-10)
        assert p.mu3 == pytest.approx(q.mu3, rel=1e-10)
        assert p.mu4 == pytest.approx(q.mu4, rel=1e-10)
        assert p.kappa == pytest.approx(-1.2, abs=1e-10)

    def test_large_constants_deactivate_factors(self):
        fn = make_sobol_g([0.0, 1e6, 1e6])
        assert fn.nu == pytest.approx(1.0, abs=1e-6)

    def test_factor_moments_match_sampling(self):
        a = 2.0
        fn = make_sobol_g([a])
        draws = fn.model.sample(1_000_000, RandomStream(5))
        vals = fn.blackbox(draws)
        p = fn.profiles[0]
        for k, exact in ((1, p.mu), (2, p.mu2), (3, p.mu3), (4, p.mu4)):
            est = np.mean(vals ** k)
            se = np.std(vals ** k) / 1000
            assert abs(est - exact) < 4 * se

    def test_negative_constant_rejected(self):
        with pytest.raises(ValueError):
            make_sobol_g([1.0, -0.5])

    def test_values_positive(self):
        fn = make_sobol_g([0.5, 3.0])
        vals = fn.blackbox(fn.model.sample(1000, RandomStream(6)))
        assert np.all(vals > 0)


class TestTwoNorm:
    def test_definition(self):
        fn = make_two_norm(3)
        assert fn.blackbox(np.zeros((1, 3)))[0] == 0.0
        e1 = np.zeros((1, 3))
        e1[0, 0] = 1.0
        assert fn.blackbox(e1)[0] == 1.0

    def test_no_exact_nu(self):
        assert make_two_norm(4).nu is None

    def test_dimension_validation(self):
        with pytest.raises(ValueError):
            make_two_norm(0)


class TestRandomDiscrete:
    def test_deterministic(self):
        a = make_random_discrete(3, 4, seed=9)
        b = make_random_discrete(3, 4, seed=9)
        pts = a.model.sample(100, RandomStream(1))
        assert np.array_equal(a.blackbox(pts), b.blackbox(pts))

    def test_enumerable(self):
        fn = make_random_discrete(2, 3, seed=4)
        vc = anova_enumerate(fn.blackbox, fn.model)
        assert vc.sigma2 > 0
        assert 1.0 <= vc.nu <= 2.0 + 1e-9


class TestDescriptors:
    def test_round_trips(self):
        for desc in (
            {"kind": "sobol_g", "a": [0.0, 1.0]},
            {"kind": "two_norm", "d": 3},
            {"kind": "discrete", "d": 2, "max_support": 3, "seed": 5},
            {
                "kind": "additive",
                "mu": 0.0,
                "factors": [{"dist": {"kind": "uniform01"}, "g": {"form": "identity"}}] * 2,
            },
            {
                "kind": "product",
                "factors": [{"dist": {"kind": "gaussian"}, "g": {"form": "identity"}}] * 2,
            },
        ):
            fn = from_descriptor(desc)
            assert fn.blackbox.dims == fn.model.dims

    def test_affine_form(self):
        fn = from_descriptor({
            "kind": "additive",
            "mu": 0.0,
            "factors": [
                {"dist": {"kind": "uniform01"}, "g": {"form": "affine", "scale": 2.0}}
            ],
        })
        assert fn.sigma2 == pytest.approx(4 / 12, rel=1e-9)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            from_descriptor({"kind": "ridge"})

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            from_descriptor({
                "kind": "additive", "mu": 0.0,
                "factors": [{"dist": {"kind": "uniform01"}, "g": {"form": "sin"}}],
            })

    def test_exactness_invariant(self):
        fn = make_sobol_g([1.0, 2.0])
        assert fn.delta == pytest.approx(fn.nu * fn.sigma2, rel=1e-12)
