import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meandim import (
    Bernoulli01,
    FiniteSupport,
    Histogram,
    InputModel,
    RandomStream,
    StdGaussian,
    Uniform01,
    hybrid,
    sample_point,
    winding_index,
)
from meandim.inputs import coordinate_from_dict


class TestSampling:
    def test_bernoulli_support_and_mean(self):
        model = InputModel.iid(Bernoulli01(), 3)
        draws = model.sample(100_000, RandomStream(1))
        assert set(np.unique(draws)) <= {0.0, 1.0}
        assert np.all(np.abs(draws.mean(axis=0) - 0.5) < 0.01)

    def test_degenerate_finite_support(self):
        model = InputModel([FiniteSupport([7.0], [1.0])])
        draws = model.sample(500, RandomStream(2))
        assert np.all(draws == 7.0)

    def test_gaussian_moments(self):
        model = InputModel.iid(StdGaussian(), 2)
        draws = model.sample(1_000_000, RandomStream(3))
        assert np.all(np.abs(draws.mean(axis=0)) < 0.005)
        assert np.all(np.abs(draws.var(axis=0) - 1.0) < 0.01)

    def test_sample_point_advances_stream(self):
        model = InputModel.iid(Uniform01(), 4)
        stream = RandomStream(5)
        p1 = sample_point(model, stream)
        p2 = sample_point(model, stream)
        assert p1.shape == (4,)
        assert not np.array_equal(p1, p2)

    def test_reproducible_sequences(self):
        model = InputModel.iid(StdGaussian(), 3)
        a = [sample_point(model, RandomStream(7, stream=2)) for _ in range(1)]
        s1, s2 = RandomStream(7, stream=2), RandomStream(7, stream=2)
        seq1 = [sample_point(model, s1) for _ in range(20)]
        seq2 = [sample_point(model, s2) for _ in range(20)]
        assert np.array_equal(np.array(seq1), np.array(seq2))
        assert np.array_equal(a[0], seq1[0])


class TestHistogram:
    def test_bin_frequencies_match_probabilities(self):
        probs = np.array([0.1, 0.4, 0.05, 0.25, 0.2])
        h = Histogram(np.linspace(0, 1, 6), probs)
        draws = h.sample(1_000_000, RandomStream(11))
        counts, _ = np.histogram(draws, np.linspace(0, 1, 6))
        freqs = counts / draws.size
        se = np.sqrt(probs * (1 - probs) / draws.size)
        assert np.all(np.abs(freqs - probs) < 4 * se)

    def test_atoms_mode_returns_centers(self):
        h = Histogram([0.0, 0.5, 1.0], [0.5, 0.5], mode="atoms")
        draws = h.sample(1000, RandomStream(12))
        assert set(np.unique(draws)) <= {0.25, 0.75}

    def test_smooth_mode_within_bins(self):
        h = Histogram([0.0, 0.5, 1.0], [1.0, 0.0])
        draws = h.sample(1000, RandomStream(13))
        assert np.all((draws >= 0) & (draws < 0.5))

    def test_rejects_bad_edges(self):
        with pytest.raises(ValueError):
            Histogram([0.0, 0.0, 1.0], [0.5, 0.5])

    def test_rejects_bad_probs(self):
        with pytest.raises(ValueError):
            Histogram([0, 1, 2], [0.6, 0.5])
        with pytest.raises(ValueError):
            Histogram([0, 1, 2], [-0.1, 1.1])
        with pytest.raises(ValueError):
            FiniteSupport([1, 2], [0.5, 0.5 + 1e-9])

    def test_prob_sum_tolerance(self):
        FiniteSupport([1, 2], [0.5, 0.5 + 1e-13])  # inside 1e-12


class TestHybrid:
    def test_basic_replacement(self):
        assert np.array_equal(hybrid([1, 2, 3], [9, 9, 9], 1), [1, 9, 3])

    def test_identity_when_equal(self):
        assert np.array_equal(hybrid([4, 5], [4, 5], 0), [4, 5])

    def test_last_coordinate(self):
        assert np.array_equal(hybrid([0, 0, 0, 0], [1, 1, 1, 1], 3), [0, 0, 0, 1])

    def test_inputs_unmodified(self):
        x = np.array([1.0, 2.0])
        z = np.array([3.0, 4.0])
        hybrid(x, z, 0)
        assert np.array_equal(x, [1, 2]) and np.array_equal(z, [3, 4])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            hybrid([1, 2], [3, 4], 2)
        with pytest.raises(IndexError):
            hybrid([1, 2], [3, 4], -1)

    @given(st.integers(1, 8), st.integers(0, 7), st.randoms(use_true_random=False))
    @settings(max_examples=50, deadline=None)
    def test_differs_in_at_most_one_coordinate_and_idempotent(self, d, j, rnd):
        j = j % d
        x = np.array([rnd.random() for _ in range(d)])
        z = np.array([rnd.random() for _ in range(d)])
        y = hybrid(x, z, j)
        assert np.sum(y != x) <= 1
        assert np.array_equal(hybrid(y, z, j), y)


class TestWindingIndex:
    def test_first_full_block_collects_fresh_values(self):
        # x_d = (z_1, ..., z_d)
        assert [winding_index(3, j, 3) for j in (1, 2, 3)] == [1, 2, 3]

    def test_next_step_replaces_first_coordinate(self):
        # x_{d+1} = (z_{d+1}, z_2, ..., z_d)
        assert [winding_index(4, j, 3) for j in (1, 2, 3)] == [4, 2, 3]

    def test_initial_point_convention(self):
        # x_0 = (z_{-(d-1)}, ..., z_0)
        assert winding_index(0, 2, 2) == 0
        assert winding_index(0, 1, 2) == -1

    def test_points_d_apart_share_no_indices(self):
        for d in range(1, 11):
            for i in range(0, 101, 7):
                for k in (d, d + 1, d + 5):
                    a = {winding_index(i, j, d) for j in range(1, d + 1)}
                    b = {winding_index(i + k, j, d) for j in range(1, d + 1)}
                    assert not (a & b)

    def test_points_closer_than_d_share_indices(self):
        d = 4
        a = {winding_index(10, j, d) for j in range(1, d + 1)}
        b = {winding_index(10 + d - 1, j, d) for j in range(1, d + 1)}
        assert a & b

    def test_validation(self):
        with pytest.raises(IndexError):
            winding_index(0, 0, 3)
        with pytest.raises(IndexError):
            winding_index(0, 4, 3)
        with pytest.raises(ValueError):
            winding_index(-1, 1, 3)


class TestDescriptors:
    def test_model_round_trip(self):
        model = InputModel([
            Uniform01(), Bernoulli01(), StdGaussian(),
            Histogram([0, 0.5, 1], [0.3, 0.7], mode="atoms"),
            FiniteSupport([1, 2, 3], [0.2, 0.3, 0.5]),
        ])
        desc = model.to_dict()
        again = InputModel.from_dict(desc)
        assert again.dims == 5
        assert [c.kind for c in again.coords] == [c.kind for c in model.coords]
        assert again.coords[3].mode == "atoms"

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            coordinate_from_dict({"kind": "cauchy"})

    def test_dims_mismatch(self):
        with pytest.raises(ValueError):
            InputModel.from_dict({"d": 3, "coords": [{"kind": "uniform01"}]})

    def test_empty_model_rejected(self):
        with pytest.raises(ValueError):
            InputModel([])
