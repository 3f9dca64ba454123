import numpy as np
import pytest

from meandim import RandomStream


def test_same_key_bit_identical():
    a = RandomStream(12345, stream=7).generator.standard_normal(1000)
    b = RandomStream(12345, stream=7).generator.standard_normal(1000)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = RandomStream(12345, stream=0).generator.random(100)
    b = RandomStream(12345, stream=1).generator.random(100)
    c = RandomStream(12346, stream=0).generator.random(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_split_is_pure_and_deterministic():
    parent = RandomStream(9, stream=2)
    child1 = parent.split(3, 1, 0)
    before = parent.generator.random(10)
    child2 = parent.split(3, 1, 0)
    assert np.array_equal(
        child1.generator.random(10), child2.generator.random(10)
    )
    # splitting did not consume parent state
    assert np.array_equal(before, RandomStream(9, stream=2).generator.random(10))


def test_split_children_independent_addresses():
    parent = RandomStream(9)
    a = parent.split(0, 0).generator.random(50)
    b = parent.split(0, 1).generator.random(50)
    c = parent.split(1, 0).generator.random(50)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_streams_statistically_uncorrelated():
    n = 200_000
    a = RandomStream(42, stream=0).generator.standard_normal(n)
    b = RandomStream(42, stream=1).generator.standard_normal(n)
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 4 / np.sqrt(n)


def test_large_ids_accepted():
    s = RandomStream(2 ** 63 + 11, stream=2 ** 63 + 3).split(2 ** 40)
    assert s.generator.random(3).shape == (3,)


def test_negative_ids_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(1, stream=-2)
