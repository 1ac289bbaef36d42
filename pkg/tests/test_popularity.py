import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairtail.dataset import build_matrix, identity_provider_map, load_provider_map, scale_ratings
from fairtail.errors import DataError, DegeneratePartition, ConfigError
from fairtail.popularity import (
    PopularityTable,
    compute_popularity,
    partition_long_tail,
    popularity_rows,
    recommendation_popularity,
)
from fairtail.recommenders import RecommenderConfig, fit, recommend_all

from conftest import records_from
from oracles import brute_partition


def test_shares_normalized():
    m = build_matrix(records_from([("u1", "s1", 20), ("u2", "s2", 10), ("u2", "s3", 10)]))
    pm = load_provider_map("s1\ta1\ns2\ta2\ns3\ta1\n", m)
    t = compute_popularity(m, pm)
    assert t.counts.tolist() == [30, 10]
    assert t.shares.tolist() == [0.75, 0.25]
    assert t.side == "data"


def test_single_provider():
    m = build_matrix(records_from([("u1", "s1", 3), ("u2", "s2", 4)]))
    t = compute_popularity(m, load_provider_map("s1\ta\ns2\ta\n", m))
    assert t.shares.tolist() == [1.0]


def test_counts_events_not_listeners():
    m = build_matrix(records_from([("u1", "x", 9), ("u2", "y", 1), ("u3", "y", 1)]))
    assert compute_popularity(m, identity_provider_map(m)).counts.tolist() == [9, 2]


def test_scaled_matrix_rejected():
    m = build_matrix(records_from([("u1", "x", 9), ("u1", "y", 2)]))
    with pytest.raises(DataError):
        compute_popularity(scale_ratings(m, "log"), identity_provider_map(m))


@pytest.mark.parametrize("counts", [[], [0, 0], [-1, 3]])
def test_table_validation(counts):
    with pytest.raises((ValueError, DataError)):
        PopularityTable(np.array(counts, dtype=np.int64))


class TestRecommendationSide:
    def test_two_users_same_list(self):
        m = build_matrix(records_from([("u1", "i1", 5), ("u1", "i2", 3), ("u2", "i1", 1), ("u2", "i2", 1)]))
        recs = recommend_all(fit(RecommenderConfig("mostpop", n=2), m))
        t = recommendation_popularity(recs, identity_provider_map(m))
        assert t.counts.tolist() == [2, 2]
        assert t.shares.tolist() == [0.5, 0.5]
        assert t.side == "recommendations"

    def test_mostpop_two_of_three(self):
        m = build_matrix(records_from([("u1", "i1", 5), ("u2", "i2", 3), ("u3", "i3", 1)]))
        recs = recommend_all(fit(RecommenderConfig("mostpop", n=2), m))
        t = recommendation_popularity(recs, identity_provider_map(m))
        assert np.count_nonzero(t.shares) == 2
        assert t.shares[2] == 0.0
        assert t.total == 6


class TestPartition:
    def test_hand_trace(self):
        p = partition_long_tail(PopularityTable(np.array([5, 3, 1, 1])), (0.3, 0.8))
        assert p.as_sets() == ({0}, {1}, {2, 3})
        assert p.sizes() == (1, 1, 2)

    def test_uniform_ten(self):
        p = partition_long_tail(PopularityTable(np.ones(10, dtype=np.int64)), (0.3, 0.7))
        assert p.as_sets() == ({0, 1, 2}, {3, 4, 5, 6}, {7, 8, 9})

    def test_unsorted_input_and_ties(self):
        # descending: p3(6) p1(4) p2(4) p0(1) p4(1); ties by index
        p = partition_long_tail(PopularityTable(np.array([1, 4, 4, 6, 1])), (0.3, 0.7))
        assert p.as_sets() == ({3}, {1, 2}, {0, 4})

    def test_degenerate(self):
        with pytest.raises(DegeneratePartition):
            partition_long_tail(PopularityTable(np.array([8, 1, 1])), (0.3, 0.7))
        with pytest.raises(DegeneratePartition):
            partition_long_tail(PopularityTable(np.array([7])), (0.3, 0.7))

    @pytest.mark.parametrize("b", [(0.7, 0.3), (0.0, 0.5), (0.5, 1.0), (0.4, 0.4)])
    def test_invalid_boundaries(self, b):
        with pytest.raises(ConfigError):
            partition_long_tail(PopularityTable(np.arange(1, 10)), b)

    def test_rejects_recommendation_side(self):
        with pytest.raises(ValueError):
            partition_long_tail(PopularityTable(np.arange(1, 10), side="recommendations"))

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.integers(0, 30), min_size=3, max_size=60).filter(lambda c: sum(c) > 0),
           st.floats(0.01, 0.6), st.floats(0.05, 0.39), st.integers(1, 50))
    def test_oracle_and_rescaling(self, counts, b1, gap, scale):
        b2 = min(b1 + gap, 0.99)
        table = PopularityTable(np.array(counts))
        expected = brute_partition(counts, b1, b2)
        if expected is None:
            with pytest.raises(DegeneratePartition):
                partition_long_tail(table, (b1, b2))
            return
        p = partition_long_tail(table, (b1, b2))
        assert p.as_sets() == expected
        scaled = partition_long_tail(PopularityTable(np.array(counts) * scale), (b1, b2))
        assert scaled.as_sets() == expected
        # every provider in exactly one group; head counts dominate mid, mid dominates tail
        labels = p.labels(len(counts))
        assert all(labels)
        c = np.array(counts)
        assert c[p.head].min() >= c[p.mid].max() >= c[p.tail].max()


def test_popularity_rows():
    rows = popularity_rows(PopularityTable(np.array([10, 30])), ["a2", "a1"])
    assert rows == [(1, "a1", 30, 0.75, 0.75), (2, "a2", 10, 0.25, 1.0)]
