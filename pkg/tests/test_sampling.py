import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dygpp.events import PASSENGER, STATION, EventLog
from dygpp.sampling import (MAX_SEQUENCE_LENGTH, partition_time_batches, sample_recent_neighbors,
                            sample_sequences)

from .conftest import random_log
from .oracles import batches_oracle, neighbors_oracle


def test_batches_example():
    ts = [0, 10, 999, 1000, 1001, 5000, 5000, 7000]
    got = [(b.start, b.stop) for b in partition_time_batches(ts, 1000)]
    assert got == [(0, 4), (4, 5), (5, 7), (7, 8)]


def test_batches_reject_unsorted_and_bad_gap():
    with pytest.raises(ValueError):
        partition_time_batches([3, 1], 10)
    with pytest.raises(ValueError):
        partition_time_batches([1, 3], 0)
    assert partition_time_batches([], 5) == []


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 50), max_size=60), st.integers(1, 40))
def test_batches_match_sequential_scan(steps, gap):
    ts = np.cumsum(steps)
    batches = partition_time_batches(ts, gap)
    assert [list(range(b.start, b.stop)) for b in batches] == batches_oracle(ts.tolist(), gap)
    assert all(b.span <= gap for b in batches)
    assert sum(len(b) for b in batches) == len(ts)


def test_sequence_layout_self_first_then_recent_then_padding():
    log = EventLog.from_array([[1, 1, 0, 10], [1, 2, 1, 20], [2, 2, 0, 25], [1, 3, 0, 30],
                               [1, 1, 1, 40]])
    seq = sample_recent_neighbors(log, 1, PASSENGER, 40, 5)
    assert seq.entries == [(1, 0, 40, False), (1, 0, 10, False), (2, 1, 20, False),
                           (3, 0, 30, False), (0, 0, 0, True)]
    # only the two most recent survive with one slot fewer
    short = sample_recent_neighbors(log, 1, PASSENGER, 40, 3)
    assert [e[0] for e in short.entries] == [1, 2, 3]
    station = sample_recent_neighbors(log, 2, STATION, 26, 4)
    assert [e[:3] for e in station.entries] == [(2, 0, 26), (1, 1, 20), (2, 0, 25), (0, 0, 0)]
    assert station.neighbor_kind == PASSENGER


def test_unknown_node_gets_only_self_and_padding():
    log = EventLog.from_array([[1, 1, 0, 10]], num_passengers=3)
    seq = sample_recent_neighbors(log, 3, PASSENGER, 100, 4)
    assert seq.padding.tolist() == [False, True, True, True]


def test_length_cap():
    log = EventLog.from_array([[1, 1, 0, 10]])
    sample_sequences(log, [1], PASSENGER, [20], MAX_SEQUENCE_LENGTH)
    with pytest.raises(ValueError, match="cap"):
        sample_sequences(log, [1], PASSENGER, [20], MAX_SEQUENCE_LENGTH + 1)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.sampled_from([PASSENGER, STATION]))
def test_neighbors_match_full_scan(seed, length, kind):
    rng = np.random.default_rng(seed)
    log = random_log(rng, n=3, m=3, k=int(rng.integers(1, 25)), t_max=15)
    rows = log.to_array().tolist()
    node = int(rng.integers(1, 4))
    t = int(rng.integers(0, 17))
    if (kind == PASSENGER and node > log.num_passengers) or (kind == STATION and node > log.num_stations):
        return
    seq = sample_recent_neighbors(log, node, kind, t, length)
    want = neighbors_oracle(rows, node, kind, t, length)
    got = [(i, lab, ts) for i, lab, ts, pad in seq.entries[1:] if not pad]
    assert got == want
    assert all(ts < t for _, _, ts in got)
    assert seq.padding.tolist() == [False] * (1 + len(want)) + [True] * (length - 1 - len(want))
