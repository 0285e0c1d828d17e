"""Time-interval batching and most-recent neighbor sequences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import PASSENGER, STATION, EventLog

MAX_SEQUENCE_LENGTH = 32


@dataclass(frozen=True)
class TimeBatch:
    """Half-open slice ``[start, stop)`` of a chronological event stream."""

    start: int
    stop: int
    span: int

    def __len__(self) -> int:
        return self.stop - self.start

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)


def partition_time_batches(timestamps, time_gap: float) -> list[TimeBatch]:
    """Greedy left-to-right partition so that each batch spans at most ``time_gap``.

    A batch closes as soon as the next event would push ``t_last - t_first``
    above ``time_gap``.
    """
    if time_gap <= 0:
        raise ValueError("time_gap must be positive")
    if isinstance(timestamps, EventLog):
        timestamps = timestamps.timestamps
    t = np.asarray(timestamps)
    if len(t) > 1 and np.any(np.diff(t) < 0):
        raise ValueError("timestamps must be sorted")
    batches = []
    start = 0
    while start < len(t):
        stop = int(np.searchsorted(t, t[start] + time_gap, side="right"))
        batches.append(TimeBatch(start, stop, int(t[stop - 1] - t[start])))
        start = stop
    return batches


def _other(kind: str) -> str:
    return STATION if kind == PASSENGER else PASSENGER


@dataclass
class SequenceBatch:
    """Padded neighbor sequences for a batch of owners, all of one node kind.

    Position 0 of every row is the owner itself; later positions hold the
    most recent counterparts in ascending time order, then zero padding.
    """

    kind: str
    ids: np.ndarray        # (B, N) int; 0 = padding
    labels: np.ndarray     # (B, N) int; 0 for self and padding
    times: np.ndarray      # (B, N) int; reference time for self, 0 for padding
    padding: np.ndarray    # (B, N) bool
    ref_times: np.ndarray  # (B,)

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def length(self) -> int:
        return self.ids.shape[1]

    def delta_t(self) -> np.ndarray:
        """``t - t'`` per position; 0 for self and padding entries."""
        dt = self.ref_times[:, None] - self.times
        return np.where(self.padding, 0, dt).astype(np.float64)

    def take(self, idx) -> "SequenceBatch":
        return SequenceBatch(self.kind, self.ids[idx], self.labels[idx], self.times[idx],
                             self.padding[idx], self.ref_times[idx])

    def row(self, i: int) -> "NeighborSequence":
        return NeighborSequence(owner_id=int(self.ids[i, 0]), owner_kind=self.kind,
                                time=int(self.ref_times[i]), ids=self.ids[i].copy(),
                                labels=self.labels[i].copy(), times=self.times[i].copy(),
                                padding=self.padding[i].copy())


@dataclass
class NeighborSequence:
    owner_id: int
    owner_kind: str
    time: int
    ids: np.ndarray
    labels: np.ndarray
    times: np.ndarray
    padding: np.ndarray

    @property
    def neighbor_kind(self) -> str:
        return _other(self.owner_kind)

    @property
    def entries(self) -> list[tuple[int, int, int, bool]]:
        return list(zip(self.ids.tolist(), self.labels.tolist(), self.times.tolist(),
                        self.padding.tolist()))

    def __len__(self) -> int:
        return len(self.ids)

    def as_batch(self) -> SequenceBatch:
        return SequenceBatch(self.owner_kind, self.ids[None], self.labels[None], self.times[None],
                             self.padding[None], np.array([self.time], dtype=np.int64))


def _check_length(length: int) -> None:
    if length < 2:
        raise ValueError("sequence length must be >= 2 (self slot + one neighbor)")
    if length > MAX_SEQUENCE_LENGTH:
        raise ValueError(f"sequence length {length} exceeds the cap of {MAX_SEQUENCE_LENGTH}")


def sample_sequences(log: EventLog, node_ids, kind: str, times, length: int) -> SequenceBatch:
    """Vectorised :func:`sample_recent_neighbors` over many ``(node, t)`` queries."""
    _check_length(length)
    node_ids = np.asarray(node_ids, dtype=np.int64).reshape(-1)
    times = np.asarray(times, dtype=np.int64).reshape(-1)
    adj = log.index(kind)
    B = len(node_ids)
    ids = np.zeros((B, length), dtype=np.int64)
    labels = np.zeros((B, length), dtype=np.int64)
    seq_t = np.zeros((B, length), dtype=np.int64)
    padding = np.ones((B, length), dtype=bool)
    ids[:, 0] = node_ids
    seq_t[:, 0] = times
    padding[:, 0] = False
    k = length - 1
    num_nodes = len(adj.ptr) - 1
    for i in range(B):
        node = node_ids[i]
        if node < 1 or node >= num_nodes:
            continue
        lo, hi = adj.ptr[node], adj.ptr[node + 1]
        # binary search: events strictly before the query time
        end = lo + int(np.searchsorted(adj.times[lo:hi], times[i], side="left"))
        begin = max(lo, end - k)
        c = end - begin
        if c:
            ids[i, 1:1 + c] = adj.neighbors[begin:end]
            labels[i, 1:1 + c] = adj.labels[begin:end]
            seq_t[i, 1:1 + c] = adj.times[begin:end]
            padding[i, 1:1 + c] = False
    return SequenceBatch(kind, ids, labels, seq_t, padding, times)


def sample_recent_neighbors(log: EventLog, node_id: int, kind: str, t: int,
                            length: int) -> NeighborSequence:
    """Self entry followed by the ``length - 1`` most recent interactions strictly before ``t``."""
    return sample_sequences(log, [node_id], kind, [t], length).row(0)
