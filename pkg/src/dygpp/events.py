"""Interaction stream ingestion, indexing, splitting and negative sampling.

Events are held column-wise in numpy arrays. Passenger and station ids are
remapped to dense ranges ``1..n`` and ``1..m``; id ``0`` is the padding
sentinel used by the neighbor sampler and never names a real node.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple

import numpy as np

BOARD = 0
ALIGHT = 1

PASSENGER = "passenger"
STATION = "station"

_HEADERS = {("u", "i", "label", "ts"), ("passenger_id", "station_id", "label", "timestamp")}


class DataError(ValueError):
    """Raised for malformed or inconsistent event data."""


class Interaction(NamedTuple):
    passenger_id: int
    station_id: int
    label: int
    timestamp: int


class _Adjacency:
    """CSR-style per-node view of the event stream, time-sorted per node."""

    __slots__ = ("ptr", "positions", "times", "neighbors", "labels")

    def __init__(self, owners: np.ndarray, counterparts: np.ndarray, labels: np.ndarray,
                 timestamps: np.ndarray, num_nodes: int):
        # stable argsort on an already time-sorted stream keeps each node's list time-sorted
        order = np.argsort(owners, kind="stable")
        counts = np.bincount(owners, minlength=num_nodes + 1)
        self.ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self.positions = order.astype(np.int64)
        self.times = timestamps[order]
        self.neighbors = counterparts[order]
        self.labels = labels[order]

    def positions_of(self, node: int) -> np.ndarray:
        return self.positions[self.ptr[node]:self.ptr[node + 1]]

    def span(self, node: int) -> tuple[int, int]:
        return int(self.ptr[node]), int(self.ptr[node + 1])


class EventLog:
    """Immutable, chronologically sorted interaction stream with per-node indexes.

    Parameters
    ----------
    passengers, stations, labels, timestamps : array-like of int
        Dense ids (``1..n`` / ``1..m``), labels in {0, 1} and non-negative
        integer timestamps. Rows are stable-sorted by timestamp.
    num_passengers, num_stations : int, optional
        Size of the id spaces. Defaults to the largest id present.
    passenger_ids, station_ids : array-like, optional
        Original ids; ``passenger_ids[k - 1]`` is the original id of dense id ``k``.
    """

    def __init__(self, passengers, stations, labels, timestamps, *,
                 num_passengers: int | None = None, num_stations: int | None = None,
                 passenger_ids=None, station_ids=None):
        p = np.asarray(passengers, dtype=np.int64).reshape(-1)
        s = np.asarray(stations, dtype=np.int64).reshape(-1)
        lab = np.asarray(labels, dtype=np.int64).reshape(-1)
        t = np.asarray(timestamps, dtype=np.int64).reshape(-1)
        if not (len(p) == len(s) == len(lab) == len(t)):
            raise DataError("event columns have different lengths")
        if len(p):
            if p.min() < 1 or s.min() < 1:
                raise DataError("dense ids must be >= 1 (0 is reserved for padding)")
            if not np.isin(lab, (BOARD, ALIGHT)).all():
                raise DataError("label outside {0,1}")
            if t.min() < 0:
                raise DataError("negative timestamp")
        order = np.argsort(t, kind="stable")
        self.passengers = p[order]
        self.stations = s[order]
        self.labels = lab[order]
        self.timestamps = t[order]
        for arr in (self.passengers, self.stations, self.labels, self.timestamps):
            arr.setflags(write=False)

        n = int(p.max()) if len(p) else 0
        m = int(s.max()) if len(s) else 0
        self.num_passengers = n if num_passengers is None else int(num_passengers)
        self.num_stations = m if num_stations is None else int(num_stations)
        if n > self.num_passengers or m > self.num_stations:
            raise DataError("event ids exceed the declared id space")

        self.passenger_ids = (np.arange(1, self.num_passengers + 1) if passenger_ids is None
                              else np.asarray(passenger_ids, dtype=np.int64))
        self.station_ids = (np.arange(1, self.num_stations + 1) if station_ids is None
                            else np.asarray(station_ids, dtype=np.int64))
        if len(self.passenger_ids) != self.num_passengers or len(self.station_ids) != self.num_stations:
            raise DataError("remap table length does not match the id space")

        self.passenger_index = _Adjacency(self.passengers, self.stations, self.labels,
                                          self.timestamps, self.num_passengers)
        self.station_index = _Adjacency(self.stations, self.passengers, self.labels,
                                        self.timestamps, self.num_stations)

    # -- construction helpers -------------------------------------------------
    @classmethod
    def from_array(cls, X, **kwargs) -> "EventLog":
        """Build from a ``(k, 4)`` array of ``[passenger, station, label, timestamp]`` rows."""
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != 4:
            raise DataError(f"expected an array of shape (k, 4), got {X.shape}")
        return cls(X[:, 0], X[:, 1], X[:, 2], X[:, 3], **kwargs)

    def take(self, positions) -> "EventLog":
        """Sub-log of the given positions, sharing id spaces and remap tables."""
        idx = np.sort(np.asarray(positions, dtype=np.int64))
        return EventLog(self.passengers[idx], self.stations[idx], self.labels[idx],
                        self.timestamps[idx], num_passengers=self.num_passengers,
                        num_stations=self.num_stations, passenger_ids=self.passenger_ids,
                        station_ids=self.station_ids)

    def concat(self, other: "EventLog") -> "EventLog":
        return EventLog(np.concatenate([self.passengers, other.passengers]),
                        np.concatenate([self.stations, other.stations]),
                        np.concatenate([self.labels, other.labels]),
                        np.concatenate([self.timestamps, other.timestamps]),
                        num_passengers=self.num_passengers, num_stations=self.num_stations,
                        passenger_ids=self.passenger_ids, station_ids=self.station_ids)

    # -- accessors --------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, k: int) -> Interaction:
        return Interaction(int(self.passengers[k]), int(self.stations[k]),
                           int(self.labels[k]), int(self.timestamps[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventLog):
            return NotImplemented
        return (self.num_passengers == other.num_passengers
                and self.num_stations == other.num_stations
                and np.array_equal(self.to_array(), other.to_array())
                and np.array_equal(self.passenger_ids, other.passenger_ids)
                and np.array_equal(self.station_ids, other.station_ids))

    __hash__ = None

    def to_array(self) -> np.ndarray:
        return np.stack([self.passengers, self.stations, self.labels, self.timestamps], axis=1)

    def index(self, kind: str) -> _Adjacency:
        if kind == PASSENGER:
            return self.passenger_index
        if kind == STATION:
            return self.station_index
        raise ValueError(f"unknown node kind {kind!r}")

    def dense_passenger(self, original_id: int) -> int:
        return _lookup(self.passenger_ids, original_id, "passenger")

    def dense_station(self, original_id: int) -> int:
        return _lookup(self.station_ids, original_id, "station")

    @property
    def span(self) -> int:
        return int(self.timestamps[-1] - self.timestamps[0]) if len(self) else 0

    def summary(self) -> dict:
        return {"events": len(self), "passengers": self.num_passengers,
                "stations": self.num_stations, "span": self.span,
                "t_min": int(self.timestamps[0]) if len(self) else None,
                "t_max": int(self.timestamps[-1]) if len(self) else None}

    def __repr__(self) -> str:
        return f"EventLog(events={len(self)}, n={self.num_passengers}, m={self.num_stations})"


def _lookup(table: np.ndarray, original_id: int, what: str) -> int:
    hits = np.flatnonzero(table == original_id)
    if not len(hits):
        raise DataError(f"unknown {what} id {original_id}")
    return int(hits[0]) + 1


# -- event-CSV -------------------------------------------------------------------

def _open_text(source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        return open(source, encoding="utf-8", newline="")
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_events(source) -> EventLog:
    """Parse event-CSV text (a path, a string or a text stream) into an :class:`EventLog`.

    Records are ``passenger_id,station_id,label,timestamp``; a header line is
    optional. Original ids are remapped to dense ranks in ascending id order.
    """
    stream = _open_text(source)
    try:
        rows = []
        for lineno, rec in enumerate(csv.reader(stream), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            fields = [f.strip() for f in rec]
            if lineno == 1 and tuple(f.lower() for f in fields) in _HEADERS:
                continue
            if len(fields) != 4:
                raise DataError(f"malformed record at line {lineno}: expected 4 fields")
            try:
                u, s, lab, t = (int(f) for f in fields)
            except ValueError:
                raise DataError(f"malformed record at line {lineno}: non-integer field") from None
            if lab not in (BOARD, ALIGHT):
                raise DataError(f"label outside {{0,1}} at line {lineno}")
            if t < 0:
                raise DataError(f"negative timestamp at line {lineno}")
            rows.append((u, s, lab, t))
    finally:
        if stream is not source:
            stream.close()
    if not rows:
        return EventLog([], [], [], [])
    raw = np.asarray(rows, dtype=np.int64)
    passenger_ids, p_dense = np.unique(raw[:, 0], return_inverse=True)
    station_ids, s_dense = np.unique(raw[:, 1], return_inverse=True)
    return EventLog(p_dense + 1, s_dense + 1, raw[:, 2], raw[:, 3],
                    passenger_ids=passenger_ids, station_ids=station_ids)


def write_events(log: EventLog, stream: IO[str] | None = None, *, header: bool = False,
                 original_ids: bool = True) -> str | None:
    """Serialize to event-CSV. Returns the text when no stream is given."""
    out = io.StringIO() if stream is None else stream
    if header:
        out.write("u,i,label,ts\n")
    p = log.passenger_ids[log.passengers - 1] if original_ids else log.passengers
    s = log.station_ids[log.stations - 1] if original_ids else log.stations
    for row in zip(p.tolist(), s.tolist(), log.labels.tolist(), log.timestamps.tolist()):
        out.write("%d,%d,%d,%d\n" % row)
    return out.getvalue() if stream is None else None


def write_remap(log: EventLog, prefix: str) -> tuple[str, str]:
    """Write ``<prefix>.passengers.csv`` and ``<prefix>.stations.csv`` sidecars."""
    paths = []
    for what, table in (("passengers", log.passenger_ids), ("stations", log.station_ids)):
        path = f"{prefix}.{what}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("original_id,dense_id\n")
            for dense, orig in enumerate(table.tolist(), start=1):
                fh.write(f"{orig},{dense}\n")
        paths.append(path)
    return paths[0], paths[1]


# -- splitting -----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSplit:
    """Chronological train/val/test slices plus the withheld inductive stations.

    ``full`` is the post-mask log (train ∪ val ∪ test); it is the history that
    neighbor sequences are drawn from during evaluation.
    """

    train: EventLog
    val: EventLog
    test: EventLog
    full: EventLog
    inductive_stations: frozenset = field(default_factory=frozenset)

    def part(self, name: str) -> EventLog:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def _floor(x: float) -> int:
    return int(math.floor(x + 1e-9))


def chronological_split(log: EventLog, ratios: Iterable[float] = (0.7, 0.15, 0.15),
                        inductive_fraction: float = 0.0, seed: int = 0) -> DatasetSplit:
    """Split by event count into contiguous chronological slices.

    Train and val sizes are floored; the remainder goes to test. A seeded
    ``inductive_fraction`` of the stations seen in val or test is withheld:
    train events touching them are dropped.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    if not 0.0 <= inductive_fraction <= 1.0:
        raise ValueError("inductive_fraction must lie in [0, 1]")
    total = len(log)
    if total == 0:
        raise DataError("cannot split an empty log")
    n_train = _floor(ratios[0] * total)
    n_val = _floor(ratios[1] * total)
    train_pos = np.arange(n_train)
    val_pos = np.arange(n_train, n_train + n_val)
    test_pos = np.arange(n_train + n_val, total)

    eligible = np.unique(log.stations[n_train:])
    k = _floor(inductive_fraction * len(eligible))
    rng = np.random.default_rng(seed)
    hidden = np.sort(rng.choice(eligible, size=k, replace=False)) if k else np.empty(0, np.int64)
    if k:
        train_pos = train_pos[~np.isin(log.stations[:n_train], hidden)]
    if len(train_pos) == 0:
        raise DataError("train slice is empty after splitting/masking")
    kept = np.concatenate([train_pos, val_pos, test_pos])
    return DatasetSplit(train=log.take(train_pos), val=log.take(val_pos), test=log.take(test_pos),
                        full=log.take(kept),
                        inductive_stations=frozenset(int(x) for x in hidden))


# -- negative sampling ---------------------------------------------------------

def sample_negatives(num_stations: int, stations, rng: np.random.Generator,
                     candidates=None) -> np.ndarray:
    """Uniformly corrupt each station id to a different station.

    Draws come from ``1..num_stations``, or from ``candidates`` when given
    (training restricts them to stations seen in the train slice).
    """
    stations = np.asarray(stations, dtype=np.int64)
    if candidates is None:
        if num_stations < 2:
            raise DataError("negative sampling needs at least 2 stations")
        draw = rng.integers(1, num_stations, size=stations.shape)
        return draw + (draw >= stations)
    pool = np.unique(np.asarray(candidates, dtype=np.int64))
    if len(pool) < 2:
        raise DataError("negative sampling needs at least 2 candidate stations")
    idx = np.searchsorted(pool, stations)
    present = pool[np.minimum(idx, len(pool) - 1)] == stations
    draw = rng.integers(0, len(pool) - present, size=stations.shape)
    return pool[draw + (present & (draw >= idx))]


def sample_negative(log: EventLog, positive: Interaction, rng: np.random.Generator) -> Interaction:
    """Station-corrupted copy of ``positive``; the passenger, label and time are kept."""
    s_neg = int(sample_negatives(log.num_stations, [positive.station_id], rng)[0])
    return positive._replace(station_id=s_neg)
