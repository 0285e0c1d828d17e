"""Frequency-count baselines: global TOP and Personal TOP.

Transitions are consecutive events of one passenger with different labels:
board -> alight gives the alighting station seen after boarding at a station,
alight -> board gives the next boarding station after alighting at a station.
A candidate is scored by its relative frequency among the transitions that
start from the passenger's last status (label and station) before the query
time. Keys without data back off to the status-only marginal.
"""
from __future__ import annotations

from collections import Counter, defaultdict

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .events import BOARD, EventLog
from .validation import as_event_log

# key for the status-only marginal
ANY_STATION = 0


class TransitionCounter:
    """station counts keyed by ``(direction, last_station)``; ``ANY_STATION`` pools all stations."""

    def __init__(self):
        self.tables: dict[tuple[int, int], Counter] = defaultdict(Counter)
        self.totals: dict[tuple[int, int], int] = defaultdict(int)

    def add(self, direction: int, last_station: int, next_station: int) -> None:
        for key in ((direction, last_station), (direction, ANY_STATION)):
            self.tables[key][next_station] += 1
            self.totals[key] += 1

    def has(self, direction: int, last_station: int) -> bool:
        return self.totals.get((direction, last_station), 0) > 0

    def score(self, direction: int, last_station: int, candidate: int) -> float:
        key = (direction, last_station)
        total = self.totals.get(key, 0)
        if total == 0:
            return 0.0
        return self.tables[key].get(candidate, 0) / total

    def __len__(self) -> int:
        return sum(v for (d, s), v in self.totals.items() if s == ANY_STATION)


def _transitions(log: EventLog):
    adj = log.passenger_index
    for p in range(1, log.num_passengers + 1):
        lo, hi = adj.span(p)
        labels, stations = adj.labels[lo:hi], adj.neighbors[lo:hi]
        for k in range(hi - lo - 1):
            if labels[k] != labels[k + 1]:
                yield p, int(labels[k]), int(stations[k]), int(stations[k + 1])


def last_status(history: EventLog, passengers, times) -> tuple[np.ndarray, np.ndarray]:
    """Label and station of each passenger's latest event strictly before ``times``.

    Passengers without history get direction ``BOARD`` and station ``ANY_STATION``.
    """
    adj = history.passenger_index
    passengers = np.asarray(passengers, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    labels = np.full(len(passengers), BOARD, dtype=np.int64)
    stations = np.full(len(passengers), ANY_STATION, dtype=np.int64)
    for i, (p, t) in enumerate(zip(passengers.tolist(), times.tolist())):
        if p < 1 or p > history.num_passengers:
            continue
        lo, hi = adj.span(p)
        k = lo + int(np.searchsorted(adj.times[lo:hi], t, side="left")) - 1
        if k >= lo:
            labels[i] = adj.labels[k]
            stations[i] = adj.neighbors[k]
    return labels, stations


def _lookup(counter: TransitionCounter, direction: int, station: int, candidate: int) -> float | None:
    if counter.has(direction, station):
        return counter.score(direction, station, candidate)
    if counter.has(direction, ANY_STATION):
        return counter.score(direction, ANY_STATION, candidate)
    return None


class TopBaseline(BaseEstimator):
    """Global TOP: one transition counter shared by all passengers."""

    def fit(self, X, y=None):
        log = as_event_log(X)
        self.counter_ = TransitionCounter()
        for _, direction, s_from, s_to in _transitions(log):
            self.counter_.add(direction, s_from, s_to)
        self.history_ = log
        return self

    def _check_fitted(self):
        if not hasattr(self, "counter_"):
            raise NotFittedError(f"{type(self).__name__} must be fitted before scoring")

    def score_status(self, passenger: int, direction: int, station: int, candidate: int) -> float:
        self._check_fitted()
        s = _lookup(self.counter_, direction, station, candidate)
        return 0.0 if s is None else s

    def decision_function(self, history: EventLog | None, passengers, stations, times) -> np.ndarray:
        """Scores for ``(passenger, station, time)`` queries given the event history."""
        self._check_fitted()
        history = self.history_ if history is None else history
        directions, last = last_status(history, passengers, times)
        return np.array([self.score_status(int(p), int(d), int(s), int(c)) for p, d, s, c in
                         zip(np.asarray(passengers), directions, last, np.asarray(stations))])


class PersonalTopBaseline(TopBaseline):
    """Personal TOP: per-passenger counters, falling back to the global one for unseen passengers."""

    def fit(self, X, y=None):
        super().fit(X)
        self.personal_ = defaultdict(TransitionCounter)
        for p, direction, s_from, s_to in _transitions(self.history_):
            self.personal_[p].add(direction, s_from, s_to)
        self.personal_ = dict(self.personal_)
        return self

    def score_status(self, passenger: int, direction: int, station: int, candidate: int) -> float:
        self._check_fitted()
        own = self.personal_.get(passenger)
        if own is not None:
            s = _lookup(own, direction, station, candidate)
            if s is not None:
                return s
        return super().score_status(passenger, direction, station, candidate)
