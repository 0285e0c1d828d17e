"""Ranking metrics and the transductive / inductive evaluation driver."""
from __future__ import annotations

import numpy as np

from .events import DataError, DatasetSplit, EventLog, sample_negatives

TRANSDUCTIVE = "transductive"
INDUCTIVE = "inductive"


def _validate(scores, targets) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    targets = np.asarray(targets).reshape(-1)
    if scores.shape != targets.shape:
        raise ValueError("scores and targets differ in length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if not np.all((targets == 0) | (targets == 1)):
        raise ValueError("targets must be 0 or 1")
    return scores, targets.astype(np.int64)


def _ranked_precision(scores, targets):
    order = np.argsort(-scores, kind="stable")
    hits = targets[order]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return hits, precision


def average_precision(scores, targets, *, literal: bool = False) -> float:
    """Ranking AP: mean precision at the rank of each positive.

    Ties keep input order. ``literal=True`` instead averages the running
    precision over every rank position (``1/n * sum_k TP_k / (TP_k + FP_k)``).
    """
    scores, targets = _validate(scores, targets)
    if not targets.any():
        raise ValueError("average precision needs at least one positive")
    hits, precision = _ranked_precision(scores, targets)
    if literal:
        return float(precision.mean())
    return float(precision[hits == 1].sum() / hits.sum())


def auc(scores, targets) -> float:
    """ROC AUC as the Mann-Whitney statistic; tied pairs count one half."""
    scores, targets = _validate(scores, targets)
    n_pos = int(targets.sum())
    n_neg = len(targets) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative examples")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    # average 1-based rank of each tie group
    ends = np.cumsum(counts)
    avg_rank = ends - (counts - 1) / 2.0
    ranks = avg_rank[inverse.reshape(-1)]
    u = ranks[targets == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def select_events(split: DatasetSplit, part: str, mode: str) -> EventLog:
    events = split.part(part)
    if mode == INDUCTIVE:
        keep = np.isin(events.stations, sorted(split.inductive_stations))
        events = events.take(np.flatnonzero(keep))
    elif mode != TRANSDUCTIVE:
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if len(events) == 0:
        raise DataError("empty evaluation set")
    return events


def score_events(scorer, history: EventLog, events: EventLog, negatives) -> tuple[np.ndarray, np.ndarray]:
    """Scores for positives and their negatives from a model or a baseline."""
    if hasattr(scorer, "score_pairs"):
        return scorer.score_pairs(history, events, negatives)
    pos = scorer.decision_function(history, events.passengers, events.stations, events.timestamps)
    neg = scorer.decision_function(history, events.passengers, negatives, events.timestamps)
    return np.asarray(pos, dtype=np.float64), np.asarray(neg, dtype=np.float64)


def interleave(pos, neg) -> tuple[np.ndarray, np.ndarray]:
    """Order examples ``neg_0, pos_0, neg_1, pos_1, ...`` so that score ties favour neither class."""
    scores = np.empty(2 * len(pos))
    scores[0::2] = neg
    scores[1::2] = pos
    targets = np.tile([0, 1], len(pos))
    return scores, targets


def evaluate(scorer, split: DatasetSplit, part: str = "test", mode: str = TRANSDUCTIVE,
             seed: int = 0) -> dict:
    """AP/AUC of ``scorer`` on one slice, with one seeded random negative per positive.

    Neighbor histories come from ``split.full``; inductive mode keeps only
    positives whose station was withheld from training.
    """
    events = select_events(split, part, mode)
    negatives = sample_negatives(split.full.num_stations, events.stations,
                                 np.random.default_rng(seed))
    pos, neg = score_events(scorer, split.full, events, negatives)
    scores, targets = interleave(pos, neg)
    return {"split": part, "mode": mode,
            "ap": average_precision(scores, targets),
            "ap_literal": average_precision(scores, targets, literal=True),
            "auc": auc(scores, targets), "n": int(len(scores))}
