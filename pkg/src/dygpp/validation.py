"""Input validation for the estimator-style API."""
from __future__ import annotations

import numpy as np

from .events import DataError, EventLog


def check_events(X) -> np.ndarray:
    """Validate a ``(k, 4)`` integer array of ``[passenger, station, label, timestamp]`` rows."""
    if isinstance(X, EventLog):
        return X.to_array()
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise DataError(f"expected event rows of shape (k, 4), got {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise DataError("event rows must hold integers")
    elif arr.dtype.kind not in "iu":
        raise DataError(f"event rows must be integers, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if len(arr):
        if arr[:, :2].min() < 1:
            raise DataError("passenger and station ids must be >= 1")
        if not np.isin(arr[:, 2], (0, 1)).all():
            raise DataError("label outside {0,1}")
        if arr[:, 3].min() < 0:
            raise DataError("negative timestamp")
    return arr


def as_event_log(X, **kwargs) -> EventLog:
    if isinstance(X, EventLog):
        return X
    return EventLog.from_array(check_events(X), **kwargs)


def check_queries(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split query rows into passengers, stations and times.

    Accepts ``(k, 3)`` rows ``[passenger, station, timestamp]`` or ``(k, 4)``
    event rows (the label column is ignored), or an :class:`EventLog`.
    """
    if isinstance(X, EventLog):
        return X.passengers, X.stations, X.timestamps
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[1] not in (3, 4):
        raise DataError(f"expected query rows of shape (k, 3) or (k, 4), got {arr.shape}")
    arr = arr.astype(np.int64)
    return arr[:, 0], arr[:, 1], arr[:, -1]
