"""Per-position feature encoders for neighbor sequences.

These are the plain (non-differentiable) forms. :mod:`dygpp.model` records
the same computations on a tape so that gradients flow to the trainable
pieces (``omega``, the co-occurrence map ``f`` and the projection).
"""
from __future__ import annotations

import numpy as np

from .events import PASSENGER
from .sampling import NeighborSequence, SequenceBatch


def init_omega(dim_time: int) -> np.ndarray:
    """Geometrically spread frequencies ``1 / 10**((k-1) * 10 / d)`` for ``k = 1..d``."""
    if dim_time < 1:
        raise ValueError("dim_time must be >= 1")
    return 1.0 / 10.0 ** (np.arange(dim_time, dtype=np.float64) * 10.0 / dim_time)


def encode_time(delta_t, omega, scale: float = 1.0) -> np.ndarray:
    """``sqrt(1/d) * cos(omega * scale * delta_t)``; broadcasts over leading dims of ``delta_t``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    omega = np.asarray(omega, dtype=np.float64)
    dt = np.asarray(delta_t, dtype=np.float64)
    return np.sqrt(1.0 / omega.shape[-1]) * np.cos(dt[..., None] * scale * omega)


def edge_values(seq: NeighborSequence | SequenceBatch) -> np.ndarray:
    """Raw scalar edge feature: board -> -1, alight -> +1, self and padding -> 0."""
    labels = np.asarray(seq.labels)
    vals = np.where(labels == 1, 1.0, -1.0)
    vals = np.where(np.asarray(seq.padding), 0.0, vals)
    vals[..., 0] = 0.0
    return vals


def encode_edges(seq: NeighborSequence | SequenceBatch, width: int) -> np.ndarray:
    """Replicate the raw edge scalar across ``width`` columns."""
    vals = edge_values(seq)
    return np.repeat(vals[..., None], width, axis=-1)


def _keys(ids: np.ndarray, padding: np.ndarray, owner_is_passenger: bool) -> np.ndarray:
    # passenger and station ids live in separate namespaces: key = 2*id + kind bit
    own_bit = 0 if owner_is_passenger else 1
    bits = np.full(ids.shape, 1 - own_bit, dtype=np.int64)
    bits[..., 0] = own_bit
    return np.where(padding, -1, ids * 2 + bits)


def cooccurrence_counts(a: SequenceBatch, b: SequenceBatch) -> tuple[np.ndarray, np.ndarray]:
    """Batched co-occurrence counts; returns two ``(B, N, 2)`` float arrays."""
    ka = _keys(a.ids, a.padding, a.kind == PASSENGER)
    kb = _keys(b.ids, b.padding, b.kind == PASSENGER)
    co_a = np.stack([_count(ka, ka), _count(ka, kb)], axis=-1)
    co_b = np.stack([_count(kb, kb), _count(kb, ka)], axis=-1)
    return co_a.astype(np.float64), co_b.astype(np.float64)


def _count(keys: np.ndarray, pool: np.ndarray) -> np.ndarray:
    hits = (keys[:, :, None] == pool[:, None, :]) & (pool[:, None, :] >= 0)
    return np.where(keys >= 0, hits.sum(axis=-1), 0)


def compute_cooccurrence(seq_u: NeighborSequence, seq_s: NeighborSequence) -> tuple[np.ndarray, np.ndarray]:
    """Co-occurrence matrices for one candidate pair.

    Row ``i`` of the first result is ``[count of x in seq_u, count of x in
    seq_s]`` where ``x`` is the id at position ``i`` of ``seq_u`` (and
    symmetrically for the second). Padding rows are ``[0, 0]``. Sequences
    may have different lengths.
    """
    ka = _keys(seq_u.ids[None], seq_u.padding[None], seq_u.owner_kind == PASSENGER)
    kb = _keys(seq_s.ids[None], seq_s.padding[None], seq_s.owner_kind == PASSENGER)
    co_u = np.stack([_count(ka, ka), _count(ka, kb)], axis=-1)[0]
    co_s = np.stack([_count(kb, kb), _count(kb, ka)], axis=-1)[0]
    return co_u.astype(np.int64), co_s.astype(np.int64)


def encode_cooccurrence(co, weight, bias, *, use_self: bool = True,
                        use_cross: bool = True) -> np.ndarray:
    """``f(own) + f(cross)`` with one shared affine map ``f(x) = x * weight + bias``.

    ``use_self`` / ``use_cross`` zero the corresponding count column before ``f``.
    """
    co = np.asarray(co, dtype=np.float64)
    own = co[..., 0] if use_self else np.zeros(co.shape[:-1])
    cross = co[..., 1] if use_cross else np.zeros(co.shape[:-1])
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    return (own[..., None] * weight + bias) + (cross[..., None] * weight + bias)


def fuse_project(x_node, x_edge, x_time, x_co, weight, bias) -> np.ndarray:
    """Row-wise concatenation of the four feature blocks followed by an affine map."""
    blocks = [np.asarray(x, dtype=np.float64) for x in (x_node, x_edge, x_time, x_co)]
    rows = {b.shape[:-1] for b in blocks}
    if len(rows) != 1:
        raise ValueError(f"feature blocks disagree on row count: {sorted(rows)}")
    cat = np.concatenate(blocks, axis=-1)
    weight = np.asarray(weight, dtype=np.float64)
    if cat.shape[-1] != weight.shape[0]:
        raise ValueError(f"projection expects {weight.shape[0]} input columns, got {cat.shape[-1]}")
    return cat @ weight + bias
