"""Forward/backward kernels for the fixed operation set.

All functions work on float64 numpy arrays. Matrix-shaped inputs may carry
extra leading dimensions; they are flattened for the matmul and restored.
Reductions go through numpy/BLAS in a fixed order, so results are
deterministic for a fixed thread count.
"""
from __future__ import annotations

import numpy as np


class NumericError(FloatingPointError):
    """Raised when a NaN/Inf shows up in a value, gradient or loss."""


def check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
    return x


def affine_forward(X, W, b=None):
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if X.shape[-1] != W.shape[0]:
        raise ValueError(f"shape mismatch: {X.shape} @ {W.shape}")
    out = X @ W
    if b is not None:
        b = np.asarray(b, dtype=np.float64)
        if b.shape[-1] != W.shape[1]:
            raise ValueError(f"bias of width {b.shape[-1]} does not match {W.shape[1]} outputs")
        out = out + b
    return out


def affine_backward(dout, X, W, with_bias: bool = True):
    """Return ``(dX, dW, db)``; ``db`` is ``None`` when ``with_bias`` is false."""
    dout = np.asarray(dout, dtype=np.float64)
    X2 = X.reshape(-1, X.shape[-1])
    d2 = dout.reshape(-1, dout.shape[-1])
    dX = dout @ W.T
    dW = X2.T @ d2
    db = d2.sum(axis=0) if with_bias else None
    return dX, dW, db


def relu(X):
    return np.maximum(X, 0.0)


def relu_backward(dout, X):
    return dout * (X > 0)


def dropout(X, p: float, train: bool, rng: np.random.Generator | None = None, *, shape=None):
    """Inverted dropout. Returns ``(out, mask)``; ``mask`` is ``None`` in eval mode.

    With ``shape`` only the mask is drawn and ``out`` is ``None``.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout probability must lie in [0, 1)")
    if not train or p == 0.0:
        return X, None
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = rng.random(X.shape if shape is None else shape, dtype=np.float32) >= p
    mask = keep * (1.0 / (1.0 - p))
    return (X * mask if shape is None else None), mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def mean_pool_rows(X):
    """Column means over the row axis (second to last)."""
    return X.mean(axis=-2)


def mean_pool_rows_backward(dout, n_rows: int):
    shape = dout.shape[:-1] + (n_rows, dout.shape[-1])
    return np.broadcast_to((dout / n_rows)[..., None, :], shape)


def concat_cols(blocks):
    return np.concatenate(blocks, axis=-1)


def concat_rows(blocks):
    return np.concatenate(blocks, axis=-2)


def split_backward(dout, sizes, axis: int):
    return np.split(dout, np.cumsum(sizes)[:-1], axis=axis)


def log_sigmoid(z):
    # log(sigmoid(z)) without overflow
    return -np.logaddexp(0.0, -z)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_bce(logits, targets):
    """Mean binary cross-entropy on logits. Returns ``(loss, dlogits)``."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"logits {z.shape} and targets {y.shape} differ in shape")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("targets must be 0 or 1")
    n = z.size
    loss = -np.sum(y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z)) / n
    grad = (sigmoid(z) - y) / n
    return float(loss), grad
