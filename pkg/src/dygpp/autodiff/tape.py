"""A small reverse-mode tape over the operation set in :mod:`.ops`.

Each op computes its value eagerly and, when the tape records, pushes a
closure that routes the output gradient back to its inputs. ``backward``
replays the closures in reverse order. Parameter leaves accumulate straight
into :attr:`Parameter.grad`.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import ops
from .params import Parameter


class Var:
    """A tape value. ``grad`` may borrow the first incoming gradient array;
    ``owned`` records whether it may be updated in place."""

    __slots__ = ("value", "grad", "needs_grad", "owned")

    def __init__(self, value: np.ndarray, needs_grad: bool = False, grad: np.ndarray | None = None):
        self.value = value
        self.needs_grad = needs_grad
        self.grad = grad
        self.owned = grad is not None

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if not self.needs_grad:
            return
        if self.grad is None:
            self.grad = g
        elif self.owned:
            self.grad += g
        else:
            self.grad = self.grad + g
            self.owned = True

    def accumulate_rows(self, start: int, stop: int, g: np.ndarray) -> None:
        if not self.needs_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
            self.owned = True
        elif not self.owned:
            self.grad = self.grad.copy()
            self.owned = True
        self.grad[start:stop] += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def scatter_add(shape, idx: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Dense ``zeros(shape)`` with ``rows[k]`` added at ``idx[k]``; fixed summation order."""
    out = np.zeros(shape, dtype=np.float64)
    if len(idx) == 0:
        return out
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    uniq, starts = np.unique(sidx, return_index=True)
    out[uniq] = np.add.reduceat(rows[order], starts, axis=0)
    return out


class Tape:
    """Records differentiable ops. ``Tape(record=False)`` evaluates without recording."""

    def __init__(self, record: bool = True):
        self.record = record
        self._backward: list = []

    def _push(self, out: Var, fn) -> Var:
        if self.record and out.needs_grad:
            self._backward.append((out, fn))
        return out

    def __len__(self) -> int:
        return len(self._backward)

    # -- leaves --------------------------------------------------------------
    def param(self, p: Parameter) -> Var:
        return Var(p.value, needs_grad=self.record and p.trainable, grad=p.grad)

    @staticmethod
    def const(x) -> Var:
        return Var(np.asarray(x, dtype=np.float64))

    # -- ops -----------------------------------------------------------------
    def affine(self, x: Var, w: Var, b: Var | None = None) -> Var:
        out = Var(ops.affine_forward(x.value, w.value, None if b is None else b.value),
                  x.needs_grad or w.needs_grad or (b is not None and b.needs_grad))

        def back():
            dX, dW, db = ops.affine_backward(out.grad, x.value, w.value, with_bias=b is not None)
            x.accumulate(dX)
            w.accumulate(dW)
            if b is not None:
                b.accumulate(db.reshape(b.value.shape))
        return self._push(out, back)

    def relu(self, x: Var) -> Var:
        out = Var(ops.relu(x.value), x.needs_grad)
        return self._push(out, lambda: x.accumulate(ops.relu_backward(out.grad, x.value)))

    def dropout(self, x: Var, p: float, train: bool, rng=None) -> Var:
        value, mask = ops.dropout(x.value, p, train, rng)
        out = Var(value, x.needs_grad)
        return self._push(out, lambda: x.accumulate(ops.dropout_backward(out.grad, mask)))

    def relu_dropout(self, x: Var, p: float, train: bool, rng=None) -> Var:
        """``dropout(relu(x))`` with a single combined mask."""
        if not train or p == 0.0:
            ops.dropout(x.value, p, train, rng)
            mask = (x.value > 0).astype(np.float64)
        else:
            _, keep = ops.dropout(np.empty(0), p, train, rng, shape=x.value.shape)
            mask = np.where(x.value > 0, keep, 0.0)
        out = Var(x.value * mask, x.needs_grad)
        return self._push(out, lambda: x.accumulate(out.grad * mask))

    def mean_rows(self, x: Var) -> Var:
        n = x.value.shape[-2]
        out = Var(ops.mean_pool_rows(x.value), x.needs_grad)
        return self._push(out, lambda: x.accumulate(ops.mean_pool_rows_backward(out.grad, n)))

    def concat(self, xs: Sequence[Var], axis: int = -1) -> Var:
        sizes = [x.value.shape[axis] for x in xs]
        out = Var(np.concatenate([x.value for x in xs], axis=axis), any(x.needs_grad for x in xs))

        def back():
            for x, g in zip(xs, ops.split_backward(out.grad, sizes, axis)):
                x.accumulate(g)
        return self._push(out, back)

    def add(self, *xs: Var) -> Var:
        shape = np.broadcast_shapes(*(x.value.shape for x in xs))
        value = xs[0].value + xs[1].value if len(xs) > 1 else xs[0].value.copy()
        for x in xs[2:]:
            if value.shape == shape:
                value += x.value
            else:
                value = value + x.value
        out = Var(value, any(x.needs_grad for x in xs))

        def back():
            for x in xs:
                if x.needs_grad:
                    x.accumulate(_unbroadcast(out.grad, x.value.shape))
        return self._push(out, back)

    def gather(self, table: Var, idx) -> Var:
        """``table[idx]`` along the first axis; repeated indices accumulate."""
        idx = np.asarray(idx, dtype=np.int64)
        out = Var(table.value[idx], table.needs_grad)

        def back():
            table.accumulate(scatter_add(table.value.shape, idx.reshape(-1),
                                         out.grad.reshape(-1, *table.value.shape[1:])))
        return self._push(out, back)

    def slice_rows(self, x: Var, start: int, stop: int) -> Var:
        out = Var(x.value[start:stop], x.needs_grad)

        return self._push(out, lambda: x.accumulate_rows(start, stop, out.grad))

    def reshape(self, x: Var, shape) -> Var:
        out = Var(x.value.reshape(shape), x.needs_grad)
        return self._push(out, lambda: x.accumulate(out.grad.reshape(x.value.shape)))

    def colsum(self, x: Var) -> Var:
        """Sum over rows of a matrix, i.e. ``ones @ x``."""
        out = Var(x.value.sum(axis=0), x.needs_grad)
        return self._push(out, lambda: x.accumulate(np.broadcast_to(out.grad, x.value.shape)))

    def outer(self, s: np.ndarray, v: Var) -> Var:
        """``s[..., None] * v`` for a constant array ``s`` and a vector ``v``."""
        s = np.asarray(s, dtype=np.float64)
        out = Var(s[..., None] * v.value, v.needs_grad)

        def back():
            g = out.grad.reshape(-1, v.value.shape[-1])
            v.accumulate(s.reshape(-1) @ g)
        return self._push(out, back)

    def cos_time(self, delta_t: np.ndarray, omega: Var, scale: float) -> Var:
        """``sqrt(1/d) * cos(omega * scale * delta_t)`` with gradient to ``omega``."""
        dt = np.asarray(delta_t, dtype=np.float64)[..., None] * scale
        c = np.sqrt(1.0 / omega.value.shape[-1])
        phase = dt * omega.value
        out = Var(c * np.cos(phase), omega.needs_grad)

        def back():
            g = np.sin(phase)
            g *= dt
            g *= out.grad
            omega.accumulate(g.reshape(-1, omega.value.shape[-1]).sum(axis=0) * -c)
        return self._push(out, back)

    def sigmoid_bce(self, logits: Var, targets) -> tuple[float, Var]:
        loss, dlogits = ops.sigmoid_bce(logits.value, targets)
        out = Var(np.array(loss), logits.needs_grad)

        def back():
            logits.accumulate(dlogits * out.grad)
        return loss, self._push(out, back)

    # -- reverse pass ----------------------------------------------------------
    def backward(self, out: Var) -> None:
        if not self.record:
            raise RuntimeError("tape was created with record=False")
        out.grad = np.ones_like(out.value)
        for node, fn in reversed(self._backward):
            if node.grad is not None:
                fn()
        self._backward.clear()
