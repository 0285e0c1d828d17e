"""Named trainable tensors and the Adam optimizer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .ops import NumericError


class Parameter:
    """A value with matching gradient and Adam moment buffers.

    ``frozen_rows`` lists row indices (e.g. the zero padding row of a node
    table) that the optimizer never touches.
    """

    __slots__ = ("name", "value", "grad", "m", "v", "trainable", "frozen_rows")

    def __init__(self, name: str, value, *, trainable: bool = True, frozen_rows=()):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.trainable = trainable
        self.frozen_rows = tuple(int(r) for r in frozen_rows)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class ParameterStore:
    def __init__(self, params=()):
        self._params: dict[str, Parameter] = {}
        for p in params:
            self.add(p)

    def add(self, param: Parameter) -> Parameter:
        if param.name in self._params:
            raise KeyError(f"duplicate parameter {param.name!r}")
        self._params[param.name] = param
        return param

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self:
            p.grad.fill(0.0)

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        for p in self:
            q = Parameter(p.name, p.value, trainable=p.trainable, frozen_rows=p.frozen_rows)
            q.m[...] = p.m
            q.v[...] = p.v
            out.add(q)
        return out

    def values(self) -> dict[str, np.ndarray]:
        return {p.name: p.value for p in self}

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self)


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")


def _all_finite(g: np.ndarray) -> bool:
    # a finite sum implies finite entries; overflow falls back to the exact test
    return bool(np.isfinite(g.sum())) or bool(np.all(np.isfinite(g)))


def adam_step(store: ParameterStore, state: AdamState) -> None:
    """One bias-corrected Adam update; gradients are zeroed afterwards."""
    for p in store:
        if p.trainable and not _all_finite(p.grad):
            raise NumericError(f"non-finite gradient in parameter {p.name!r}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p in store:
        g = p.grad
        if not p.trainable:
            g.fill(0.0)
            continue
        if p.frozen_rows:
            rows = list(p.frozen_rows)
            keep = [a[rows].copy() for a in (p.value, p.m, p.v)]
        tmp = np.multiply(g, 1.0 - b1)
        p.m *= b1
        p.m += tmp
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        p.v *= b2
        p.v += tmp
        # update = lr * (m / c1) / (sqrt(v / c2) + eps), built in place
        np.divide(p.v, c2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += state.eps
        update = np.divide(p.m, c1, out=g)
        update *= state.learning_rate
        update /= tmp
        p.value -= update
        if p.frozen_rows:
            p.value[rows], p.m[rows], p.v[rows] = keep
        g.fill(0.0)
