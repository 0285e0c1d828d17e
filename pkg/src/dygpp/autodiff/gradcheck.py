"""Central finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .params import ParameterStore


@dataclass
class BlockReport:
    name: str
    max_rel_error: float
    checked: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def relative_error(analytic, numeric, floor: float = 1e-5) -> np.ndarray:
    a = np.abs(analytic)
    n = np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), floor)


def finite_difference_check(loss_fn: Callable[[], float], store: ParameterStore, h: float = 1e-6,
                            *, max_coords: int | None = None, floor: float = 1e-5,
                            seed: int = 0, names=None) -> dict[str, BlockReport]:
    """Compare analytic gradients with central differences, block by block.

    ``loss_fn`` must be deterministic (eval-mode dropout, fixed batch) and
    must populate ``store``'s gradients as a side effect. At most
    ``max_coords`` coordinates per block are sampled; frozen rows are skipped.
    """
    store.zero_grad()
    loss_fn()
    analytic = {p.name: p.grad.copy() for p in store}
    rng = np.random.default_rng(seed)
    reports = {}
    for p in store:
        if not p.trainable or (names is not None and p.name not in names):
            continue
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size)
        if p.frozen_rows and p.value.ndim >= 1:
            row_of = coords // (flat.size // p.value.shape[0])
            coords = coords[~np.isin(row_of, p.frozen_rows)]
        if max_coords is not None and len(coords) > max_coords:
            coords = np.sort(rng.choice(coords, size=max_coords, replace=False))
        numeric = np.empty(len(coords))
        for k, c in enumerate(coords):
            orig = flat[c]
            flat[c] = orig + h
            f_plus = loss_fn()
            flat[c] = orig - h
            f_minus = loss_fn()
            flat[c] = orig
            numeric[k] = (f_plus - f_minus) / (2.0 * h)
        a = analytic[p.name].reshape(-1)[coords]
        err = relative_error(a, numeric, floor)
        reports[p.name] = BlockReport(p.name, float(err.max()) if len(err) else 0.0, len(coords))
    store.zero_grad()
    return reports
