"""Toy-scale gradient check of the full model loss."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .autodiff import BlockReport, finite_difference_check
from .events import ALIGHT, BOARD, EventLog
from .model import DyGPPModel, ModelConfig, batch_loss

TOY_DIM = 8
TOY_NEIGHBORS = 4


def toy_config(config: ModelConfig | None = None) -> ModelConfig:
    """``config`` with every width capped at 8 and 4 neighbors per sequence; flags are kept."""
    c = config or ModelConfig()
    dims = {name: min(getattr(c, name), TOY_DIM) for name in
            ("dim_node", "dim_edge", "dim_time", "dim_channel", "dim_embed", "dim_out")}
    return replace(c, num_neighbors=TOY_NEIGHBORS, **dims)


def toy_log(time_scale: float = 1e-6) -> EventLog:
    """Four events over two passengers and two stations.

    Gaps are about ``1 / time_scale`` so that the time-encoder phases are of
    order one and the frequency gradients are well above roundoff.
    """
    unit = 1.0 / time_scale
    times = np.round(np.array([0.0, 1.3, 2.1, 3.7]) * unit).astype(np.int64)
    rows = np.array([[1, 1, BOARD, times[0]],
                     [2, 1, BOARD, times[1]],
                     [1, 2, ALIGHT, times[2]],
                     [2, 2, ALIGHT, times[3]]], dtype=np.int64)
    return EventLog.from_array(rows)


def toy_gradcheck(config: ModelConfig | None = None, seed: int = 0, h: float = 1e-6
                  ) -> dict[str, BlockReport]:
    """Per-parameter max relative error of the analytic gradient of the BCE loss
    over all four toy events, each with its station-corrupted negative."""
    cfg = toy_config(config)
    log = toy_log(cfg.time_scale)
    model = DyGPPModel.initialize(cfg, log.num_passengers, log.num_stations, seed)
    # with two stations the corrupted station is always the other one
    negatives = 3 - log.stations
    everything = slice(0, len(log))

    def loss_fn() -> float:
        return batch_loss(model, log, log, everything, np.random.default_rng(seed),
                          train=False, negatives=negatives)

    return finite_difference_check(loss_fn, model.store, h)
