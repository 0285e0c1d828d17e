"""Epoch loop over time batches with validation-AP early stopping."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .autodiff import AdamState, NumericError, adam_step
from .autodiff.checkpoint import load_checkpoint, save_checkpoint
from .events import DataError, DatasetSplit, EventLog
from .metrics import evaluate
from .model import DyGPPModel, ModelConfig, SequenceCache, batch_loss, parameter_shapes
from .sampling import TimeBatch, partition_time_batches

logger = logging.getLogger(__name__)

__all__ = ["TrainConfig", "TrainResult", "iter_batches", "load_model", "save_checkpoint", "train"]


@dataclass
class TrainConfig:
    max_epochs: int = 50
    patience: int = 20
    seed: int = 0
    learning_rate: float = 1e-4
    time_gap: float = 1000.0
    checkpoint_path: str | None = None
    val_seed: int | None = None

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.time_gap <= 0:
            raise ValueError("time_gap must be positive")

    @property
    def validation_seed(self) -> int:
        return self.seed + 1 if self.val_seed is None else self.val_seed


@dataclass
class TrainResult:
    model: DyGPPModel
    adam: AdamState
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_val_ap(self) -> float:
        return self.history[self.best_epoch - 1]["val_ap"]

    def history_jsonl(self) -> str:
        return "".join(json.dumps(h, sort_keys=True) + "\n" for h in self.history)


def iter_batches(events: EventLog, time_gap: float) -> Iterator[TimeBatch]:
    """Time batches in chronological order."""
    yield from partition_time_batches(events.timestamps, time_gap)


def progress_line(entry: dict) -> str:
    return ("epoch={epoch} train_loss={train_loss:.6f} val_ap={val_ap:.6f} "
            "val_auc={val_auc:.6f} patience_left={patience_left}".format(**entry))


ValidationHook = Callable[[int, DyGPPModel], tuple[float, float]]


def train(split: DatasetSplit, model_config: ModelConfig, run: TrainConfig, *,
          validation_hook: ValidationHook | None = None,
          progress: Callable[[str], None] | None = None,
          model: DyGPPModel | None = None) -> TrainResult:
    """Train on ``split.train`` and keep the parameters with the best validation AP.

    ``validation_hook(epoch, model) -> (ap, auc)`` replaces the real
    validation pass; it exists so tests can inject metric sequences.
    """
    train_events = split.train
    if len(train_events) == 0:
        raise DataError("train slice is empty")
    if validation_hook is None and len(split.val) == 0:
        raise DataError("validation slice is empty")
    history_log = split.full
    init_seq, train_seq = np.random.SeedSequence(run.seed).spawn(2)
    if model is None:
        model = DyGPPModel.initialize(model_config, history_log.num_passengers,
                                      history_log.num_stations, np.random.default_rng(init_seq))
    rng = np.random.default_rng(train_seq)
    adam = AdamState(learning_rate=run.learning_rate)
    cache = SequenceCache(history_log, train_events, model_config.sequence_length)
    batches = list(iter_batches(train_events, run.time_gap))
    # stations absent from training (e.g. withheld for inductive evaluation)
    # would otherwise only ever appear as negatives
    candidates = np.unique(train_events.stations)
    if len(candidates) < 2:
        candidates = None

    result = TrainResult(model=model, adam=adam)
    best_ap = -np.inf
    best_store, best_adam = model.store.copy(), AdamState(**vars(adam))
    patience_left = run.patience
    for epoch in range(1, run.max_epochs + 1):
        total, count = 0.0, 0
        for b, batch in enumerate(batches):
            try:
                loss = batch_loss(model, history_log, train_events, batch.slice, rng,
                                  train=True, cache=cache, candidates=candidates)
                adam_step(model.store, adam)
            except NumericError as exc:
                raise NumericError(f"{exc} (epoch {epoch}, batch {b})") from exc
            total += loss * len(batch)
            count += len(batch)
        if validation_hook is not None:
            val_ap, val_auc = validation_hook(epoch, model)
        else:
            metrics = evaluate(model, split, "val", seed=run.validation_seed)
            val_ap, val_auc = metrics["ap"], metrics["auc"]

        if val_ap > best_ap:
            best_ap = val_ap
            best_store, best_adam = model.store.copy(), AdamState(**vars(adam))
            result.best_epoch = epoch
            patience_left = run.patience
            if run.checkpoint_path:
                save_checkpoint(best_store, run.checkpoint_path, best_adam)
        else:
            patience_left -= 1
        entry = {"epoch": epoch, "train_loss": total / count, "val_ap": float(val_ap),
                 "val_auc": float(val_auc), "patience_left": patience_left}
        result.history.append(entry)
        line = progress_line(entry)
        logger.info(line)
        if progress is not None:
            progress(line)
        if patience_left == 0:
            break

    result.model = DyGPPModel(model_config, best_store)
    result.adam = best_adam
    return result


def load_model(path, model_config: ModelConfig, num_passengers: int,
               num_stations: int) -> tuple[DyGPPModel, AdamState]:
    """Load a checkpoint and validate it against the configuration and id spaces."""
    from .autodiff import Parameter, ParameterStore

    template = ParameterStore(Parameter(name, np.zeros(shape))
                              for name, shape in parameter_shapes(model_config, num_passengers,
                                                                  num_stations).items())
    for name in ("node.passenger", "node.station"):
        template[name].frozen_rows = (0,)
    store, adam = load_checkpoint(path, template)
    return DyGPPModel(model_config, store), adam
