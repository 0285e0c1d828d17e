"""scikit-learn style wrapper around splitting, training and scoring."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .autodiff.ops import sigmoid
from .events import chronological_split
from .metrics import TRANSDUCTIVE, evaluate
from .model import ModelConfig
from .trainer import TrainConfig, train
from .validation import as_event_log, check_queries


class DyGPPClassifier(ClassifierMixin, BaseEstimator):
    """Passenger-station link predictor.

    ``fit`` takes the whole event log (rows ``[passenger, station, label,
    timestamp]``), splits it chronologically and trains with validation-AP
    early stopping. Queries are ``(passenger, station, timestamp)`` rows
    scored against the event history (the fitted log unless given).
    """

    def __init__(self, num_neighbors=20, dim_node=172, dim_edge=172, dim_time=100, dim_channel=50,
                 dim_embed=172, dim_out=172, ffn_layers=1, dropout=0.1, time_scale=1e-6,
                 ablate_edge=False, ablate_time=False, ablate_co=False, ablate_co_self=False,
                 ablate_co_cross=False, literal_head=False, learning_rate=1e-4, max_epochs=50,
                 patience=20, time_gap=1000.0, inductive_fraction=0.1, split_seed=0,
                 random_state=0):
        self.num_neighbors = num_neighbors
        self.dim_node = dim_node
        self.dim_edge = dim_edge
        self.dim_time = dim_time
        self.dim_channel = dim_channel
        self.dim_embed = dim_embed
        self.dim_out = dim_out
        self.ffn_layers = ffn_layers
        self.dropout = dropout
        self.time_scale = time_scale
        self.ablate_edge = ablate_edge
        self.ablate_time = ablate_time
        self.ablate_co = ablate_co
        self.ablate_co_self = ablate_co_self
        self.ablate_co_cross = ablate_co_cross
        self.literal_head = literal_head
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.time_gap = time_gap
        self.inductive_fraction = inductive_fraction
        self.split_seed = split_seed
        self.random_state = random_state

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.get_params())

    def train_config(self) -> TrainConfig:
        return TrainConfig(max_epochs=self.max_epochs, patience=self.patience,
                           seed=self.random_state, learning_rate=self.learning_rate,
                           time_gap=self.time_gap)

    def fit(self, X, y=None, progress=None):
        log = as_event_log(X)
        self.split_ = chronological_split(log, inductive_fraction=self.inductive_fraction,
                                          seed=self.split_seed)
        result = train(self.split_, self.model_config(), self.train_config(), progress=progress)
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("DyGPPClassifier must be fitted before scoring")

    def decision_function(self, X, history=None) -> np.ndarray:
        """Link logits for query rows."""
        self._check_fitted()
        p, s, t = check_queries(X)
        history = self.split_.full if history is None else as_event_log(history)
        return self.model_.decision_function(history, p, s, t)

    def predict_proba(self, X, history=None) -> np.ndarray:
        prob = sigmoid(self.decision_function(X, history))
        return np.column_stack([1.0 - prob, prob])

    def predict(self, X, history=None) -> np.ndarray:
        return (self.decision_function(X, history) > 0.0).astype(np.int64)

    def evaluate(self, part: str = "test", mode: str = TRANSDUCTIVE, seed: int = 0) -> dict:
        """AP/AUC on a slice of the fitted log with one random negative per positive."""
        self._check_fitted()
        return evaluate(self.model_, self.split_, part, mode, seed)
