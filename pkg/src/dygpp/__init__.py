"""Dynamic-graph passenger behaviour prediction."""
from .baselines import PersonalTopBaseline, TopBaseline
from .config import RunConfig, load_run_config
from .estimator import DyGPPClassifier
from .events import DataError, EventLog, chronological_split, parse_events
from .metrics import auc, average_precision, evaluate
from .model import DyGPPModel, ModelConfig
from .synthetic import GeneratorConfig, generate, generate_events, preset
from .trainer import TrainConfig, load_model, train

__all__ = [
    "DataError", "DyGPPClassifier", "DyGPPModel", "EventLog", "GeneratorConfig", "ModelConfig",
    "PersonalTopBaseline", "RunConfig", "TopBaseline", "TrainConfig", "auc", "average_precision",
    "chronological_split", "evaluate", "generate", "generate_events", "load_model",
    "load_run_config", "parse_events", "preset", "train",
]
