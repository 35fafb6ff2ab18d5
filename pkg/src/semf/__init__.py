"""Multi-horizon forecasting from wavelet spectrograms and exogenous series."""

from .config import TrainConfig
from .data import HORIZONS, AlignedFrame, load_csv, synthesize_dataset
from .errors import SemfError
from .metrics import MetricsReport
from .model import SemfModel
from .training import evaluate, load_model, persistence_baseline, prepare_splits, save_model, train

__all__ = [
    "HORIZONS",
    "AlignedFrame",
    "MetricsReport",
    "SemfError",
    "SemfModel",
    "TrainConfig",
    "evaluate",
    "load_csv",
    "load_model",
    "persistence_baseline",
    "prepare_splits",
    "save_model",
    "synthesize_dataset",
    "train",
]
__version__ = "0.1.0"
