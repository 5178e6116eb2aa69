"""Incremental sparse Bayesian ordinal regression."""

from .data import Dataset, generate_synthetic, load_csv, partition, standardize
from .errors import ConvergenceError, InputError, NumericError, ParseError
from .evaluation import accuracy, cross_validate, mae, run_experiment
from .likelihood import Thresholds
from .persist import load, save
from .trainer import ModelState, TrainConfig, fit, initialize, predict, predict_many, predict_proba

__all__ = [
    "ConvergenceError", "Dataset", "InputError", "ModelState", "NumericError", "ParseError",
    "Thresholds", "TrainConfig", "accuracy", "cross_validate", "fit", "generate_synthetic",
    "initialize", "load", "load_csv", "mae", "partition", "predict", "predict_many",
    "predict_proba", "run_experiment", "save", "standardize",
]

__version__ = "0.1.0"
