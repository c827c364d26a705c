"""Classifiers, oversampling and hyperparameter search."""

from .models import (
    DEFAULT_HYPERPARAMS,
    KINDS,
    ROW_NAMES,
    ClassifierKind,
    ensemble_predict,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    predict_proba,
    save_model,
    train,
)
from .search import DEFAULT_GRID, GridSpec, grid_search, participant_folds
from .smote import SMOTE_TRIGGER, smote

__all__ = [
    "ClassifierKind",
    "DEFAULT_GRID",
    "DEFAULT_HYPERPARAMS",
    "GridSpec",
    "KINDS",
    "ROW_NAMES",
    "SMOTE_TRIGGER",
    "ensemble_predict",
    "grid_search",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "participant_folds",
    "predict",
    "predict_proba",
    "save_model",
    "smote",
    "train",
]
