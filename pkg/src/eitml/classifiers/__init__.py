"""From-scratch classifiers with a uniform train/predict contract.

Labels are 0 (Healthy) and 1 (NonHealthy); scores grow toward NonHealthy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import FormatError, atomic_write
from .forest import RandomForestModel
from .lda import LDAModel
from .rusboost import RUSBoostModel
from .search import HyperparameterSpace, default_space, random_search
from .svm import SVMModel
from .tree import DecisionTreeModel, Tree

KINDS = ("DecisionTree", "RUSBoost", "LDA", "SVMrbf", "RndForest")
TREE_KINDS = ("DecisionTree", "RndForest", "RUSBoost")
MODEL_SCHEMA_VERSION = 1

_FACTORY = {
    "LDA": LDAModel,
    "DecisionTree": DecisionTreeModel,
    "RndForest": RandomForestModel,
    "RUSBoost": RUSBoostModel,
    "SVMrbf": SVMModel,
}


@dataclass(eq=False)
class TrainingSet:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ValueError("X must be (n_samples, n_features) matching y")
        if np.isnan(self.X).any():
            raise ValueError("training matrix contains missing values; impute first")
        if not set(np.unique(self.y)) <= {0, 1}:
            raise ValueError("labels must be 0/1")
        if np.unique(self.y).size < 2:
            raise ValueError("training set must contain both classes")
        if not self.feature_names:
            self.feature_names = tuple(f"x{i}" for i in range(self.X.shape[1]))

    @property
    def class_counts(self) -> tuple[int, int]:
        return int((self.y == 0).sum()), int((self.y == 1).sum())


@dataclass(eq=False)
class TrainedModel:
    kind: str
    estimator: object
    hyperparameters: dict
    seed: int
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def make_estimator(kind: str, hyperparameters: dict):
    try:
        return _FACTORY[kind](**hyperparameters)
    except KeyError:
        raise ValueError(f"unknown classifier kind {kind!r}") from None


def train(kind: str, data: TrainingSet, hyperparameters: dict | None = None, seed: int = 0) -> TrainedModel:
    """Fit one model; deterministic in (kind, data, hyperparameters, seed)."""
    hp = dict(hyperparameters or {})
    est = make_estimator(kind, hp)
    est.fit(data.X, data.y, seed=seed)
    return TrainedModel(kind, est, dict(est.hyperparameters), int(seed), tuple(data.feature_names))


def predict(model: TrainedModel, features) -> tuple[np.ndarray, np.ndarray]:
    """Return (labels, scores); label 1 where score >= 0."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    scores = model.estimator.decision_function(X)
    return (scores >= 0).astype(np.int64), scores


def predictor_importance(model: TrainedModel) -> dict[str, float]:
    """Split-risk importance per feature (tree-based models only)."""
    if model.kind not in TREE_KINDS:
        raise TypeError(f"predictor importance is defined for tree models, not {model.kind}")
    imp = model.estimator.feature_importance()
    return dict(zip(model.feature_names, imp.tolist()))


def catalog_hash(feature_names) -> str:
    import hashlib

    return hashlib.sha256("\n".join(feature_names).encode()).hexdigest()


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": model.kind,
        "hyperparameters": model.hyperparameters,
        "seed": model.seed,
        "feature_names": list(model.feature_names),
        "catalog_hash": catalog_hash(model.feature_names),
        "parameters": model.estimator.get_params(),
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise FormatError(f"unsupported model schema version {doc.get('schema_version')!r}")
    names = tuple(doc["feature_names"])
    if catalog_hash(names) != doc["catalog_hash"]:
        raise FormatError("model catalog hash does not match its feature names")
    est = make_estimator(doc["kind"], doc["hyperparameters"])
    est.set_params(doc["parameters"])
    return TrainedModel(doc["kind"], est, dict(doc["hyperparameters"]), int(doc["seed"]), names)


def save_model(model: TrainedModel, path) -> None:
    atomic_write(path, json.dumps(model_to_dict(model)))


def load_model(path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return model_from_dict(doc)


__all__ = [
    "KINDS",
    "TREE_KINDS",
    "TrainingSet",
    "TrainedModel",
    "HyperparameterSpace",
    "Tree",
    "default_space",
    "random_search",
    "train",
    "predict",
    "predictor_importance",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]
