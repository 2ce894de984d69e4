"""Random forest: bootstrap bagging plus per-split feature subsampling."""

from __future__ import annotations

import math

import numpy as np

from .tree import Tree, prepare

MAX_FEATURES_RULES = ("sqrt", "third", "half")


def resolve_max_features(rule, d: int) -> int:
    if isinstance(rule, (int, np.integer)):
        return int(min(max(rule, 1), d))
    if rule == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    if rule == "third":
        return max(1, d // 3)
    if rule == "half":
        return max(1, d // 2)
    raise ValueError(f"unknown max_features rule {rule!r}")


class RandomForestModel:
    """Majority vote over bootstrapped CART trees; a tied vote goes to class 1 (NonHealthy)."""

    kind = "RndForest"

    def __init__(self, n_trees: int = 100, max_features="sqrt", min_leaf: int = 1):
        self.n_trees = n_trees
        self.max_features = max_features
        self.min_leaf = min_leaf
        self.trees_: list[Tree] = []
        self.n_features_ = 0

    @property
    def hyperparameters(self):
        return {"n_trees": self.n_trees, "max_features": self.max_features, "min_leaf": self.min_leaf}

    def fit(self, X, y, seed: int = 0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        n, d = X.shape
        self.n_features_ = d
        mf = resolve_max_features(self.max_features, d)
        rng = np.random.default_rng(seed)
        w = np.ones(n)
        prepared = prepare(X)
        self.trees_ = []
        for _ in range(self.n_trees):
            rows = rng.integers(0, n, size=n)
            tree_seed = int(rng.integers(0, 2**32))
            self.trees_.append(
                Tree.grow(X, y, w, rows, max_depth=-1, min_leaf=self.min_leaf, max_features=mf, seed=tree_seed, prepared=prepared)
            )
        return self

    def votes(self, X) -> np.ndarray:
        """Fraction of trees voting class 1."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        v = np.zeros(X.shape[0])
        for t in self.trees_:
            v += t.proba(X) >= 0.5
        return v / len(self.trees_)

    def decision_function(self, X) -> np.ndarray:
        return self.votes(X) - 0.5

    def predict(self, X) -> np.ndarray:
        return (self.votes(X) >= 0.5).astype(np.int64)

    def feature_importance(self) -> np.ndarray:
        return np.mean([t.importance(self.n_features_) for t in self.trees_], axis=0)

    def get_params(self) -> dict:
        return {"n_features": self.n_features_, "trees": [t.to_dict() for t in self.trees_]}

    def set_params(self, doc):
        self.n_features_ = doc["n_features"]
        self.trees_ = [Tree.from_dict(t) for t in doc["trees"]]
