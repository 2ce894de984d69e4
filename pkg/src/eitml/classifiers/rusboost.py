"""RUSBoost: AdaBoost.M1 where every round's weak tree sees a class-balanced
random undersample of the training set."""

from __future__ import annotations

import math

import numpy as np

from .tree import Tree, prepare


class RUSBoostModel:
    kind = "RUSBoost"

    def __init__(self, n_rounds: int = 100, learning_rate: float = 0.1, max_depth: int = 3):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.trees_: list[Tree] = []
        self.alphas_: list[float] = []
        self.round_class_counts_: list[tuple[int, int]] = []
        self.n_features_ = 0

    @property
    def hyperparameters(self):
        return {"n_rounds": self.n_rounds, "learning_rate": self.learning_rate, "max_depth": self.max_depth}

    def fit(self, X, y, seed: int = 0):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        n, d = X.shape
        self.n_features_ = d
        rng = np.random.default_rng(seed)
        idx0 = np.flatnonzero(y == 0)
        idx1 = np.flatnonzero(y == 1)
        n_min = min(idx0.size, idx1.size)
        if n_min == 0:
            raise ValueError("RUSBoost needs both classes")
        D = np.full(n, 1.0 / n)
        self.trees_, self.alphas_, self.round_class_counts_ = [], [], []
        fallback = None
        prepared = prepare(X)
        for _ in range(self.n_rounds):
            keep0 = rng.choice(idx0, n_min, replace=False) if idx0.size > n_min else idx0
            keep1 = rng.choice(idx1, n_min, replace=False) if idx1.size > n_min else idx1
            rows = np.sort(np.concatenate([keep0, keep1]))
            tree_seed = int(rng.integers(0, 2**32))
            tree = Tree.grow(X, y, D, rows, max_depth=self.max_depth, min_leaf=1, seed=tree_seed, prepared=prepared)
            self.round_class_counts_.append((int(keep0.size), int(keep1.size)))
            miss = (tree.proba(X) >= 0.5).astype(np.int64) != y
            err = float(D[miss].sum())
            if err >= 0.5:
                # too weak on the full weighted set; resample next round
                fallback = fallback or tree
                continue
            err = max(err, 1e-10)
            alpha = self.learning_rate * math.log((1.0 - err) / err)
            self.trees_.append(tree)
            self.alphas_.append(alpha)
            D = D * np.exp(alpha * miss)
            D /= D.sum()
        if not self.trees_:
            self.trees_, self.alphas_ = [fallback], [1.0]
        return self

    def decision_function(self, X) -> np.ndarray:
        """Alpha-weighted vote in [-1, 1]; positive favours class 1."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        s = np.zeros(X.shape[0])
        for a, t in zip(self.alphas_, self.trees_):
            s += a * np.where(t.proba(X) >= 0.5, 1.0, -1.0)
        return s / sum(self.alphas_)

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int64)

    def feature_importance(self) -> np.ndarray:
        return np.mean([t.importance(self.n_features_) for t in self.trees_], axis=0)

    def get_params(self) -> dict:
        return {
            "n_features": self.n_features_,
            "alphas": list(self.alphas_),
            "round_class_counts": [list(c) for c in self.round_class_counts_],
            "trees": [t.to_dict() for t in self.trees_],
        }

    def set_params(self, doc):
        self.n_features_ = doc["n_features"]
        self.alphas_ = list(doc["alphas"])
        self.round_class_counts_ = [tuple(c) for c in doc["round_class_counts"]]
        self.trees_ = [Tree.from_dict(t) for t in doc["trees"]]
