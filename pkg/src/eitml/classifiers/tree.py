"""CART decision trees."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._cart import LEAF, apply_tree, build_tree

_FIELDS = ("feature", "threshold", "left", "right", "value", "weight", "impurity", "count")


def prepare(X) -> tuple[np.ndarray, np.ndarray]:
    """Feature-major copy of X and its per-feature sort order."""
    XT = np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
    order = np.ascontiguousarray(np.argsort(XT, axis=1, kind="stable"), dtype=np.int64)
    return XT, order


@dataclass(eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    impurity: np.ndarray
    count: np.ndarray

    @classmethod
    def grow(
        cls, X, y, w=None, rows=None, max_depth=-1, min_leaf=1, max_features=None, seed=0, prepared=None
    ) -> "Tree":
        """Fit on ``rows`` of X (repeats allowed, default all rows).

        ``prepared`` is ``prepare(X)``, reusable across trees on the same X.
        """
        XT, order = prepared if prepared is not None else prepare(X)
        n = XT.shape[1]
        y = np.ascontiguousarray(y, dtype=np.int64)
        w = np.ones(n) if w is None else np.ascontiguousarray(w, dtype=np.float64)
        if rows is None:
            mult = np.ones(n, dtype=np.int64)
        else:
            mult = np.bincount(np.asarray(rows, dtype=np.int64), minlength=n).astype(np.int64)
        d = XT.shape[0]
        mf = d if max_features is None else int(min(max(max_features, 1), d))
        md = -1 if max_depth is None else int(max_depth)
        return cls(*build_tree(XT, order, y, w, mult, md, int(min_leaf), mf, int(seed) % (2**32)))

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def branch_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.left != LEAF)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.left[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return apply_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    def importance(self, n_features: int) -> np.ndarray:
        """Split risk reductions per feature divided by the number of branch nodes.

        Node risk is the node's training-weight share times its Gini impurity.
        """
        out = np.zeros(n_features)
        branches = self.branch_nodes
        if branches.size == 0:
            return out
        risk = self.weight * self.impurity
        gain = risk[branches] - risk[self.left[branches]] - risk[self.right[branches]]
        np.add.at(out, self.feature[branches], np.maximum(gain, 0.0))
        return out / branches.size

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in _FIELDS}

    @classmethod
    def from_dict(cls, doc) -> "Tree":
        ints = {"feature", "left", "right", "count"}
        return cls(**{k: np.asarray(doc[k], dtype=np.int64 if k in ints else np.float64) for k in _FIELDS})


class DecisionTreeModel:
    kind = "DecisionTree"

    def __init__(self, max_depth: int = 10, min_leaf: int = 1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.tree_: Tree | None = None
        self.n_features_ = 0

    @property
    def hyperparameters(self):
        return {"max_depth": self.max_depth, "min_leaf": self.min_leaf}

    def fit(self, X, y, seed: int = 0):
        X = np.asarray(X, dtype=np.float64)
        self.n_features_ = X.shape[1]
        self.tree_ = Tree.grow(X, y, max_depth=self.max_depth, min_leaf=self.min_leaf, seed=seed)
        return self

    def decision_function(self, X) -> np.ndarray:
        return self.tree_.proba(X) - 0.5

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int64)

    def feature_importance(self) -> np.ndarray:
        return self.tree_.importance(self.n_features_)

    def get_params(self) -> dict:
        return {"n_features": self.n_features_, "tree": self.tree_.to_dict()}

    def set_params(self, doc):
        self.n_features_ = doc["n_features"]
        self.tree_ = Tree.from_dict(doc["tree"])
