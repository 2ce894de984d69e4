"""Linear discriminant analysis with a shrunk pooled covariance."""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg

MIN_SHRINKAGE = 1e-6


class LDAModel:
    """Two-class Gaussian LDA.

    The pooled within-class covariance is shrunk toward a scaled identity,
    ``(1 - s) * S + s * (trace(S) / d) * I`` with ``s >= 1e-6`` so the
    solve never hits a singular matrix.
    """

    kind = "LDA"

    def __init__(self, shrinkage: float = 0.0):
        self.shrinkage = shrinkage
        self.coef_: np.ndarray | None = None
        self.intercept_ = 0.0

    @property
    def hyperparameters(self):
        return {"shrinkage": self.shrinkage}

    def fit(self, X, y, seed: int = 0):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        X0, X1 = X[y == 0], X[y == 1]
        if len(X0) == 0 or len(X1) == 0:
            raise ValueError("LDA needs both classes")
        mu0, mu1 = X0.mean(axis=0), X1.mean(axis=0)
        resid = np.concatenate([X0 - mu0, X1 - mu1])
        dof = max(len(X) - 2, 1)
        S = resid.T @ resid / dof
        d = X.shape[1]
        s = max(float(self.shrinkage), MIN_SHRINKAGE)
        scale = np.trace(S) / d
        if scale <= 0:
            scale = 1.0
        S = (1.0 - s) * S + s * scale * np.eye(d)
        w = linalg.solve(S, mu1 - mu0, assume_a="sym")
        prior = math.log(len(X1) / len(X0))
        self.coef_ = w
        self.intercept_ = float(-0.5 * (mu0 + mu1) @ w + prior)
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int64)

    def get_params(self) -> dict:
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def set_params(self, doc):
        self.coef_ = np.asarray(doc["coef"], dtype=np.float64)
        self.intercept_ = float(doc["intercept"])
