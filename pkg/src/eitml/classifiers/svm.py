"""Soft-margin RBF support vector machine trained with SMO.

Working-set selection uses second-order information (maximal violating pair
with the largest objective decrease); training stops when the KKT violation
gap drops below ``tol``.
"""

from __future__ import annotations

import logging

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

TAU = 1e-12


@njit(cache=True)
def _smo(K, y, C, tol, max_iter):
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    while it < max_iter:
        it += 1
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0:
                            a = TAU
                        obj = -(b * b) / a
                        if obj < best:
                            best = obj
                            j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            break

        ai_old = alpha[i]
        aj_old = alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)

    # offset: mean over free vectors, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    acc = 0.0
    nfree = 0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            acc += yg
    rho = acc / nfree if nfree > 0 else 0.5 * (ub + lb)
    return alpha, rho, it


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


class SVMModel:
    kind = "SVMrbf"

    def __init__(self, C: float = 1.0, gamma: float = 0.1, tol: float = 1e-3, standardize: bool = True):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.standardize = standardize
        self.mean_ = None
        self.scale_ = None
        self.support_ = None
        self.dual_coef_ = None
        self.rho_ = 0.0
        self.n_iter_ = 0

    @property
    def hyperparameters(self):
        return {"C": self.C, "gamma": self.gamma}

    def _transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_

    def fit(self, X, y, seed: int = 0):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if len(np.unique(y)) < 2:
            raise ValueError("SVM needs both classes")
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            sd = X.std(axis=0)
            self.scale_ = np.where(sd > 0, sd, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = self._transform(X)
        ys = np.where(y == 1, 1.0, -1.0)
        K = rbf_kernel(Z, Z, self.gamma)
        max_iter = max(1_000_000, 200 * len(y))
        alpha, rho, it = _smo(K, ys, float(self.C), float(self.tol), max_iter)
        if it >= max_iter:
            log.warning("SMO hit the iteration cap (%d) before reaching tol=%g", max_iter, self.tol)
        sv = alpha > 0
        self.support_ = Z[sv]
        self.dual_coef_ = alpha[sv] * ys[sv]
        self.alpha_ = alpha
        self.rho_ = float(rho)
        self.n_iter_ = int(it)
        return self

    def decision_function(self, X) -> np.ndarray:
        Z = self._transform(X)
        if self.support_.shape[0] == 0:
            return np.full(Z.shape[0], -self.rho_)
        return rbf_kernel(Z, self.support_, self.gamma) @ self.dual_coef_ - self.rho_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(np.int64)

    def kkt_residuals(self, X, y) -> np.ndarray:
        """Per-point violation of the soft-margin KKT conditions on the training set."""
        ys = np.where(np.asarray(y) == 1, 1.0, -1.0)
        margin = ys * self.decision_function(X)
        a = self.alpha_
        at_zero = a <= 0
        at_c = a >= self.C
        free = ~at_zero & ~at_c
        res = np.zeros(len(ys))
        res[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
        res[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
        res[free] = np.abs(margin[free] - 1.0)
        return res

    def get_params(self) -> dict:
        return {
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "support": self.support_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "rho": self.rho_,
        }

    def set_params(self, doc):
        self.mean_ = np.asarray(doc["mean"], dtype=np.float64)
        self.scale_ = np.asarray(doc["scale"], dtype=np.float64)
        self.support_ = np.asarray(doc["support"], dtype=np.float64).reshape(-1, len(self.mean_))
        self.dual_coef_ = np.asarray(doc["dual_coef"], dtype=np.float64)
        self.rho_ = float(doc["rho"])
