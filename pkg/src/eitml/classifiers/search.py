"""Hyperparameter spaces and seeded random search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IntRange:
    low: int
    high: int

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))

    def contains(self, v):
        return isinstance(v, (int, np.integer)) and self.low <= v <= self.high


@dataclass(frozen=True)
class FloatRange:
    low: float
    high: float
    log: bool = False

    def sample(self, rng):
        if self.log:
            return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))
        return float(rng.uniform(self.low, self.high))

    def contains(self, v):
        return self.low <= v <= self.high


@dataclass(frozen=True)
class Choice:
    options: tuple

    def sample(self, rng):
        return self.options[int(rng.integers(len(self.options)))]

    def contains(self, v):
        return v in self.options


# lower key = simpler model; used to break validation-accuracy ties
_COMPLEXITY = {
    "LDA": lambda h: (-h["shrinkage"],),
    "DecisionTree": lambda h: (h["max_depth"], -h["min_leaf"]),
    "RndForest": lambda h: (h["n_trees"], -h["min_leaf"]),
    "RUSBoost": lambda h: (h["n_rounds"], h["max_depth"]),
    "SVMrbf": lambda h: (h["C"], h["gamma"]),
}


@dataclass(frozen=True)
class HyperparameterSpace:
    kind: str
    ranges: dict = field(hash=False)
    budget: int = 30

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("search budget must be >= 1")
        if not self.ranges:
            raise ValueError("empty hyperparameter space")

    def sample(self, rng) -> dict:
        return {k: r.sample(rng) for k, r in self.ranges.items()}

    def validate(self, hp: dict) -> None:
        for k, r in self.ranges.items():
            if k not in hp:
                raise ValueError(f"{self.kind}: missing hyperparameter {k!r}")
            if not r.contains(hp[k]):
                raise ValueError(f"{self.kind}: {k}={hp[k]!r} outside {r}")

    def complexity(self, hp: dict) -> tuple:
        return _COMPLEXITY[self.kind](hp)


def default_space(kind: str, budget: int = 30) -> HyperparameterSpace:
    spaces = {
        "LDA": {"shrinkage": FloatRange(0.0, 1.0)},
        "DecisionTree": {"max_depth": IntRange(2, 20), "min_leaf": IntRange(1, 32)},
        "RndForest": {
            "n_trees": IntRange(50, 300),
            "max_features": Choice(("sqrt", "third", "half")),
            "min_leaf": IntRange(1, 16),
        },
        "RUSBoost": {
            "n_rounds": IntRange(20, 200),
            "learning_rate": FloatRange(0.05, 1.0, log=True),
            "max_depth": IntRange(1, 5),
        },
        "SVMrbf": {"C": FloatRange(1e-2, 1e3, log=True), "gamma": FloatRange(1e-4, 10.0, log=True)},
    }
    try:
        return HyperparameterSpace(kind, spaces[kind], budget)
    except KeyError:
        raise ValueError(f"unknown classifier kind {kind!r}") from None


def random_search(space: HyperparameterSpace, evaluate, seed: int):
    """Evaluate ``budget`` sampled configurations, return (best_hp, best_score, trials).

    ``evaluate(hp, trial_index)`` returns validation accuracy. Ties go to the
    simpler configuration, then the earlier trial.
    """
    rng = np.random.default_rng(seed)
    trials = []
    for k in range(space.budget):
        hp = space.sample(rng)
        trials.append((hp, float(evaluate(hp, k)), k))
    best = min(trials, key=lambda t: (-t[1], space.complexity(t[0]), t[2]))
    return best[0], best[1], trials
