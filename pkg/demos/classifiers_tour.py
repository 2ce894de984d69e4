"""Train each classifier on the same noisy two-class problem.

Every model goes through the same train / predict / save / load contract.
The tree-based models also report split-risk predictor importance, which
should single out the two informative columns.
"""

import tempfile
from pathlib import Path

import numpy as np

from eitml.classifiers import KINDS, TREE_KINDS, TrainingSet, load_model, predict, predictor_importance, save_model, train

rng = np.random.default_rng(0)
names = ("signal_a", "signal_b", "noise_1", "noise_2", "noise_3")


def draw(n):
    y = (rng.random(n) < 0.7).astype(int)
    X = rng.standard_normal((n, 5))
    X[:, :2] += 1.5 * y[:, None]
    return X, y


X, y = draw(400)
Xt, yt = draw(400)
data = TrainingSet(X, y, names)

with tempfile.TemporaryDirectory() as tmp:
    for kind in KINDS:
        model = train(kind, data, seed=1)
        path = Path(tmp) / f"{kind}.json"
        save_model(model, path)
        labels, _ = predict(load_model(path), Xt)
        line = f"{kind:13s} test accuracy {(labels == yt).mean():.3f}"
        if kind in TREE_KINDS:
            imp = predictor_importance(model)
            top = sorted(imp, key=imp.get, reverse=True)[:2]
            line += f"   top features: {', '.join(top)}"
        print(line)
