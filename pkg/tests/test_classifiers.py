import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitml.classifiers import (
    KINDS,
    TrainingSet,
    default_space,
    load_model,
    model_to_dict,
    predict,
    predictor_importance,
    random_search,
    save_model,
    train,
)
from eitml.classifiers.forest import RandomForestModel, resolve_max_features
from eitml.classifiers.rusboost import RUSBoostModel
from eitml.classifiers.svm import SVMModel
from eitml.classifiers.tree import DecisionTreeModel, Tree
from eitml.core import FormatError

import oracles

XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([0, 1, 1, 0])


def gaussian_pair(n, d=2, gap=10.0, seed=0):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.standard_normal((n, d)), gap + rng.standard_normal((n, d))])
    y = np.repeat([0, 1], n)
    return X, y


def noisy_blobs(n=120, d=5, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.6).astype(int)
    X = rng.standard_normal((n, d)) + 1.2 * y[:, None] * (np.arange(d) < 2)
    return X, y


# --- CART -------------------------------------------------------------------


def test_xor_needs_depth_two():
    deep = DecisionTreeModel(max_depth=2).fit(XOR_X, XOR_Y)
    np.testing.assert_array_equal(deep.predict(XOR_X), XOR_Y)
    stump = DecisionTreeModel(max_depth=1).fit(XOR_X, XOR_Y)
    assert (stump.predict(XOR_X) == XOR_Y).mean() < 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(6, 30), st.integers(1, 4), st.integers(-1, 4), st.integers(1, 3))
def test_tree_matches_exhaustive_cart(seed, n, d, depth, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(n, d)).astype(float)  # many ties
    y = rng.integers(0, 2, size=n)
    tree = Tree.grow(X, y, max_depth=depth, min_leaf=min_leaf)
    ref = oracles.cart_oracle(X.tolist(), y.tolist(), depth, min_leaf)
    assert tree.n_nodes == oracles.cart_nodes(ref)
    grid = rng.integers(-1, 5, size=(50, d)).astype(float) + 0.5 * rng.integers(0, 2, size=(50, d))
    want = [oracles.cart_apply(ref, x) for x in grid.tolist()]
    np.testing.assert_array_equal(tree.proba(grid), want)


def test_bootstrap_rows_equal_explicit_repeats():
    X, y = noisy_blobs(40, 3, seed=2)
    rows = np.random.default_rng(0).integers(0, 40, 40)
    a = Tree.grow(X, y, rows=rows)
    b = Tree.grow(X[rows], y[rows])
    np.testing.assert_array_equal(a.proba(X), b.proba(X))
    np.testing.assert_array_equal(a.feature, b.feature)


def test_unlimited_tree_memorises_training_points():
    X, y = noisy_blobs(80, 4, seed=3)
    model = DecisionTreeModel(max_depth=-1).fit(X, y)
    np.testing.assert_array_equal(model.predict(X), y)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_training_accuracy_monotone_in_depth(seed, depth):
    X, y = noisy_blobs(60, 3, seed=seed)
    lo = DecisionTreeModel(max_depth=depth).fit(X, y).predict(X)
    hi = DecisionTreeModel(max_depth=depth + 1).fit(X, y).predict(X)
    assert (hi == y).mean() >= (lo == y).mean()


def test_single_split_importance_by_hand():
    X = np.array([[5.0, 0.0], [5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    y = np.array([0, 0, 1, 1])
    tree = Tree.grow(X, y, max_depth=1)
    # root risk 1.0 * 0.5, both children pure
    np.testing.assert_allclose(tree.importance(2), [0.0, 0.5])


def test_importance_follows_feature_permutation():
    X, y = noisy_blobs(100, 4, seed=5)
    perm = np.array([2, 0, 3, 1])
    # shallow, so no two candidate splits tie (ties go to the lower index)
    a = DecisionTreeModel(max_depth=2).fit(X, y).feature_importance()
    b = DecisionTreeModel(max_depth=2).fit(X[:, perm], y).feature_importance()
    np.testing.assert_allclose(b, a[perm], rtol=1e-12)
    assert (a >= 0).all()


def test_importance_is_mean_over_trees_and_zero_when_unused():
    X, y = noisy_blobs(100, 4, seed=6)
    X = np.column_stack([X, np.zeros(100)])
    forest = RandomForestModel(n_trees=7, max_features=2).fit(X, y, seed=1)
    manual = np.mean([t.importance(5) for t in forest.trees_], axis=0)
    np.testing.assert_allclose(forest.feature_importance(), manual)
    assert forest.feature_importance()[4] == 0.0


# --- forest -----------------------------------------------------------------


def test_forest_identical_stumps_vote_unanimously():
    X, y = gaussian_pair(20, 1, gap=5.0)
    stump = Tree.grow(X, y, max_depth=1)
    forest = RandomForestModel(n_trees=5)
    forest.trees_ = [stump] * 5
    forest.n_features_ = 1
    assert set(np.unique(forest.votes(np.linspace(-3, 8, 40)[:, None]))) <= {0.0, 1.0}


def test_forest_tie_goes_to_nonhealthy():
    X = np.array([[0.0], [1.0]])
    yes = Tree.grow(X, np.array([1, 1]))
    no = Tree.grow(X, np.array([0, 0]))
    forest = RandomForestModel(n_trees=2)
    forest.trees_, forest.n_features_ = [yes, no], 1
    assert forest.votes(X).tolist() == [0.5, 0.5]
    assert forest.predict(X).tolist() == [1, 1]


@pytest.mark.parametrize("rule, expected", [("sqrt", 11), ("third", 35), ("half", 53), (200, 106)])
def test_max_features_rules(rule, expected):
    assert resolve_max_features(rule, 106) == expected


# --- RUSBoost -----------------------------------------------------------------


def test_rusboost_rounds_are_class_balanced():
    X, y = noisy_blobs(150, 4, seed=7)
    model = RUSBoostModel(n_rounds=30, learning_rate=0.5, max_depth=2).fit(X, y, seed=3)
    n_min = min(np.bincount(y))
    assert len(model.round_class_counts_) == 30
    assert all(c == (n_min, n_min) for c in model.round_class_counts_)
    assert (model.predict(X) == y).mean() > 0.7


# --- LDA ----------------------------------------------------------------------


def test_lda_separable_gaussians():
    X, y = gaussian_pair(100, seed=0)
    Xt, yt = gaussian_pair(100, seed=1)
    model = train("LDA", TrainingSet(X, y))
    labels, _ = predict(model, Xt)
    assert (labels == yt).mean() == 1.0


def test_lda_affine_invariance():
    X, y = noisy_blobs(200, 3, seed=8)
    Xt, _ = noisy_blobs(100, 3, seed=9)
    A = np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -1.0], [0.3, 0.0, 4.0]])
    b = np.array([1.0, -7.0, 3.0])
    p1 = train("LDA", TrainingSet(X, y)).estimator.predict(Xt)
    p2 = train("LDA", TrainingSet(X @ A.T + b, y)).estimator.predict(Xt @ A.T + b)
    np.testing.assert_array_equal(p1, p2)


def test_lda_singular_covariance_is_handled():
    X, y = noisy_blobs(50, 3, seed=10)
    X = np.column_stack([X, X[:, 0]])
    labels, scores = predict(train("LDA", TrainingSet(X, y)), X)
    assert np.isfinite(scores).all()


# --- SVM ----------------------------------------------------------------------


def test_svm_two_points():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0, 1])
    model = train("SVMrbf", TrainingSet(X, y), {"C": 1.0, "gamma": 1.0})
    labels, scores = predict(model, X)
    assert labels.tolist() == [0, 1]
    assert scores[0] == pytest.approx(-scores[1])


@pytest.mark.parametrize("C, gamma", [(0.1, 0.5), (1.0, 0.1), (100.0, 2.0), (1000.0, 0.01)])
def test_svm_kkt_residuals(C, gamma):
    X, y = noisy_blobs(120, 4, seed=11)
    svm = SVMModel(C=C, gamma=gamma).fit(X, y)
    assert svm.kkt_residuals(X, y).max() <= 1e-3


# --- contract -----------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_training_is_deterministic_and_persistable(kind, tmp_path):
    X, y = noisy_blobs(90, 4, seed=12)
    data = TrainingSet(X, y, tuple(f"f{i}" for i in range(4)))
    space = default_space(kind)
    hp = space.sample(np.random.default_rng(0))
    space.validate(hp)
    a = train(kind, data, hp, seed=5)
    b = train(kind, data, hp, seed=5)
    assert json.dumps(model_to_dict(a)) == json.dumps(model_to_dict(b))
    path = tmp_path / "m.json"
    save_model(a, path)
    back = load_model(path)
    np.testing.assert_array_equal(predict(back, X)[1], predict(a, X)[1])
    with pytest.raises(ValueError, match="expected 4 features"):
        predict(a, X[:, :3])


def test_model_file_tampering_detected(tmp_path):
    X, y = noisy_blobs(40, 2)
    path = tmp_path / "m.json"
    save_model(train("LDA", TrainingSet(X, y)), path)
    doc = json.loads(path.read_text())
    doc["feature_names"] = ["a", "b"]
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="hash"):
        load_model(path)


def test_importance_rejects_non_tree_models():
    X, y = noisy_blobs(40, 2)
    with pytest.raises(TypeError):
        predictor_importance(train("SVMrbf", TrainingSet(X, y)))
    imp = predictor_importance(train("DecisionTree", TrainingSet(X, y, ("a", "b"))))
    assert set(imp) == {"a", "b"}


def test_training_set_validation():
    with pytest.raises(ValueError, match="missing"):
        TrainingSet(np.array([[np.nan], [1.0]]), np.array([0, 1]))
    with pytest.raises(ValueError, match="both classes"):
        TrainingSet(np.ones((3, 1)), np.zeros(3))
    assert TrainingSet(np.ones((3, 1)), np.array([0, 1, 1])).class_counts == (1, 2)


# --- search -------------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_search_samples_stay_in_range(kind):
    space = default_space(kind, budget=50)
    rng = np.random.default_rng(1)
    for _ in range(50):
        space.validate(space.sample(rng))


def test_search_prefers_simpler_on_ties_and_is_seeded():
    space = default_space("RndForest", budget=12)
    best, score, trials = random_search(space, lambda hp, k: 0.9, seed=4)
    assert score == 0.9
    assert best["n_trees"] == min(t[0]["n_trees"] for t in trials)
    again, _, _ = random_search(space, lambda hp, k: 0.9, seed=4)
    assert again == best
    best_lda, _, trials = random_search(default_space("LDA", 10), lambda hp, k: 1.0, seed=0)
    assert best_lda["shrinkage"] == max(t[0]["shrinkage"] for t in trials)


def test_search_picks_highest_score():
    space = default_space("DecisionTree", budget=10)
    best, score, trials = random_search(space, lambda hp, k: k / 10, seed=0)
    assert score == 0.9 and best == trials[9][0]
    with pytest.raises(ValueError):
        default_space("DecisionTree", budget=0)
