"""Repeated hold-out evaluation (sample-wise A, patient-wise B), metrics and reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .classifiers import KINDS, TREE_KINDS, TrainingSet, default_space, predict, random_search, train
from .core import Label, atomic_write
from .features import FeatureDataset

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
SCENARIOS = ("A", "B")
TEST_FRACTION = 0.25
VALIDATION_FRACTION = 0.25


class PlanningError(ValueError):
    """The requested split cannot satisfy the scenario's constraints."""


def derive_seed(master_seed: int, *keys: int) -> int:
    """Fixed mixing of a master seed and integer keys into a 32-bit seed."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True, eq=False)
class SplitPlan:
    scenario: str
    seed: int
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    @property
    def training(self) -> np.ndarray:
        """Train plus validation rows (the refit set)."""
        return np.sort(np.concatenate([self.train, self.validation]))


def _proportional(counts: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder allocation of ``total`` across classes."""
    n = counts.sum()
    exact = total * counts / n
    alloc = np.floor(exact).astype(int)
    rem = total - alloc.sum()
    order = sorted(range(len(counts)), key=lambda c: (-(exact[c] - alloc[c]), c))
    for c in order[:rem]:
        alloc[c] += 1
    return alloc


def _stratified_take(rows: np.ndarray, y: np.ndarray, n_take: int, rng) -> tuple[np.ndarray, np.ndarray]:
    classes = np.array([0, 1])
    counts = np.array([(y[rows] == c).sum() for c in classes])
    quota = _proportional(counts, n_take)
    taken = []
    for c, q in zip(classes, quota):
        members = rows[y[rows] == c]
        taken.append(rng.permutation(members)[:q])
    taken = np.sort(np.concatenate(taken))
    rest = np.setdiff1d(rows, taken)
    return taken, rest


def _subject_table(ds: FeatureDataset):
    subjects = sorted(set(ds.subject_ids.tolist()))
    label = {s: int(ds.y[ds.subject_ids == s][0]) for s in subjects}
    size = {s: int((ds.subject_ids == s).sum()) for s in subjects}
    return subjects, label, size


def _pick_subjects(pool: list[str], label: dict, size: dict, rng, min_rows: int | None):
    """Choose ≥25% of subjects per class (keeping ≥1 per class behind); with
    ``min_rows``, keep adding subjects until their rows reach it."""
    by_class = {c: [s for s in pool if label[s] == c] for c in (0, 1)}
    shuffled = {c: [by_class[c][i] for i in rng.permutation(len(by_class[c]))] for c in (0, 1)}
    chosen = []
    for c in (0, 1):
        n_c = len(shuffled[c])
        k = min(math.ceil(TEST_FRACTION * n_c), n_c - 1)
        chosen += shuffled[c][:k]
    if min_rows is not None:
        remaining = [s for s in pool if s not in chosen]
        remaining = [remaining[i] for i in rng.permutation(len(remaining))]
        while sum(size[s] for s in chosen) < min_rows:
            for s in remaining:
                left = [x for x in by_class[label[s]] if x not in chosen and x != s]
                if left:
                    chosen.append(s)
                    remaining.remove(s)
                    break
            else:
                raise PlanningError("cannot reach the test-sample quota while keeping both classes in training")
    return chosen


def plan_split(ds: FeatureDataset, scenario: str, seed: int) -> SplitPlan:
    """Split rows into train / validation / test for one run.

    Scenario A: stratified 25% test, then stratified 25% of the rest for
    validation. Scenario B: whole subjects go to test (≥25% of each class's
    subjects and ≥25% of all rows), validation subjects are drawn likewise
    from the remaining subjects.
    """
    rng = np.random.default_rng(seed)
    n = len(ds)
    rows = np.arange(n)
    if scenario == "A":
        counts = np.bincount(ds.y, minlength=2)
        if counts.min() < 8:
            raise PlanningError(f"Scenario A needs at least 8 samples per class, got {counts.tolist()}")
        n_test = int(math.floor(TEST_FRACTION * n + 0.5))
        test, train_all = _stratified_take(rows, ds.y, n_test, rng)
        n_val = int(math.floor(VALIDATION_FRACTION * train_all.size))
        val, train = _stratified_take(train_all, ds.y, n_val, rng)
    elif scenario == "B":
        subjects, label, size = _subject_table(ds)
        per_class = [sum(1 for s in subjects if label[s] == c) for c in (0, 1)]
        if min(per_class) < 2:
            raise PlanningError(f"Scenario B needs at least 2 subjects per class, got {per_class}")
        test_subj = _pick_subjects(subjects, label, size, rng, min_rows=math.ceil(TEST_FRACTION * n))
        train_subj = [s for s in subjects if s not in test_subj]
        val_subj = _pick_subjects(train_subj, label, size, rng, min_rows=None)
        test = rows[np.isin(ds.subject_ids, test_subj)]
        val = rows[np.isin(ds.subject_ids, val_subj)]
        train = rows[~np.isin(ds.subject_ids, test_subj + val_subj)]
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return SplitPlan(scenario, int(seed), np.sort(train), np.sort(val), np.sort(test))


@dataclass(frozen=True)
class MetricsRow:
    accuracy: float
    f1_h: float
    recall_h: float
    precision_h: float
    specificity_h: float
    f1_nh: float
    recall_nh: float
    precision_nh: float
    specificity_nh: float

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = tuple(f.name for f in fields(MetricsRow))
METRIC_HEADERS = ("Acc", "F1 H", "Rec H", "Prec H", "Spec H", "F1 NH", "Rec NH", "Prec NH", "Spec NH")


def _safe_div(a, b):
    return a / b if b else 0.0


def compute_metrics(predictions, truths) -> MetricsRow:
    """Accuracy and per-class F1 / recall / precision / specificity.

    An undefined precision (class never predicted) is reported as 0.
    """
    p = np.asarray(predictions, dtype=np.int64)
    t = np.asarray(truths, dtype=np.int64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError("predictions and truths must be equal-length vectors")
    if not ((t == 0).any() and (t == 1).any()):
        raise ValueError("truths must contain both classes")
    out = {}
    for c, tag in ((0, "h"), (1, "nh")):
        tp = int(((p == c) & (t == c)).sum())
        fn = int(((p != c) & (t == c)).sum())
        fp = int(((p == c) & (t != c)).sum())
        tn = int(((p != c) & (t != c)).sum())
        prec = _safe_div(tp, tp + fp)
        rec = _safe_div(tp, tp + fn)
        out[f"precision_{tag}"] = prec
        out[f"recall_{tag}"] = rec
        out[f"specificity_{tag}"] = _safe_div(tn, tn + fp)
        out[f"f1_{tag}"] = _safe_div(2 * prec * rec, prec + rec)
    out["accuracy"] = float((p == t).mean())
    return MetricsRow(**out)


def train_medians(X: np.ndarray) -> np.ndarray:
    """Per-column medians ignoring NaN; all-missing columns impute 0."""
    med = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            med[j] = np.median(col)
    return med


def impute(X: np.ndarray, medians: np.ndarray) -> np.ndarray:
    X = np.array(X, dtype=np.float64, copy=True)
    mask = np.isnan(X)
    if mask.any():
        X[mask] = np.broadcast_to(medians, X.shape)[mask]
    return X


def _run_classifier(ds, plan, kind, kind_index, scenario_index, run, master_seed, budget):
    X, y = ds.X, ds.y
    med_inner = train_medians(X[plan.train])
    Xtr = impute(X[plan.train], med_inner)
    Xval = impute(X[plan.validation], med_inner)
    inner = TrainingSet(Xtr, y[plan.train], ds.names)
    space = default_space(kind, budget)

    def evaluate(hp, k):
        model = train(kind, inner, hp, derive_seed(master_seed, scenario_index, run, kind_index, 1, k))
        if plan.validation.size == 0:
            return 0.0
        labels, _ = predict(model, Xval)
        return float((labels == y[plan.validation]).mean())

    best_hp, best_val, _ = random_search(space, evaluate, derive_seed(master_seed, scenario_index, run, kind_index, 0))

    refit_rows = plan.training
    med = train_medians(X[refit_rows])
    full = TrainingSet(impute(X[refit_rows], med), y[refit_rows], ds.names)
    model = train(kind, full, best_hp, derive_seed(master_seed, scenario_index, run, kind_index, 2))
    labels, _ = predict(model, impute(X[plan.test], med))
    row = {
        "run": run,
        "metrics": compute_metrics(labels, y[plan.test]).as_dict(),
        "hyperparameters": model.hyperparameters,
        "validation_accuracy": best_val,
    }
    if kind in TREE_KINDS:
        row["importance"] = model.estimator.feature_importance().tolist()
    return row


def _run_task(args):
    ds, scenario, run, kinds, master_seed, budget = args
    s_idx = SCENARIOS.index(scenario)
    plan = plan_split(ds, scenario, derive_seed(master_seed, s_idx, run))
    split = {
        "seed": plan.seed,
        "n_train": int(plan.train.size),
        "n_validation": int(plan.validation.size),
        "n_test": int(plan.test.size),
        "test_subjects": sorted(set(ds.subject_ids[plan.test].tolist())),
    }
    results = {}
    for kind in kinds:
        try:
            results[kind] = _run_classifier(ds, plan, kind, KINDS.index(kind), s_idx, run, master_seed, budget)
        except Exception as exc:
            raise RuntimeError(f"scenario {scenario} run {run} ({kind}) failed: {exc}") from exc
    return scenario, run, split, results


def _mean_std(values):
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean())
    std = float(v.std(ddof=1)) if v.size > 1 else None
    return {"mean": mean, "std": std}


def run_experiment(
    ds: FeatureDataset,
    scenarios=("A", "B"),
    classifiers=KINDS,
    runs: int = 50,
    master_seed: int = 0,
    budget: int = 30,
    jobs: int = 1,
) -> dict:
    """Repeat split / search / refit / test for every scenario and classifier.

    Returns the report as a JSON-ready dict; results depend only on the
    inputs and ``master_seed``, never on ``jobs``.
    """
    scenarios = tuple(scenarios)
    classifiers = tuple(classifiers)
    for s in scenarios:
        if s not in SCENARIOS:
            raise ValueError(f"unknown scenario {s!r}")
    for k in classifiers:
        if k not in KINDS:
            raise ValueError(f"unknown classifier {k!r}")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    for s in scenarios:
        plan_split(ds, s, derive_seed(master_seed, SCENARIOS.index(s), 0))

    tasks = [(ds, s, r, classifiers, master_seed, budget) for s in scenarios for r in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    results.sort(key=lambda r: (SCENARIOS.index(r[0]), r[1]))

    subjects, label, _ = _subject_table(ds)
    report = {
        "schema": "eitml.evaluation-report",
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {
            "scenarios": list(scenarios),
            "classifiers": list(classifiers),
            "runs": runs,
            "master_seed": master_seed,
            "search": {"strategy": "random", "budget": budget, "selection": "validation accuracy"},
            "test_fraction": TEST_FRACTION,
            "validation_fraction": VALIDATION_FRACTION,
        },
        "dataset": {
            "n_samples": len(ds),
            "n_subjects": len(subjects),
            "class_counts": {Label(c).short: int((ds.y == c).sum()) for c in (0, 1)},
            "subjects_per_class": {Label(c).short: sum(1 for s in subjects if label[s] == c) for c in (0, 1)},
            "feature_names": list(ds.names),
        },
        "scenarios": {},
    }
    for s in scenarios:
        rows = [r for r in results if r[0] == s]
        section = {"splits": [dict(run=r[1], **r[2]) for r in rows], "classifiers": {}}
        for k in classifiers:
            per_run = [r[3][k] for r in rows]
            summary = {m: _mean_std([pr["metrics"][m] for pr in per_run]) for m in METRIC_NAMES}
            entry = {"summary": summary, "runs": per_run}
            if k in TREE_KINDS:
                mean_imp = np.mean([pr["importance"] for pr in per_run], axis=0)
                order = sorted(range(len(ds.names)), key=lambda j: (-mean_imp[j], j))
                entry["importance"] = {"mean": mean_imp.tolist(), "ranking": [ds.names[j] for j in order]}
            section["classifiers"][k] = entry
        report["scenarios"][s] = section
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=False)


def write_report(report: dict, path) -> None:
    atomic_write(path, report_to_json(report) + "\n")


def load_report(path) -> dict:
    from pathlib import Path

    from .core import FormatError

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if doc.get("schema") != "eitml.evaluation-report" or doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise FormatError(f"{path}: not an evaluation report (schema version {REPORT_SCHEMA_VERSION})")
    return doc


def _fmt(stat) -> str:
    mean = 100 * stat["mean"]
    if stat["std"] is None:
        return f"{mean:.1f}"
    return f"{mean:.1f}±{100 * stat['std']:.1f}"


def summary_table(report: dict) -> str:
    """CSV shaped like the per-class results tables (percent, one decimal)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Scenario", "Classifier", *METRIC_HEADERS])
    for s, section in report["scenarios"].items():
        for k, entry in section["classifiers"].items():
            w.writerow([s, k, *(_fmt(entry["summary"][m]) for m in METRIC_NAMES)])
    return buf.getvalue()


def importance_table(report: dict, top: int = 10, classifier: str = "RndForest") -> str:
    """Top-``top`` features per scenario, one column per scenario."""
    cols = []
    for s, section in report["scenarios"].items():
        entry = section["classifiers"].get(classifier)
        if entry is None or "importance" not in entry:
            raise KeyError(f"report has no importance for {classifier} in scenario {s}")
        cols.append((f"Scenario {s}", entry["importance"]["ranking"][:top]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", *(c[0] for c in cols)])
    for i in range(top):
        w.writerow([i + 1, *(c[1][i] if i < len(c[1]) else "" for c in cols)])
    return buf.getvalue()


def export_feature_distributions(ds: FeatureDataset, feature_names) -> list[dict]:
    """Per feature and class: five-number summary and 1.5*IQR outliers.

    Quartiles use the Hazen plotting position, (i - 0.5) / n.
    """
    rows = []
    for name in feature_names:
        col = ds.column(name)
        for c in (0, 1):
            v = col[(ds.y == c) & ~np.isnan(col)]
            if v.size == 0:
                rows.append({"feature": name, "class": Label(c).token, "n": 0})
                continue
            q1, med, q3 = np.percentile(v, [25, 50, 75], method="hazen")
            iqr = q3 - q1
            lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
            outliers = np.sort(v[(v < lo) | (v > hi)])
            rows.append(
                {
                    "feature": name,
                    "class": Label(c).token,
                    "n": int(v.size),
                    "min": float(v.min()),
                    "q1": float(q1),
                    "median": float(med),
                    "q3": float(q3),
                    "max": float(v.max()),
                    "outliers": outliers.tolist(),
                }
            )
    return rows


def distributions_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "class", "n", "min", "q1", "median", "q3", "max", "outliers"])
    for r in rows:
        if r["n"] == 0:
            w.writerow([r["feature"], r["class"], 0, "", "", "", "", "", ""])
            continue
        w.writerow(
            [r["feature"], r["class"], r["n"], *(repr(r[k]) for k in ("min", "q1", "median", "q3", "max")),
             ";".join(repr(x) for x in r["outliers"])]
        )
    return buf.getvalue()
