"""Per-breath ventilation features.

Every feature is computed either on the breath's functional image (end- minus
begin-inspiration frame) or on impedance curves restricted to the inspiration
window ``[begin_insp, end_insp]``. Missing values are NaN; a feature goes
missing when its denominator (sum, mean, swing or variance) is zero.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .atlas import PARTITIONS, REGION_NAMES, RoiAtlas
from .core import FormatError, FrameSequence, Label, atomic_write
from .cycles import BreathCycle, ImpedanceCurve, all_regional_curves

log = logging.getLogger(__name__)

FAMILIES = ("ratio", "CV", "GI", "RVD", "corr")
MAX_MISSING_FRACTION = 0.25
RVD_THRESHOLD = 0.4


def feit_image(seq: FrameSequence, cycle: BreathCycle) -> np.ndarray:
    """Functional image of one breath: frame[end_insp] - frame[begin_insp]."""
    if cycle.end_insp >= seq.n_frames:
        raise IndexError(f"cycle {cycle} is out of bounds for {seq.n_frames} frames")
    return seq.frames[cycle.end_insp] - seq.frames[cycle.begin_insp]


def ventilation_ratio(img: np.ndarray, atlas: RoiAtlas, region_a: str, region_b: str) -> float:
    num = float(img[atlas.mask(region_a)].sum())
    den = float(img[atlas.mask(region_b)].sum())
    if den == 0.0:
        return math.nan
    return num / den


def coefficient_of_variation(img: np.ndarray, atlas: RoiAtlas, region: str) -> float:
    """Sample standard deviation (ddof=1) over mean of the region's pixels."""
    values = img[atlas.mask(region)]
    if values.size < 2:
        return math.nan
    mean = values.mean()
    if mean == 0.0:
        return math.nan
    return float(values.std(ddof=1) / mean)


def global_inhomogeneity(img: np.ndarray, atlas: RoiAtlas, region: str) -> float:
    """GI index: sum of absolute deviations from the region median over the region sum."""
    values = img[atlas.mask(region)]
    if values.size == 0:
        return math.nan
    total = values.sum()
    if total == 0.0:
        return math.nan
    return float(np.abs(values - np.median(values)).sum() / total)


def regional_ventilation_delay(ric: ImpedanceCurve, cycle: BreathCycle, threshold: float = RVD_THRESHOLD) -> float:
    """Time for the regional curve to cover ``threshold`` of its inspiratory swing.

    Returned as a percentage of the inspiration duration, measured from
    begin-inspiration of the global cycle.
    """
    window = ric.window(cycle)
    start = window[0]
    top = window.max()
    if top == start:
        return math.nan
    level = start + threshold * (top - start)
    t = int(np.argmax(window >= level))
    return 100.0 * t / cycle.length


def curve_correlation(a: ImpedanceCurve, b: ImpedanceCurve, cycle: BreathCycle) -> float:
    """Pearson correlation of two curves over the inspiration window."""
    x = a.window(cycle)
    y = b.window(cycle)
    if x.size < 3:
        raise ValueError("correlation window needs at least 3 frames")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    family: str
    operands: tuple[str, ...]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")
        arity = {"ratio": 2, "corr": 2, "CV": 1, "GI": 1, "RVD": 1}[self.family]
        if len(self.operands) != arity:
            raise ValueError(f"{self.name}: family {self.family} takes {arity} operand(s)")


@dataclass(frozen=True)
class FeatureCatalog:
    features: tuple[FeatureDescriptor, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate feature names: {', '.join(dup)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def validate(self, atlas: RoiAtlas) -> None:
        for f in self.features:
            for op in f.operands:
                if op not in atlas.regions:
                    raise ValueError(f"feature {f.name} uses unknown region {op!r}")

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.names).encode()).hexdigest()

    def to_json(self) -> str:
        doc = {"version": 1, "features": [{"name": f.name, "family": f.family, "operands": list(f.operands)} for f in self]}
        return json.dumps(doc, indent=1)


def load_catalog(path) -> FeatureCatalog:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return FeatureCatalog(
            tuple(FeatureDescriptor(f["name"], f["family"], tuple(f["operands"])) for f in doc["features"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: invalid catalog: {exc}") from None


def _pairs(names):
    return list(itertools.combinations(names, 2))


def default_catalog(atlas: RoiAtlas | None = None) -> FeatureCatalog:
    """The 106-feature catalog over the standard 17-region atlas."""
    if atlas is not None and tuple(atlas.regions) != REGION_NAMES:
        raise ValueError("default catalog requires the standard 17-region atlas")
    rois = REGION_NAMES[1:]
    within = [("right", "left"), ("anterior", "posterior")]
    for fam in ("quadrants", "horizontal", "vertical"):
        within += _pairs(PARTITIONS[fam])

    out = []
    for a, b in within:
        out.append(FeatureDescriptor(f"ratio_{a}_{b}", "ratio", (a, b)))
    for r in REGION_NAMES:
        out.append(FeatureDescriptor(f"CV_{r}", "CV", (r,)))
    for r in REGION_NAMES:
        out.append(FeatureDescriptor(f"GI_{r}", "GI", (r,)))
    for r in rois:
        out.append(FeatureDescriptor(f"RVD_{r}", "RVD", (r,)))
    for r in rois:
        out.append(FeatureDescriptor(f"corr_global_{r}", "corr", ("global", r)))
    for a, b in within:
        out.append(FeatureDescriptor(f"corr_{a}_{b}", "corr", (a, b)))
    return FeatureCatalog(tuple(out))


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    names: tuple[str, ...]
    breath_index: int

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))

    @property
    def missing_fraction(self) -> float:
        return float(np.isnan(self.values).mean())


def breath_features(
    img: np.ndarray,
    curves: dict[str, ImpedanceCurve],
    cycle: BreathCycle,
    atlas: RoiAtlas,
    catalog: FeatureCatalog,
) -> np.ndarray:
    out = np.empty(len(catalog))
    for i, f in enumerate(catalog):
        ops = f.operands
        if f.family == "ratio":
            out[i] = ventilation_ratio(img, atlas, ops[0], ops[1])
        elif f.family == "CV":
            out[i] = coefficient_of_variation(img, atlas, ops[0])
        elif f.family == "GI":
            out[i] = global_inhomogeneity(img, atlas, ops[0])
        elif f.family == "RVD":
            out[i] = regional_ventilation_delay(curves[ops[0]], cycle)
        else:
            out[i] = curve_correlation(curves[ops[0]], curves[ops[1]], cycle)
    return out


def extract_features(
    seq: FrameSequence,
    atlas: RoiAtlas,
    cycles,
    catalog: FeatureCatalog | None = None,
) -> list[FeatureVector]:
    """One feature vector per breath cycle.

    Vectors with more than 25% missing features are dropped (logged).
    """
    catalog = catalog or default_catalog(atlas)
    catalog.validate(atlas)
    curves = all_regional_curves(seq, atlas)
    vectors = []
    for k, cycle in enumerate(cycles):
        values = breath_features(feit_image(seq, cycle), curves, cycle, atlas, catalog)
        missing = float(np.isnan(values).mean())
        if missing > MAX_MISSING_FRACTION:
            log.warning("dropping breath %d (%s): %.0f%% of features missing", k, cycle, 100 * missing)
            continue
        vectors.append(FeatureVector(values, catalog.names, k))
    return vectors


@dataclass(eq=False)
class FeatureDataset:
    """Feature matrix with per-row provenance. ``X`` holds NaN for missing values."""

    X: np.ndarray
    y: np.ndarray
    subject_ids: np.ndarray
    recording_ids: np.ndarray
    breath_index: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.y), -1)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.subject_ids = np.asarray(self.subject_ids, dtype=object)
        self.recording_ids = np.asarray(self.recording_ids, dtype=object)
        self.breath_index = np.asarray(self.breath_index, dtype=np.int64)
        self.names = tuple(self.names)
        n = len(self.y)
        if not (self.X.shape == (n, len(self.names)) and len(self.subject_ids) == len(self.recording_ids) == len(self.breath_index) == n):
            raise ValueError("inconsistent dataset dimensions")
        keys = set(zip(self.subject_ids.tolist(), self.recording_ids.tolist(), self.breath_index.tolist()))
        if len(keys) != n:
            raise ValueError("(subject_id, recording_id, breath_index) must be unique")

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self) -> int:
        return len(self.names)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.names.index(name)]
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def subset(self, idx) -> "FeatureDataset":
        idx = np.asarray(idx)
        return FeatureDataset(
            self.X[idx], self.y[idx], self.subject_ids[idx], self.recording_ids[idx], self.breath_index[idx], self.names
        )

    def samples(self):
        from .core import Sample

        for i in range(len(self)):
            yield Sample(
                self.subject_ids[i], self.recording_ids[i], int(self.breath_index[i]), Label(int(self.y[i])), self.X[i]
            )

    @classmethod
    def from_vectors(cls, names, rows) -> "FeatureDataset":
        """``rows``: iterable of (subject_id, recording_id, label, FeatureVector)."""
        rows = list(rows)
        d = len(names)
        X = np.array([r[3].values for r in rows]).reshape(len(rows), d)
        return cls(
            X,
            [int(r[2]) for r in rows],
            [r[0] for r in rows],
            [r[1] for r in rows],
            [r[3].breath_index for r in rows],
            names,
        )

    @classmethod
    def concat(cls, parts) -> "FeatureDataset":
        parts = list(parts)
        names = parts[0].names
        if any(p.names != names for p in parts):
            raise ValueError("cannot concatenate datasets with different catalogs")
        return cls(
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.subject_ids for p in parts]),
            np.concatenate([p.recording_ids for p in parts]),
            np.concatenate([p.breath_index for p in parts]),
            names,
        )

    def to_csv(self, path) -> None:
        head = ["subject_id", "recording_id", "breath_index", "label", *self.names]
        lines = [",".join(head)]
        for i in range(len(self)):
            vals = ["" if math.isnan(v) else repr(float(v)) for v in self.X[i]]
            lines.append(
                ",".join([str(self.subject_ids[i]), str(self.recording_ids[i]), str(int(self.breath_index[i])), Label(int(self.y[i])).token, *vals])
            )
        atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "FeatureDataset":
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                head = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty feature file") from None
            if head[:4] != ["subject_id", "recording_id", "breath_index", "label"]:
                raise FormatError(f"{path}: header must start with subject_id,recording_id,breath_index,label")
            names = head[4:]
            sid, rid, bi, y, X = [], [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(head):
                    raise FormatError(f"{path}: line {lineno}: expected {len(head)} cells, got {len(row)}")
                try:
                    sid.append(row[0])
                    rid.append(row[1])
                    bi.append(int(row[2]))
                    y.append(int(Label.parse(row[3])))
                    X.append([float(v) if v.strip() else math.nan for v in row[4:]])
                except ValueError as exc:
                    raise FormatError(f"{path}: line {lineno}: {exc}") from None
        try:
            return cls(np.array(X, dtype=np.float64).reshape(len(y), len(names)), y, sid, rid, bi, names)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None


def extract_manifest(
    manifest,
    atlas: RoiAtlas | None = None,
    catalog: FeatureCatalog | None = None,
    auto_detect: bool = False,
    min_duration_s: float = 1.0,
    min_prominence_frac: float = 0.15,
) -> FeatureDataset:
    """Extract every recording of a cohort manifest into one dataset.

    Annotations are used when present unless ``auto_detect`` is set.
    """
    from .core import read_recording
    from .cycles import detect_breaths, global_curve, read_annotations
    from .atlas import build_atlas

    rows = []
    for entry in manifest:
        seq = read_recording(entry.recording_path)
        at = atlas or build_atlas(seq.width, seq.height)
        cat = catalog or default_catalog(at)
        if entry.annotation_path is not None and not auto_detect:
            cycles = read_annotations(entry.annotation_path, seq.n_frames)
        else:
            cycles = detect_breaths(global_curve(seq, at), min_duration_s, min_prominence_frac)
        for vec in extract_features(seq, at, cycles, cat):
            rows.append((entry.subject_id, entry.recording_id, entry.label, vec))
    if not rows:
        raise ValueError("no breaths extracted from the manifest")
    return FeatureDataset.from_vectors(rows[0][3].names, rows)
