"""Parametric thorax phantom recordings and confounded synthetic cohorts.

Each pixel follows ``dZ(p, t) = A(p) * s(t - delay(p)) + noise`` where ``A`` is
built from two elliptical lung domes and ``s`` is a train of breath bumps:
a raised cosine (or triangle) per breath, minimum at begin-inspiration and
maximum half a period later. Deep breaths have ``deep_factor`` times the
tidal amplitude.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .atlas import build_atlas
from .core import CohortManifest, FrameSequence, Label, ManifestEntry, atomic_write, write_manifest, write_recording
from .cycles import BreathCycle, write_annotations

WAVEFORMS = ("raised_cosine", "linear")


@dataclass(frozen=True)
class PhantomSpec:
    subject_id: str = "phantom"
    label: Label = Label.HEALTHY
    width: int = 32
    height: int = 32
    fps: float = 33.0
    rate_hz: float = 0.25
    n_tidal: int = 3
    n_deep: int = 3
    deep_factor: float = 2.0
    waveform: str = "raised_cosine"
    right_amplitude: float = 1.0
    left_amplitude: float = 1.0
    ap_tilt: float = 0.0
    inhomogeneity: float = 0.0
    dropout_depth: float = 0.0
    dropout_center: tuple = (0.5, 0.3)
    dropout_radius: float = 0.2
    posterior_delay: float = 0.0
    lateral_delay: float = 0.0
    delay_heterogeneity: float = 0.0
    breath_jitter: float = 0.0
    rate_jitter: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ValueError("breathing rate must be positive")
        if self.n_tidal + self.n_deep < 1:
            raise ValueError("need at least one breath")
        if self.noise < 0 or self.breath_jitter < 0 or self.rate_jitter < 0 or self.inhomogeneity < 0:
            raise ValueError("noise, jitter and inhomogeneity must be non-negative")
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"waveform must be one of {WAVEFORMS}")
        if not 0 <= self.dropout_depth <= 1:
            raise ValueError("dropout_depth must be in [0, 1]")
        period = 1.0 / self.rate_hz
        if abs(self.posterior_delay) + abs(self.lateral_delay) + 3 * self.delay_heterogeneity >= period:
            raise ValueError("regional delays must stay below one breathing period")
        if self.right_amplitude < 0 or self.left_amplitude < 0:
            raise ValueError("lung amplitudes must be non-negative")

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz


@dataclass(eq=False)
class PhantomRecording:
    spec: PhantomSpec
    sequence: FrameSequence
    cycles: list
    amplitude: np.ndarray
    delay: np.ndarray
    expected: dict = field(default_factory=dict)


def lung_domes(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Parabolic dome profiles of the right (image-left) and left lungs."""
    rows, cols = np.mgrid[0:height, 0:width]
    y = (rows + 0.5) / height
    x = (cols + 0.5) / width
    out = []
    for cx in (0.3, 0.7):
        rho2 = ((x - cx) / 0.2) ** 2 + ((y - 0.5) / 0.38) ** 2
        out.append(np.clip(1.0 - rho2, 0.0, None))
    return out[0], out[1]


def _smooth_field(rng, width, height, n_waves=4) -> np.ndarray:
    rows, cols = np.mgrid[0:height, 0:width]
    y = rows / height
    x = cols / width
    f = np.zeros((height, width))
    for _ in range(n_waves):
        kx, ky = rng.uniform(0.5, 2.5, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        f += np.cos(2 * np.pi * (kx * x + ky * y) + phase)
    return f / np.abs(f).max()


def amplitude_map(spec: PhantomSpec, rng=None) -> np.ndarray:
    rng = rng if rng is not None else np.random.default_rng([spec.seed, 1])
    right, left = lung_domes(spec.width, spec.height)
    A = spec.right_amplitude * right + spec.left_amplitude * left
    rows = (np.arange(spec.height) + 0.5) / spec.height
    A = A * (1.0 + spec.ap_tilt * (2 * rows[:, None] - 1.0))
    if spec.inhomogeneity:
        A = A * np.clip(1.0 + spec.inhomogeneity * _smooth_field(rng, spec.width, spec.height), 0.0, None)
    if spec.dropout_depth:
        r, c = np.mgrid[0 : spec.height, 0 : spec.width]
        cy, cx = spec.dropout_center
        d2 = ((r + 0.5) / spec.height - cy) ** 2 + ((c + 0.5) / spec.width - cx) ** 2
        A = A * (1.0 - spec.dropout_depth * np.exp(-d2 / (2 * spec.dropout_radius**2)))
    return np.clip(A, 0.0, None)


def delay_map(spec: PhantomSpec, rng=None) -> np.ndarray:
    rng = rng if rng is not None else np.random.default_rng([spec.seed, 2])
    rows = np.arange(spec.height)
    cols = np.arange(spec.width)
    delay = np.where(rows >= spec.height // 2, spec.posterior_delay, 0.0)[:, None] * np.ones((1, spec.width))
    delay = delay + np.where(cols >= spec.width // 2, spec.lateral_delay, 0.0)[None, :]
    if spec.delay_heterogeneity:
        delay = delay + spec.delay_heterogeneity * _smooth_field(rng, spec.width, spec.height)
    return delay


def _bump(phase: np.ndarray, waveform: str) -> np.ndarray:
    """Single breath on phase in [0, 1): 0 at the ends, 1 at phase 0.5."""
    inside = (phase >= 0) & (phase < 1)
    if waveform == "raised_cosine":
        b = 0.5 * (1.0 - np.cos(2 * np.pi * phase))
    else:
        b = 1.0 - np.abs(2 * phase - 1.0)
    return np.where(inside, b, 0.0)


def _quadrant_index(width, height) -> np.ndarray:
    rows, cols = np.mgrid[0:height, 0:width]
    return (2 * (rows >= height // 2) + (cols >= width // 2)).ravel()


def expected_features(amplitude: np.ndarray) -> dict:
    """Amplitude-derived feature values (exact when delays, jitter and noise are zero)."""
    from .features import coefficient_of_variation, global_inhomogeneity, ventilation_ratio

    h, w = amplitude.shape
    atlas = build_atlas(w, h)
    return {
        "ratio_right_left": ventilation_ratio(amplitude, atlas, "right", "left"),
        "ratio_anterior_posterior": ventilation_ratio(amplitude, atlas, "anterior", "posterior"),
        "GI_global": global_inhomogeneity(amplitude, atlas, "global"),
        "CV_global": coefficient_of_variation(amplitude, atlas, "global"),
    }


def generate_recording(spec: PhantomSpec) -> PhantomRecording:
    """Synthesize one recording with exact ground-truth breath cycles."""
    rng = np.random.default_rng([spec.seed, 0])
    A = amplitude_map(spec, np.random.default_rng([spec.seed, 1]))
    delay = delay_map(spec, np.random.default_rng([spec.seed, 2]))
    n_breaths = spec.n_tidal + spec.n_deep
    periods = spec.period * np.exp(spec.rate_jitter * rng.standard_normal(n_breaths))
    starts = np.concatenate([[0.0], np.cumsum(periods)[:-1]])
    total = float(periods.sum())
    n_frames = int(round(total * spec.fps)) + 1
    t = np.arange(n_frames) / spec.fps

    hw = spec.height * spec.width
    amp_flat = A.ravel()
    delay_flat = delay.ravel()
    quadrant = _quadrant_index(spec.width, spec.height)
    frames = np.zeros((n_frames, hw))
    cycles = []
    for k in range(n_breaths):
        level = 1.0 if k < spec.n_tidal else spec.deep_factor
        jitter = np.exp(spec.breath_jitter * rng.standard_normal(4))[quadrant]
        lo = max(0, int(math.floor((starts[k] + delay_flat.min()) * spec.fps)))
        hi = min(n_frames, int(math.ceil((starts[k] + periods[k] + delay_flat.max()) * spec.fps)) + 1)
        phase = (t[lo:hi, None] - starts[k] - delay_flat[None, :]) / periods[k]
        frames[lo:hi] += level * jitter * amp_flat * _bump(phase, spec.waveform)
        begin = int(round(starts[k] * spec.fps))
        end = int(round((starts[k] + 0.5 * periods[k]) * spec.fps))
        cycles.append(BreathCycle(begin, min(end, n_frames - 1)))
    if spec.noise:
        frames += spec.noise * float(amp_flat.max()) * rng.standard_normal(frames.shape)
    # store exactly what an EITF file would hold
    frames = frames.astype(np.float32).astype(np.float64)
    seq = FrameSequence(frames.reshape(n_frames, spec.height, spec.width), spec.fps)
    return PhantomRecording(spec, seq, cycles, A, delay, expected_features(A))


@dataclass(frozen=True)
class CohortConfig:
    """Knobs of the confounded cohort. Subject-level spreads default to 3x the
    within-subject (breath/recording) spreads."""

    within_sd: float = 0.04
    bias_factor: float = 3.0
    breaths_per_recording: int = 6
    noise: float = 0.02
    pathology_prob: float = 0.5

    @property
    def subject_sd(self) -> float:
        return self.bias_factor * self.within_sd


def _split_evenly(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def subject_spec(subject_id: str, label: Label, rng, config: CohortConfig = CohortConfig()) -> PhantomSpec:
    """Draw subject-level phantom parameters (the subject 'bias')."""
    sd = config.subject_sd
    spec = dict(
        subject_id=subject_id,
        label=label,
        rate_hz=float(rng.uniform(0.2, 0.33)),
        right_amplitude=float(np.exp(sd * rng.standard_normal())),
        left_amplitude=float(0.9 * np.exp(sd * rng.standard_normal())),
        ap_tilt=float(0.15 + sd * rng.standard_normal()),
        inhomogeneity=float(rng.uniform(0.05, 0.15)),
        posterior_delay=float(0.1 * sd * rng.standard_normal()),
        lateral_delay=0.0,
        delay_heterogeneity=float(rng.uniform(0.0, 0.03)),
        breath_jitter=config.within_sd,
        rate_jitter=config.within_sd,
        noise=config.noise,
    )
    if label is Label.NONHEALTHY:
        flags = rng.random(3) < config.pathology_prob
        if not flags.any():
            flags[int(rng.integers(3))] = True
        severity = float(rng.uniform(0.2, 1.0))
        if flags[0]:
            key = "right_amplitude" if rng.random() < 0.5 else "left_amplitude"
            spec[key] *= 1.0 - 0.5 * severity
        if flags[1]:
            key = "posterior_delay" if rng.random() < 0.5 else "lateral_delay"
            spec[key] += 0.3 * severity * float(rng.uniform(0.5, 1.0))
            spec["delay_heterogeneity"] += 0.1 * severity
        if flags[2]:
            cx = 0.3 if rng.random() < 0.5 else 0.7
            spec["dropout_depth"] = 0.8 * severity
            spec["dropout_center"] = (float(rng.uniform(0.3, 0.7)), cx)
            spec["dropout_radius"] = float(rng.uniform(0.08, 0.15))
        spec["inhomogeneity"] += 0.2 * severity * float(rng.random())
    return PhantomSpec(**spec)


def iter_cohort(
    n_healthy: int = 5,
    n_nonhealthy: int = 11,
    breaths_healthy: int = 392,
    breaths_nonhealthy: int = 1108,
    seed: int = 0,
    config: CohortConfig = CohortConfig(),
):
    """Yield (recording_id, PhantomRecording) for every recording of the cohort.

    Class breath totals are split evenly over subjects and recordings; each
    recording holds tidal breaths followed by deep breaths.
    """
    if n_healthy < 1 or n_nonhealthy < 1:
        raise ValueError("need at least one subject per class")
    subjects = [(f"H{i + 1:02d}", Label.HEALTHY) for i in range(n_healthy)]
    subjects += [(f"NH{i + 1:02d}", Label.NONHEALTHY) for i in range(n_nonhealthy)]
    per_subject = _split_evenly(breaths_healthy, n_healthy) + _split_evenly(breaths_nonhealthy, n_nonhealthy)
    for s, ((sid, label), n_breaths) in enumerate(zip(subjects, per_subject)):
        rng = np.random.default_rng([seed, s])
        base = subject_spec(sid, label, rng, config)
        n_rec = max(1, math.ceil(n_breaths / config.breaths_per_recording))
        wsd = config.within_sd
        for r, nb in enumerate(_split_evenly(n_breaths, n_rec)):
            if nb == 0:
                continue
            n_tidal = math.ceil(nb / 2)
            spec = replace(
                base,
                n_tidal=n_tidal,
                n_deep=nb - n_tidal,
                right_amplitude=base.right_amplitude * float(np.exp(wsd * rng.standard_normal())),
                left_amplitude=base.left_amplitude * float(np.exp(wsd * rng.standard_normal())),
                ap_tilt=base.ap_tilt + wsd * float(rng.standard_normal()),
                seed=int(rng.integers(0, 2**31)),
            )
            yield f"{sid}_r{r + 1:02d}", generate_recording(spec)


def _spec_json(spec: PhantomSpec) -> dict:
    doc = asdict(spec)
    doc["label"] = spec.label.token
    doc["dropout_center"] = list(spec.dropout_center)
    return doc


def generate_cohort(
    out_dir,
    n_healthy: int = 5,
    n_nonhealthy: int = 11,
    seed: int = 0,
    breaths_healthy: int = 392,
    breaths_nonhealthy: int = 1108,
    config: CohortConfig = CohortConfig(),
) -> CohortManifest:
    """Write EITF recordings, ground-truth annotations, expected-feature JSON
    and ``manifest.csv`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "recordings").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(exist_ok=True)
    (out / "expected").mkdir(exist_ok=True)
    entries = []
    for rec_id, rec in iter_cohort(n_healthy, n_nonhealthy, breaths_healthy, breaths_nonhealthy, seed, config):
        rec_path = out / "recordings" / f"{rec_id}.eitf"
        ann_path = out / "annotations" / f"{rec_id}.csv"
        write_recording(rec.sequence, rec_path)
        write_annotations(rec.cycles, ann_path)
        doc = {"recording_id": rec_id, "spec": _spec_json(rec.spec), "expected_features": rec.expected}
        atomic_write(out / "expected" / f"{rec_id}.json", json.dumps(doc, indent=1, sort_keys=True))
        entries.append(ManifestEntry(rec.spec.subject_id, rec.spec.label, rec_path, ann_path))
    manifest = CohortManifest(tuple(entries))
    write_manifest(manifest, out / "manifest.csv")
    return manifest


def synthesize_dataset(
    n_healthy: int = 5,
    n_nonhealthy: int = 11,
    seed: int = 0,
    breaths_healthy: int = 392,
    breaths_nonhealthy: int = 1108,
    config: CohortConfig = CohortConfig(),
    detect: bool = False,
):
    """Generate a cohort and extract features in memory (nothing touches disk).

    Uses the ground-truth cycles unless ``detect`` is set.
    """
    from .cycles import detect_breaths, global_curve
    from .features import FeatureDataset, default_catalog, extract_features

    atlas = None
    catalog = None
    rows = []
    for rec_id, rec in iter_cohort(n_healthy, n_nonhealthy, breaths_healthy, breaths_nonhealthy, seed, config):
        if atlas is None:
            atlas = build_atlas(rec.sequence.width, rec.sequence.height)
            catalog = default_catalog(atlas)
        cycles = detect_breaths(global_curve(rec.sequence, atlas)) if detect else rec.cycles
        for vec in extract_features(rec.sequence, atlas, cycles, catalog):
            rows.append((rec.spec.subject_id, rec_id, rec.spec.label, vec))
    return FeatureDataset.from_vectors(catalog.names, rows)
