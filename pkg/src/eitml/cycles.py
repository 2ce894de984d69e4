"""Impedance curves and breath segmentation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from .atlas import RoiAtlas
from .core import FormatError, FrameSequence, atomic_write

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ImpedanceCurve:
    values: np.ndarray
    fps: float
    roi_name: str = "global"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("impedance curve must be a non-empty 1-D series")
        if not np.isfinite(v).all():
            raise ValueError("impedance curve contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def window(self, cycle: "BreathCycle") -> np.ndarray:
        """Inspiration window ``[begin_insp, end_insp]`` inclusive."""
        if cycle.end_insp >= self.values.size:
            raise IndexError(f"cycle {cycle} exceeds curve length {self.values.size}")
        return self.values[cycle.begin_insp : cycle.end_insp + 1]


@dataclass(frozen=True, order=True)
class BreathCycle:
    begin_insp: int
    end_insp: int

    def __post_init__(self):
        if self.begin_insp < 0:
            raise ValueError(f"negative frame index in {self}")
        if self.begin_insp >= self.end_insp:
            raise ValueError(f"begin_insp must precede end_insp: {self.begin_insp} >= {self.end_insp}")

    @property
    def length(self) -> int:
        return self.end_insp - self.begin_insp


def _check_grid(seq: FrameSequence, atlas: RoiAtlas):
    if (seq.width, seq.height) != atlas.grid:
        raise ValueError(f"atlas grid {atlas.grid} does not match recording {seq.width}x{seq.height}")


def regional_curve(seq: FrameSequence, atlas: RoiAtlas, roi_name: str) -> ImpedanceCurve:
    _check_grid(seq, atlas)
    mask = atlas.mask(roi_name)
    values = seq.frames[:, mask].sum(axis=1)
    return ImpedanceCurve(values, seq.fps, roi_name)


def global_curve(seq: FrameSequence, atlas: RoiAtlas) -> ImpedanceCurve:
    """Global impedance curve: per-frame sum over the lung field."""
    return regional_curve(seq, atlas, "global")


def all_regional_curves(seq: FrameSequence, atlas: RoiAtlas) -> dict[str, ImpedanceCurve]:
    _check_grid(seq, atlas)
    flat = seq.frames.reshape(seq.n_frames, -1)
    sums = {name: flat[:, m.ravel()].sum(axis=1) for name, m in atlas.regions.items()}
    return {name: ImpedanceCurve(v, seq.fps, name) for name, v in sums.items()}


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge-shrinking windows; window <= 1 is a no-op."""
    values = np.asarray(values, dtype=np.float64)
    if window <= 1:
        return values.copy()
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(values.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + window - half, values.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def detect_breaths(
    gic: ImpedanceCurve,
    min_duration_s: float = 1.0,
    min_prominence_frac: float = 0.15,
    smooth: bool = False,
) -> list[BreathCycle]:
    """Segment inspirations from a global impedance curve.

    End-inspiration frames are local maxima whose prominence is at least
    ``min_prominence_frac`` of the curve's range; each begin-inspiration frame
    is the minimum between the previous maximum (or the series start) and the
    current one. Cycles shorter than ``min_duration_s`` are discarded.
    """
    values = gic.values
    if values.size < 3 * gic.fps * min_duration_s:
        raise ValueError(
            f"curve has {values.size} frames; need at least {3 * gic.fps * min_duration_s:.0f} "
            f"(3 x fps x min_duration)"
        )
    if smooth:
        values = moving_average(values, max(1, int(round(gic.fps / 10))))
    span = float(values.max() - values.min())
    if span <= 0:
        return []
    peaks, _ = find_peaks(values, prominence=min_prominence_frac * span)
    cycles = []
    prev = 0
    for p in peaks:
        begin = prev + int(np.argmin(values[prev : p + 1]))
        prev = int(p)
        if begin >= p:
            continue
        if (p - begin) / gic.fps >= min_duration_s:
            cycles.append(BreathCycle(begin, int(p)))
    return cycles


def validate_cycles(cycles, n_frames: int | None = None) -> list[BreathCycle]:
    cycles = sorted(cycles)
    for a, b in zip(cycles, cycles[1:]):
        if b.begin_insp < a.end_insp:
            raise ValueError(f"overlapping cycles {a} and {b}")
    if n_frames is not None:
        for c in cycles:
            if c.end_insp >= n_frames:
                raise ValueError(f"cycle {c} is out of bounds for {n_frames} frames")
    return cycles


def read_annotations(path, n_frames: int | None = None) -> list[BreathCycle]:
    """Read a ``begin_insp_frame,end_insp_frame`` CSV into validated, ordered cycles."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "begin_insp_frame" not in fields or "end_insp_frame" not in fields:
            raise FormatError(f"{path}: header must be begin_insp_frame,end_insp_frame")
        cycles = []
        for lineno, row in enumerate(reader, start=2):
            try:
                cycles.append(BreathCycle(int(row["begin_insp_frame"]), int(row["end_insp_frame"])))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    try:
        return validate_cycles(cycles, n_frames)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_annotations(cycles, path) -> None:
    lines = ["begin_insp_frame,end_insp_frame"] + [f"{c.begin_insp},{c.end_insp}" for c in cycles]
    atomic_write(path, "\n".join(lines) + "\n")
