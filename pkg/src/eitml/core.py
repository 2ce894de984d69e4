"""Data types and on-disk formats shared by the whole pipeline.

Recordings are sequences of reconstructed impedance-change frames. Two file
formats are supported:

* EITF (binary, little-endian)::

    magic "EITF" | version u16 = 1 | width u16 | height u16 |
    n_frames u32 | fps f32 | n_frames*height*width f32 pixels

  Pixels are row-major within a frame, frames are time-major.

* CSV frames: a first line ``# width,height,fps`` followed by one frame per
  line (width*height comma-separated decimals).

Image orientation: row 0 is anterior, column 0 is the patient's right side.
"""

from __future__ import annotations

import csv
import enum
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EITF_MAGIC = b"EITF"
EITF_VERSION = 1
_HEADER = struct.Struct("<4sHHHIf")


class FormatError(ValueError):
    """Raised when a recording, manifest or annotation file is malformed."""


class Label(enum.IntEnum):
    """Binary class label. NonHealthy is the positive (score > 0) side."""

    HEALTHY = 0
    NONHEALTHY = 1

    @classmethod
    def parse(cls, token: str) -> "Label":
        t = token.strip().lower()
        if t == "healthy":
            return cls.HEALTHY
        if t == "non-healthy":
            return cls.NONHEALTHY
        raise FormatError(f"unknown label token {token!r} (expected 'healthy' or 'non-healthy')")

    @property
    def token(self) -> str:
        return "healthy" if self is Label.HEALTHY else "non-healthy"

    @property
    def short(self) -> str:
        return "H" if self is Label.HEALTHY else "NH"


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Time-ordered impedance-change frames.

    ``frames`` has shape ``(n_frames, height, width)`` and is held as float64;
    files store float32, so values read from disk round-trip exactly.
    """

    frames: np.ndarray
    fps: float = 33.0

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3:
            raise ValueError(f"frames must be 3-D (n, height, width), got shape {frames.shape}")
        n, h, w = frames.shape
        if n < 1:
            raise ValueError("a recording needs at least one frame")
        if h < 2 or w < 2:
            raise ValueError(f"grid must be at least 2x2, got {h}x{w}")
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not np.isfinite(frames).all():
            t = int(np.argwhere(~np.isfinite(frames))[0][0])
            raise ValueError(f"non-finite pixel value in frame {t}")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def grid(self) -> tuple[int, int]:
        return self.width, self.height

    def scaled(self, c: float) -> "FrameSequence":
        return FrameSequence(self.frames * c, self.fps)

    def __eq__(self, other):
        if not isinstance(other, FrameSequence):
            return NotImplemented
        return self.fps == other.fps and np.array_equal(self.frames, other.frames)

    def __repr__(self):
        return f"FrameSequence(n_frames={self.n_frames}, height={self.height}, width={self.width}, fps={self.fps})"


def atomic_write(path, data: bytes | str) -> None:
    """Write ``data`` to ``path`` through a temp file and rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_eitf(seq: FrameSequence) -> bytes:
    if not (1 <= seq.width <= 0xFFFF and 1 <= seq.height <= 0xFFFF):
        raise ValueError(f"grid {seq.width}x{seq.height} does not fit the EITF header")
    header = _HEADER.pack(EITF_MAGIC, EITF_VERSION, seq.width, seq.height, seq.n_frames, seq.fps)
    return header + seq.frames.astype("<f4").tobytes(order="C")


def decode_eitf(data: bytes) -> FrameSequence:
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated EITF header: {len(data)} bytes, need {_HEADER.size}")
    magic, version, width, height, n_frames, fps = _HEADER.unpack_from(data, 0)
    if magic != EITF_MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte 0 (expected {EITF_MAGIC!r})")
    if version != EITF_VERSION:
        raise FormatError(f"unsupported EITF version {version} at byte 4")
    if width < 2 or height < 2:
        raise FormatError(f"invalid grid {width}x{height} at byte 6")
    if n_frames < 1:
        raise FormatError("EITF file declares zero frames at byte 10")
    if not (fps > 0 and math.isfinite(fps)):
        raise FormatError(f"invalid fps {fps} at byte 14")
    expected = _HEADER.size + 4 * n_frames * width * height
    if len(data) < expected:
        frame_bytes = 4 * width * height
        complete = (len(data) - _HEADER.size) // frame_bytes
        raise FormatError(
            f"truncated EITF data: frame {complete} incomplete at byte {_HEADER.size + complete * frame_bytes} "
            f"(file has {len(data)} bytes, header implies {expected})"
        )
    if len(data) > expected:
        raise FormatError(f"trailing bytes after offset {expected}")
    pixels = np.frombuffer(data, dtype="<f4", count=n_frames * width * height, offset=_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(pixels))
    if bad.size:
        raise FormatError(f"non-finite pixel value at byte {_HEADER.size + 4 * int(bad[0])}")
    return FrameSequence(pixels.reshape(n_frames, height, width), float(fps))


def _read_csv_frames(path: Path) -> FrameSequence:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: line 1: expected header '# width,height,fps'")
    try:
        w, h, fps = (s.strip() for s in lines[0][1:].split(","))
        width, height, fps = int(w), int(h), float(fps)
    except ValueError as exc:
        raise FormatError(f"{path}: line 1: bad header {lines[0]!r}") from exc
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            values = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
        if len(values) != width * height:
            raise FormatError(f"{path}: line {lineno}: expected {width * height} values, got {len(values)}")
        if not all(math.isfinite(v) for v in values):
            raise FormatError(f"{path}: line {lineno}: non-finite pixel value")
        frames.append(values)
    if not frames:
        raise FormatError(f"{path}: no frames")
    try:
        return FrameSequence(np.asarray(frames).reshape(len(frames), height, width), fps)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def read_recording(path) -> FrameSequence:
    """Read an EITF or CSV-frame recording (format sniffed from content)."""
    path = Path(path)
    data = path.read_bytes()
    if data[:1] == b"#":
        return _read_csv_frames(path)
    try:
        return decode_eitf(data)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_recording(seq: FrameSequence, path) -> None:
    """Write ``seq`` as canonical EITF bytes, or CSV frames if the suffix is ``.csv``."""
    path = Path(path)
    if not isinstance(seq, FrameSequence):
        raise TypeError("write_recording expects a FrameSequence")
    try:
        if path.suffix.lower() == ".csv":
            rows = [f"# {seq.width},{seq.height},{seq.fps!r}"]
            rows += [",".join(repr(float(v)) for v in frame.ravel()) for frame in seq.frames]
            atomic_write(path, "\n".join(rows) + "\n")
        else:
            atomic_write(path, encode_eitf(seq))
    except OSError as exc:
        raise OSError(f"cannot write recording {path}: {exc}") from exc


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    label: Label
    recording_path: Path
    annotation_path: Path | None = None

    @property
    def recording_id(self) -> str:
        return self.recording_path.stem


@dataclass(frozen=True)
class CohortManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        labels: dict[str, Label] = {}
        for e in self.entries:
            if not e.subject_id:
                raise FormatError("empty subject_id")
            prev = labels.setdefault(e.subject_id, e.label)
            if prev != e.label:
                raise FormatError(f"subject {e.subject_id!r} has inconsistent labels ({prev.token}, {e.label.token})")

    @property
    def subjects(self) -> dict[str, Label]:
        return {e.subject_id: e.label for e in self.entries}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


MANIFEST_COLUMNS = ("subject_id", "label", "recording_path", "annotation_path")


def read_manifest(path) -> CohortManifest:
    """Parse a cohort manifest CSV. Relative paths resolve against the manifest's folder."""
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            try:
                label = Label.parse(row["label"] or "")
            except FormatError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
            sid = (row["subject_id"] or "").strip()
            if not sid:
                raise FormatError(f"{path}: line {lineno}: empty subject_id")
            rec = (row["recording_path"] or "").strip()
            if not rec:
                raise FormatError(f"{path}: line {lineno}: empty recording_path")
            ann = (row["annotation_path"] or "").strip()
            entries.append(ManifestEntry(sid, label, base / rec, base / ann if ann else None))
    try:
        return CohortManifest(tuple(entries))
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_manifest(manifest: CohortManifest, path) -> None:
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        if p is None:
            return ""
        p = Path(p).resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return str(p)

    lines = [",".join(MANIFEST_COLUMNS)]
    for e in manifest.entries:
        lines.append(",".join([e.subject_id, e.label.token, rel(e.recording_path), rel(e.annotation_path)]))
    atomic_write(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class Sample:
    """One breath's feature vector with its provenance."""

    subject_id: str
    recording_id: str
    breath_index: int
    label: Label
    features: np.ndarray = field(repr=False)
