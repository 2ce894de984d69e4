import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eitml.core import (
    CohortManifest,
    FormatError,
    FrameSequence,
    Label,
    ManifestEntry,
    decode_eitf,
    encode_eitf,
    read_manifest,
    read_recording,
    write_manifest,
    write_recording,
)


def test_eitf_hand_built_file_decodes(tmp_path):
    raw = b"EITF" + struct.pack("<HHHIf", 1, 2, 2, 1, 33.0) + struct.pack("<4f", 1, 2, 3, 4)
    path = tmp_path / "one.eitf"
    path.write_bytes(raw)
    seq = read_recording(path)
    assert seq.n_frames == 1 and seq.grid == (2, 2) and seq.fps == 33.0
    np.testing.assert_array_equal(seq.frames[0], [[1, 2], [3, 4]])


def test_eitf_size_is_header_plus_pixels(tmp_path):
    seq = FrameSequence(np.arange(4.0).reshape(1, 2, 2))
    path = tmp_path / "s.eitf"
    write_recording(seq, path)
    assert path.stat().st_size == 4 + 2 + 2 + 2 + 4 + 4 + 16


def test_write_is_deterministic_and_read_write_is_byte_identical(tmp_path):
    rng = np.random.default_rng(0)
    seq = FrameSequence(rng.standard_normal((5, 4, 6)).astype(np.float32), fps=20.0)
    a, b = tmp_path / "a.eitf", tmp_path / "b.eitf"
    write_recording(seq, a)
    write_recording(seq, b)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.eitf"
    write_recording(read_recording(a), c)
    assert c.read_bytes() == a.read_bytes()


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float32, st.tuples(st.integers(1, 4), st.integers(2, 5), st.integers(2, 5)),
           elements=st.floats(-1e6, 1e6, width=32)),
    st.floats(0.5, 200, width=32),
)
def test_eitf_round_trip_law(frames, fps):
    seq = FrameSequence(frames, fps=float(fps))
    assert decode_eitf(encode_eitf(seq)) == seq


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    seq = FrameSequence(rng.standard_normal((3, 2, 4)).astype(np.float32), fps=33.0)
    path = tmp_path / "r.csv"
    write_recording(seq, path)
    assert path.read_text().splitlines()[0] == "# 4,2,33.0"
    assert read_recording(path) == seq


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda b: b"XXXX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<H", 9) + b[6:], "version"),
        (lambda b: b[:-3], "truncated"),
        (lambda b: b[:10], "header"),
    ],
)
def test_malformed_eitf_raises_format_error(mutate, message):
    good = encode_eitf(FrameSequence(np.ones((2, 2, 2))))
    with pytest.raises(FormatError, match=message):
        decode_eitf(mutate(good))


def test_non_finite_pixel_reports_offset():
    good = bytearray(encode_eitf(FrameSequence(np.ones((1, 2, 2)))))
    good[18 + 8 : 18 + 12] = struct.pack("<f", float("nan"))
    with pytest.raises(FormatError, match="byte 26"):
        decode_eitf(bytes(good))


def test_csv_bad_line_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# 2,2,33\n1,2,3,4\n1,2,3\n")
    with pytest.raises(FormatError, match="line 3"):
        read_recording(path)


@pytest.mark.parametrize("shape", [(1, 1, 4), (1, 4, 1), (0, 2, 2)])
def test_frame_sequence_rejects_bad_grids(shape):
    with pytest.raises(ValueError):
        FrameSequence(np.zeros(shape))


def test_frame_sequence_rejects_non_finite_and_bad_fps():
    with pytest.raises(ValueError):
        FrameSequence(np.array([[[1.0, np.inf], [0, 0]]]))
    with pytest.raises(ValueError):
        FrameSequence(np.zeros((1, 2, 2)), fps=0.0)


def test_label_tokens():
    assert Label.parse("Healthy") is Label.HEALTHY
    assert Label.parse("NON-HEALTHY") is Label.NONHEALTHY
    assert Label.NONHEALTHY.token == "non-healthy" and Label.HEALTHY.short == "H"
    with pytest.raises(ValueError):
        Label.parse("sick")


def _manifest_text(rows):
    return "subject_id,label,recording_path,annotation_path\n" + "".join(",".join(r) + "\n" for r in rows)


def test_manifest_with_sixteen_subjects(tmp_path):
    rows = [(f"H{i}", "healthy", f"H{i}.eitf", "") for i in range(5)]
    rows += [(f"N{i}", "non-healthy", f"N{i}.eitf", f"N{i}.csv") for i in range(11)]
    rows += [("N0", "non-healthy", "N0b.eitf", "")]
    path = tmp_path / "m.csv"
    path.write_text(_manifest_text(rows))
    m = read_manifest(path)
    assert len(m.subjects) == 16
    assert sum(1 for v in m.subjects.values() if v is Label.HEALTHY) == 5
    assert m.entries[0].annotation_path is None
    assert m.entries[5].annotation_path == tmp_path / "N0.csv"
    assert m.entries[0].recording_path == tmp_path / "H0.eitf"


def test_manifest_label_conflict_rejected(tmp_path):
    rows = [("s1", "healthy", "a.eitf", "")] + [(f"x{i}", "healthy", f"x{i}.eitf", "") for i in range(7)]
    rows += [("s1", "non-healthy", "b.eitf", "")]
    path = tmp_path / "m.csv"
    path.write_text(_manifest_text(rows))
    with pytest.raises(FormatError, match="s1"):
        read_manifest(path)


@pytest.mark.parametrize(
    "text",
    [
        "subject_id,label,recording_path\ns1,healthy,a.eitf\n",
        "subject_id,label,recording_path,annotation_path\ns1,sick,a.eitf,\n",
        "subject_id,label,recording_path,annotation_path\n,healthy,a.eitf,\n",
    ],
)
def test_manifest_format_errors(tmp_path, text):
    path = tmp_path / "m.csv"
    path.write_text(text)
    with pytest.raises(FormatError):
        read_manifest(path)


def test_manifest_round_trip(tmp_path):
    m = CohortManifest(
        (
            ManifestEntry("a", Label.HEALTHY, tmp_path / "rec" / "a.eitf", tmp_path / "ann" / "a.csv"),
            ManifestEntry("b", Label.NONHEALTHY, tmp_path / "rec" / "b.eitf", None),
        )
    )
    path = tmp_path / "manifest.csv"
    write_manifest(m, path)
    back = read_manifest(path)
    assert back == m
    assert back.entries[0].recording_id == "a"
