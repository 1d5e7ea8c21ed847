import numpy as np
import pytest

from motionemu import io as mio
from motionemu.errors import DimensionMismatch
from motionemu.flatten import FlatField
from motionemu.skeleton import SkeletonHierarchy


def rand_postures(rng, t, k):
    v = rng.standard_normal((t, k, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def test_posture_sequences_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    seqs = [rand_postures(rng, 5, 3), rand_postures(rng, 5, 3)]
    path = tmp_path / "seqs.txt"
    mio.write_posture_sequences(path, seqs)
    back = mio.read_posture_sequences(path)
    assert len(back) == 2
    for a, b in zip(seqs, back):
        np.testing.assert_array_equal(a, b)
    second = tmp_path / "again.txt"
    mio.write_posture_sequences(second, back)
    assert path.read_bytes() == second.read_bytes()


def test_raw_sequences_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    hierarchy = SkeletonHierarchy(np.array([-1, 0, 1, 1]))
    frames = [rng.standard_normal((4, 4, 3)), rng.standard_normal((6, 4, 3))]
    path = tmp_path / "raw.txt"
    mio.write_raw_sequences(path, frames, hierarchy)
    back, h = mio.read_raw_sequences(path)
    np.testing.assert_array_equal(h.parent, hierarchy.parent)
    for a, b in zip(frames, back):
        np.testing.assert_array_equal(a, b)


def test_warps_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    raw = np.sort(rng.random((3, 9)), axis=1)
    warps = [np.concatenate([[0.0], w, [1.0]]) for w in raw]
    path = tmp_path / "warps.txt"
    mio.write_warps(path, warps)
    back = mio.read_warps(path)
    for a, b in zip(warps, back):
        np.testing.assert_array_equal(a, b)


def test_flatfields_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    ref = rand_postures(rng, 1, 4)[0]
    start = rand_postures(rng, 1, 4)[0]
    fields = [
        FlatField("stvf", ref, start, rng.standard_normal((8, 6)), 1.0 / 6),
        FlatField("siem", ref, None, rng.standard_normal((8, 7)), 1.0 / 6),
    ]
    path = tmp_path / "fields.txt"
    mio.write_flatfields(path, fields)
    back = mio.read_flatfields(path)
    for a, b in zip(fields, back):
        assert a.kind == b.kind
        assert a.dt == b.dt
        np.testing.assert_array_equal(a.reference, b.reference)
        np.testing.assert_array_equal(a.values, b.values)
        if a.start is None:
            assert b.start is None
        else:
            np.testing.assert_array_equal(a.start, b.start)


def test_doc_roundtrip_all_tags(tmp_path):
    rng = np.random.default_rng(4)
    items = [
        ("nothing", None),
        ("name", "hello world"),
        ("count", 42),
        ("scale", -0.12345678901234567),
        ("vec", rng.standard_normal(5)),
        ("mat", rng.standard_normal((3, 4))),
        ("empty", np.zeros((0, 4))),
    ]
    path = tmp_path / "doc.txt"
    mio.write_doc(path, "example", 2, items)
    doctype, version, data = mio.read_doc(path)
    assert doctype == "example" and version == 2
    assert data["nothing"] is None
    assert data["name"] == "hello world"
    assert data["count"] == 42
    assert data["scale"] == -0.12345678901234567
    np.testing.assert_array_equal(data["vec"], items[4][1])
    np.testing.assert_array_equal(data["mat"], items[5][1])
    assert data["empty"].shape == (0, 4)


def test_doc_float_bit_exactness(tmp_path):
    rng = np.random.default_rng(5)
    values = rng.standard_normal(200) * 10.0 ** rng.integers(-200, 200, size=200)
    path = tmp_path / "floats.txt"
    mio.write_doc(path, "floats", 1, [("v", values)])
    _, _, data = mio.read_doc(path)
    np.testing.assert_array_equal(data["v"], values)


def test_read_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("postureseq 3 2\n1 0 0\n")
    with pytest.raises(DimensionMismatch):
        mio.read_posture_sequences(path)
    empty = tmp_path / "empty.txt"
    empty.write_text("\n")
    with pytest.raises(DimensionMismatch):
        mio.read_posture_sequences(empty)
