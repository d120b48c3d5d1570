"""Frame-sequence container, image loading and flow-file round-trips."""

import struct

import numpy as np
import pytest
from PIL import Image

from regflow.video_io import (
    FLO_MAGIC,
    FLOW_SENTINEL,
    FlowField,
    FrameSequence,
    load_frame_sequence,
    read_flo,
    write_flo,
    write_pgm,
    write_pgm16,
    write_raw_volume,
)

TOLERANCE = 0.0  # file formats and containers are exact


def test_frame_sequence_properties():
    seq = FrameSequence(np.zeros((4, 3, 5)))
    assert (seq.count, seq.height, seq.width) == (4, 3, 5)
    assert seq.frames.dtype == np.float64
    assert seq.frame(3).shape == (3, 5)


def test_frame_sequence_rejects_bad_stacks():
    with pytest.raises(ValueError):
        FrameSequence(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        FrameSequence(np.zeros((0, 3, 5)))
    bad = np.zeros((1, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        FrameSequence(bad)
    with pytest.raises(ValueError):
        FrameSequence(np.full((1, 2, 2), -1.0))
    with pytest.raises(ValueError):
        FrameSequence(np.full((1, 2, 2), 256.0))


def test_frame_index_bounds():
    seq = FrameSequence(np.zeros((2, 2, 2)))
    with pytest.raises(IndexError):
        seq.frame(2)
    with pytest.raises(IndexError):
        seq.frame(-1)


def test_flow_field_constant_and_validation():
    f = FlowField.constant((2, 3), 1.5, -2.0)
    assert f.height == 2 and f.width == 3
    assert np.all(f.u == 1.5) and np.all(f.v == -2.0) and f.valid.all()
    with pytest.raises(ValueError):
        FlowField(np.zeros((2, 3)), np.zeros((3, 2)), np.ones((2, 3), bool))
    with pytest.raises(ValueError):
        FlowField(np.zeros(3), np.zeros(3), np.ones(3, bool))


def test_flo_header_layout(tmp_path):
    field = FlowField(np.arange(6.0).reshape(2, 3),
                      -np.arange(6.0).reshape(2, 3),
                      np.ones((2, 3), bool))
    path = tmp_path / "f.flo"
    write_flo(field, path)
    raw = path.read_bytes()
    assert raw[:4] == struct.pack("<f", FLO_MAGIC)
    assert struct.unpack("<ii", raw[4:12]) == (3, 2)
    assert len(raw) == 12 + 2 * 3 * 2 * 4
    payload = np.frombuffer(raw, dtype="<f4", offset=12).reshape(2, 3, 2)
    assert np.array_equal(payload[:, :, 0], field.u.astype(np.float32))
    assert np.array_equal(payload[:, :, 1], field.v.astype(np.float32))


def test_flo_round_trip_with_invalid_cells(tmp_path):
    rng = np.random.default_rng(0)
    u = rng.normal(scale=8.0, size=(7, 5)).astype(np.float32).astype(np.float64)
    v = rng.normal(scale=8.0, size=(7, 5)).astype(np.float32).astype(np.float64)
    valid = rng.random((7, 5)) > 0.3
    path = tmp_path / "rt.flo"
    write_flo(FlowField(u, v, valid), path)
    back = read_flo(path)
    assert np.array_equal(back.valid, valid)
    assert np.array_equal(back.u[valid], u[valid])
    assert np.array_equal(back.v[valid], v[valid])
    assert np.all(back.u[~valid] == FLOW_SENTINEL)
    first = path.read_bytes()
    write_flo(back, path)
    assert path.read_bytes() == first


def test_read_flo_rejects_malformed(tmp_path):
    path = tmp_path / "bad.flo"
    path.write_bytes(b"\x00" * 8)
    with pytest.raises(ValueError):
        read_flo(path)
    path.write_bytes(struct.pack("<f", 1.0) + struct.pack("<ii", 2, 2) + b"\x00" * 32)
    with pytest.raises(ValueError):
        read_flo(path)
    path.write_bytes(struct.pack("<f", FLO_MAGIC) + struct.pack("<ii", -1, 2))
    with pytest.raises(ValueError):
        read_flo(path)
    path.write_bytes(struct.pack("<f", FLO_MAGIC) + struct.pack("<ii", 4, 4) + b"\x00" * 8)
    with pytest.raises(ValueError):
        read_flo(path)


def test_write_pgm_bytes(tmp_path):
    img = np.array([[0.0, 127.4, 127.6], [255.0, 300.0, -5.0]])
    path = tmp_path / "a.pgm"
    write_pgm(path, img)
    raw = path.read_bytes()
    assert raw == b"P5\n3 2\n255\n" + bytes([0, 127, 128, 255, 255, 0])


def test_write_pgm16_bytes(tmp_path):
    img = np.array([[0.0, 65535.0], [258.0, 70000.0]])
    path = tmp_path / "a.pgm"
    write_pgm16(path, img)
    raw = path.read_bytes()
    expected = b"P5\n2 2\n65535\n" + np.array(
        [[0, 65535], [258, 65535]], dtype=">u2").tobytes()
    assert raw == expected


def test_load_frame_sequence_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    frames = rng.integers(0, 256, size=(3, 6, 4)).astype(np.float64)
    for i, fr in enumerate(frames):
        write_pgm(tmp_path / f"fr{i:03d}.pgm", fr)
    seq = load_frame_sequence(str(tmp_path / "fr%03d.pgm"), 0, 2)
    assert np.array_equal(seq.frames, frames)


def test_load_frame_sequence_errors(tmp_path):
    write_pgm(tmp_path / "fr000.pgm", np.zeros((4, 4)))
    write_pgm(tmp_path / "fr001.pgm", np.zeros((5, 4)))
    with pytest.raises(ValueError):
        load_frame_sequence(str(tmp_path / "fr%03d.pgm"), 0, 1)
    with pytest.raises(FileNotFoundError):
        load_frame_sequence(str(tmp_path / "gone%03d.pgm"), 0, 5)
    with pytest.raises(ValueError):
        load_frame_sequence(str(tmp_path / "fr%03d.pgm"), 1, 0)


def test_load_rejects_color_and_high_depth(tmp_path):
    Image.new("RGB", (4, 4), (10, 20, 30)).save(tmp_path / ("c%d.png" % 0))
    with pytest.raises(ValueError):
        load_frame_sequence(str(tmp_path / "c%d.png"), 0, 0)
    write_pgm16(tmp_path / "d0.pgm", np.full((4, 4), 1000.0))
    with pytest.raises(ValueError):
        load_frame_sequence(str(tmp_path / "d%d.pgm"), 0, 0)


def test_load_grayscale_png(tmp_path):
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4)
    Image.fromarray(arr, mode="L").save(tmp_path / "g0.png")
    seq = load_frame_sequence(str(tmp_path / "g%d.png"), 0, 0)
    assert np.array_equal(seq.frames[0], arr.astype(np.float64))


def test_write_raw_volume(tmp_path):
    vol = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
    raw_path, json_path = write_raw_volume(tmp_path / "vol", vol, {"tag": "x"})
    assert raw_path.read_bytes() == vol.astype("<f4").tobytes()
    import json

    sidecar = json.loads(json_path.read_text())
    assert (sidecar["depth"], sidecar["height"], sidecar["width"]) == (2, 3, 4)
    assert sidecar["dtype"] == "float32-le"
    assert sidecar["tag"] == "x"
