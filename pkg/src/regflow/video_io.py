"""Luminance frame-sequence loading and flow-field file formats.

Frames are 8-bit grayscale images (binary PGM ``P5`` or grayscale PNG);
color or high-depth inputs are rejected, never converted. Flow fields use
the ``.flo`` interchange format: a little-endian float32 magic number
202021.25, int32 width and height, then row-major interleaved (u, v)
float32 pairs. Components with magnitude >= 1e9 mark a cell invalid;
invalid cells are written back as the sentinel 1e10.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

FLO_MAGIC = 202021.25
FLOW_SENTINEL = 1e10
FLOW_INVALID_THRESHOLD = 1e9


@dataclass
class FrameSequence:
    """Ordered stack of equally-sized luminance frames.

    ``frames`` has shape (count, height, width), dtype float64, with
    luminance values in [0, 255].
    """

    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ValueError("frame stack must be (count, height, width) with count >= 1")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("frame luminance must be finite")
        if self.frames.min() < 0.0 or self.frames.max() > 255.0:
            raise ValueError("frame luminance must lie in [0, 255]")

    @property
    def count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def frame(self, t: int) -> np.ndarray:
        if not 0 <= t < self.count:
            raise IndexError(f"frame index {t} outside [0, {self.count - 1}]")
        return self.frames[t]


@dataclass
class FlowField:
    """Dense per-pixel displacement field with a validity mask.

    u is the horizontal (column) component, v the vertical (row)
    component, both in pixels. ``valid`` marks cells that carry a
    real measurement.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.u.ndim != 2 or self.u.shape != self.v.shape or self.u.shape != self.valid.shape:
            raise ValueError("u, v, valid must be equal-shaped 2-D grids")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @classmethod
    def constant(cls, shape: tuple[int, int], u: float, v: float) -> "FlowField":
        h, w = shape
        return cls(np.full((h, w), float(u)), np.full((h, w), float(v)), np.ones((h, w), bool))


def _load_gray8(path: Path) -> np.ndarray:
    """Decode one 8-bit grayscale image, rejecting color and high depths."""
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise ValueError(
                    f"unsupported pixel format {im.mode!r} (need 8-bit grayscale): {path}"
                )
            return np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ValueError(f"not a decodable image: {path}") from exc


def load_frame_sequence(path_pattern: str, first: int, last: int) -> FrameSequence:
    """Load frames ``path_pattern % index`` for index in [first, last].

    Load order is strictly the numeric index; file timestamps play no
    role. All frames must share dimensions.
    """
    if last < first:
        raise ValueError(f"empty frame range {first}..{last}")
    frames = []
    shape = None
    for idx in range(first, last + 1):
        path = Path(path_pattern % idx if "%" in path_pattern else path_pattern)
        if not path.exists():
            raise FileNotFoundError(f"missing frame file: {path}")
        img = _load_gray8(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise ValueError(
                f"frame dimension mismatch: {path} is {img.shape}, expected {shape}"
            )
        frames.append(img)
    return FrameSequence(np.stack(frames))


def read_flo(path: str | Path) -> FlowField:
    """Read a .flo flow field; sentinel cells are marked invalid."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise ValueError(f"truncated flow file (no header): {path}")
    (magic,) = struct.unpack("<f", raw[:4])
    if magic != np.float32(FLO_MAGIC):
        raise ValueError(f"bad magic number {magic!r} in flow file: {path}")
    width, height = struct.unpack("<ii", raw[4:12])
    if width <= 0 or height <= 0:
        raise ValueError(f"nonpositive dimensions {width}x{height} in flow file: {path}")
    expected = 2 * width * height * 4
    payload = np.frombuffer(raw, dtype="<f4", offset=12)
    if payload.size * 4 != expected:
        raise ValueError(
            f"truncated flow payload ({payload.size * 4} bytes, expected {expected}): {path}"
        )
    grid = payload.reshape(height, width, 2).astype(np.float64)
    u, v = grid[:, :, 0], grid[:, :, 1]
    valid = (np.abs(u) < FLOW_INVALID_THRESHOLD) & (np.abs(v) < FLOW_INVALID_THRESHOLD)
    return FlowField(u, v, valid)


def write_flo(field: FlowField, path: str | Path) -> None:
    """Write a .flo flow field; invalid cells become the 1e10 sentinel."""
    path = Path(path)
    h, w = field.u.shape
    u = np.where(field.valid, field.u, FLOW_SENTINEL).astype("<f4")
    v = np.where(field.valid, field.v, FLOW_SENTINEL).astype("<f4")
    grid = np.empty((h, w, 2), dtype="<f4")
    grid[:, :, 0] = u
    grid[:, :, 1] = v
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", FLO_MAGIC))
        fh.write(struct.pack("<ii", w, h))
        fh.write(grid.tobytes())


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Write an 8-bit binary PGM (maxval 255)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(arr.tobytes())


def write_pgm16(path: str | Path, image: np.ndarray) -> None:
    """Write a 16-bit binary PGM (maxval 65535, big-endian samples)."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    arr = np.clip(np.rint(arr), 0, 65535).astype(">u2")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (w, h))
        fh.write(arr.tobytes())


def write_raw_volume(prefix: str | Path, volume: np.ndarray, metadata: dict) -> tuple[Path, Path]:
    """Dump a 3-D volume as planar float32 raw plus a JSON sidecar.

    Planes are written in index order, each row-major. The sidecar
    records dimensions, dtype and ordering alongside caller metadata.
    """
    vol = np.asarray(volume, dtype="<f4")
    if vol.ndim != 3:
        raise ValueError("volume must be 3-D (depth, height, width)")
    prefix = Path(prefix)
    raw_path = prefix.with_suffix(".raw")
    json_path = prefix.with_suffix(".json")
    raw_path.write_bytes(vol.tobytes())
    sidecar = {
        "depth": int(vol.shape[0]),
        "height": int(vol.shape[1]),
        "width": int(vol.shape[2]),
        "dtype": "float32-le",
        "order": "plane-major, rows within plane",
    }
    sidecar.update(metadata)
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return raw_path, json_path
