"""Displaced frame differences and space-time sampling trajectories.

The elementary signal of the pipeline is the displaced frame difference

    FD(r, c) = I[t0](r, c) - I[t0 + t](r + y, c + x)

for a spatial displacement (x, y) and temporal displacement t >= 1.
Stacking the differences along a trajectory of per-step displacements
yields a difference volume whose statistical regularity is measured
downstream. Three trajectory kinds exist: motion (accumulated
ground-truth flow), non-displaced (all zero) and random (seeded i.i.d.
integer drift).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .video_io import FlowField, FrameSequence

KIND_MOTION = "motion"
KIND_NON_DISPLACED = "non-displaced"
KIND_RANDOM = "random"

RNG_ALGORITHM = "numpy-pcg64"


def round_half_up(values) -> np.ndarray:
    """Round to nearest integer with .5 ties toward +infinity."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(int)


@dataclass
class Displacement:
    """Integer space-time displacement; t >= 1 looks forward in time."""

    x: int
    y: int
    t: int

    def __post_init__(self):
        self.x, self.y, self.t = int(self.x), int(self.y), int(self.t)
        if self.t < 1:
            raise ValueError("temporal displacement must be >= 1")


@dataclass
class Trajectory:
    """Per-step cumulative spatial offsets from a patch origin.

    offsets[k] is the total (x, y) displacement applied at step k + 1;
    origin is (x, y, t0) with (x, y) the patch top-left corner.
    """

    kind: str
    origin: tuple[int, int, int]
    offsets: np.ndarray
    seed: int | None = None
    drift_bound: int | None = None

    def __post_init__(self):
        if self.kind not in (KIND_MOTION, KIND_NON_DISPLACED, KIND_RANDOM):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        self.offsets = np.asarray(self.offsets, dtype=int)
        if self.offsets.ndim != 2 or self.offsets.shape[1] != 2 or self.offsets.shape[0] < 1:
            raise ValueError("offsets must be (depth, 2) with depth >= 1")
        self.origin = (int(self.origin[0]), int(self.origin[1]), int(self.origin[2]))
        if self.kind == KIND_NON_DISPLACED and np.any(self.offsets != 0):
            raise ValueError("non-displaced trajectory must have all-zero offsets")

    @property
    def depth(self) -> int:
        return self.offsets.shape[0]

    def metadata(self) -> dict:
        meta = {
            "kind": self.kind,
            "origin": list(self.origin),
            "offsets": [[int(x), int(y)] for x, y in self.offsets],
        }
        if self.kind == KIND_RANDOM:
            meta["seed"] = self.seed
            meta["drift_bound"] = self.drift_bound
            meta["rng"] = RNG_ALGORITHM
        return meta


def make_trajectory(kind: str, origin: tuple[int, int, int], depth: int, *,
                    flow=None, seed: int | None = None,
                    drift_bound: int | None = None,
                    patch_size: int | None = None) -> Trajectory:
    """Construct a sampling trajectory of the given kind.

    Motion trajectories accumulate per-frame flow sampled at the traced
    patch-center pixel (origin + patch_size // 2 per axis; the origin
    pixel itself when patch_size is omitted), rounding the accumulated
    offset to the nearest integer per step with .5 ties toward
    +infinity. ``flow`` is one FlowField (reused every step) or a
    sequence of at least ``depth`` fields. Random trajectories draw
    i.i.d. per-step increments uniform on the integer lattice
    [-drift_bound, drift_bound]^2 from a seeded PCG64 generator, so they
    are reproducible byte for byte.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x0, y0, t0 = (int(v) for v in origin)

    if kind == KIND_NON_DISPLACED:
        return Trajectory(kind, (x0, y0, t0), np.zeros((depth, 2), dtype=int))

    if kind == KIND_RANDOM:
        if seed is None or drift_bound is None:
            raise ValueError("random trajectory needs seed and drift_bound")
        if drift_bound < 1:
            raise ValueError("drift_bound must be >= 1")
        rng = np.random.default_rng(seed)
        steps = rng.integers(-drift_bound, drift_bound + 1, size=(depth, 2))
        return Trajectory(kind, (x0, y0, t0), np.cumsum(steps, axis=0),
                          seed=seed, drift_bound=drift_bound)

    if kind == KIND_MOTION:
        if flow is None:
            raise ValueError("motion trajectory needs per-step flow")
        if isinstance(flow, FlowField):
            fields = [flow] * depth
        else:
            fields = list(flow)
        if len(fields) < depth:
            raise ValueError(f"need {depth} flow fields, got {len(fields)}")
        half = patch_size // 2 if patch_size else 0
        base = np.array([x0 + half, y0 + half], dtype=int)
        acc = np.zeros(2, dtype=np.float64)
        offsets = np.zeros((depth, 2), dtype=int)
        pos = base.copy()
        for s in range(depth):
            fld = fields[s]
            px, py = int(pos[0]), int(pos[1])
            if not (0 <= px < fld.width and 0 <= py < fld.height):
                raise ValueError(
                    f"traced position ({px}, {py}) exits the frame at step {s + 1}"
                )
            if not fld.valid[py, px]:
                raise ValueError(
                    f"flow invalid at traced position ({px}, {py}), step {s + 1}"
                )
            acc += (fld.u[py, px], fld.v[py, px])
            offsets[s] = round_half_up(acc)
            pos = base + offsets[s]
        return Trajectory(kind, (x0, y0, t0), offsets)

    raise ValueError(f"unknown trajectory kind {kind!r}")


def displaced_frame_difference(seq: FrameSequence, t0: int, d: Displacement,
                               patch: tuple[int, int, int, int]) -> np.ndarray:
    """Difference between a patch at frame t0 and its displaced partner.

    ``patch`` is (x, y, width, height) with (x, y) the top-left corner.
    Both the reference patch and the displaced patch must lie fully
    inside their frames.
    """
    x0, y0, w, h = (int(v) for v in patch)
    if w < 1 or h < 1:
        raise ValueError("patch must be at least 1x1")
    if not 0 <= t0 < seq.count:
        raise ValueError(f"reference frame {t0} outside sequence of {seq.count}")
    if t0 + d.t >= seq.count:
        raise ValueError(
            f"displaced frame {t0 + d.t} outside sequence of {seq.count}"
        )
    if not (0 <= x0 and x0 + w <= seq.width and 0 <= y0 and y0 + h <= seq.height):
        raise ValueError(f"reference patch {patch} exits the {seq.width}x{seq.height} frame")
    xs, ys = x0 + d.x, y0 + d.y
    if not (0 <= xs and xs + w <= seq.width and 0 <= ys and ys + h <= seq.height):
        raise ValueError(
            f"displaced patch at ({xs}, {ys}) exits the {seq.width}x{seq.height} frame"
        )
    a = seq.frames[t0, y0:y0 + h, x0:x0 + w]
    b = seq.frames[t0 + d.t, ys:ys + h, xs:xs + w]
    return a - b


@dataclass
class FrameDiffVolume:
    """Stack of displaced frame differences along one trajectory."""

    diffs: np.ndarray
    trajectory: Trajectory

    def __post_init__(self):
        self.diffs = np.asarray(self.diffs, dtype=np.float64)
        if self.diffs.ndim != 3:
            raise ValueError("diff volume must be 3-D (depth, height, width)")
        if not np.all(np.isfinite(self.diffs)):
            raise ValueError("diff volume must be finite")

    @property
    def depth(self) -> int:
        return self.diffs.shape[0]


def collect_volume(seq: FrameSequence, traj: Trajectory, patch_size: int) -> FrameDiffVolume:
    """Collect the difference volume along a trajectory.

    Slice k holds the difference between the origin patch at t0 and the
    patch displaced by offsets[k] at frame t0 + k + 1. When the traced
    patch leaves the frame the volume is truncated at the last fully
    valid slice; an immediately out-of-bounds trajectory is an error.
    """
    n = int(patch_size)
    if n < 1:
        raise ValueError("patch size must be >= 1")
    x0, y0, t0 = traj.origin
    patch = (x0, y0, n, n)
    slices = []
    for k in range(traj.depth):
        dx, dy = (int(v) for v in traj.offsets[k])
        try:
            slices.append(
                displaced_frame_difference(seq, t0, Displacement(dx, dy, k + 1), patch)
            )
        except ValueError:
            break
    if not slices:
        raise ValueError("no valid slice: trajectory exits the frame immediately")
    return FrameDiffVolume(np.stack(slices), traj)
