"""Regularity maps over candidate displacements and the motion
estimators built on them.

A regularity map scores every integer displacement (x, y) in
[-R, R]^2 by the KL divergence between the distribution of the
spatially normalized displaced frame difference and a unit normal:
low divergence means the displaced difference looks like pure
Gaussian innovation, which is the statistical signature of a correct
motion match. R is tied to the patch size N by

    R = floor(N / 6) - (floor(N / 6) mod 2).

The per-patch motion estimate averages the displacements in the lowest
5th percentile of the map; a tiled field of such estimates yields a
dense flow. For longer horizons, a four-step coarse-to-fine search over
10-frame straight-line trajectories minimizes the same divergence under
temporal or space-time normalization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import normalization as norm
from . import stats
from .trajectories import (
    KIND_MOTION,
    Trajectory,
    round_half_up,
)
from .video_io import FlowField, FrameSequence, write_pgm16


def displacement_range(patch_size: int) -> int:
    """Search radius R for an NxN patch: floor(N/6) rounded down to even."""
    n = int(patch_size)
    if n < 6:
        raise ValueError(f"patch size {n} too small for a displacement search")
    k = n // 6
    return k - (k % 2)


@dataclass
class RegularityMap:
    """KLD-vs-Gaussian values over the displacement grid [-R, R]^2.

    kld[row, col] scores displacement (x, y) = (col - R, row - R).
    Entries are nonnegative; +inf marks displacements that could not be
    scored (degenerate constant difference patch, or displaced patch
    entirely outside the frame).
    """

    kld: np.ndarray
    patch_origin: tuple[int, int, int]
    search_radius: int
    norm_kind: str

    def __post_init__(self):
        self.kld = np.asarray(self.kld, dtype=np.float64)
        r = int(self.search_radius)
        if self.kld.shape != (2 * r + 1, 2 * r + 1):
            raise ValueError("map must be (2R+1) x (2R+1)")
        if np.any(np.isnan(self.kld)) or np.any(self.kld < 0):
            raise ValueError("map entries must be nonnegative (or +inf)")
        self.patch_origin = tuple(int(v) for v in self.patch_origin)
        self.search_radius = r

    def displacements(self) -> np.ndarray:
        """(2R+1, 2R+1, 2) grid of (x, y) displacement coordinates."""
        r = self.search_radius
        coords = np.arange(-r, r + 1)
        xg, yg = np.meshgrid(coords, coords)
        return np.stack([xg, yg], axis=-1)

    def argmin(self) -> tuple[int, int]:
        """Displacement with the lowest finite KLD.

        Ties break toward the smaller x^2 + y^2, then lexicographic
        (x, y), so the result is deterministic.
        """
        finite = np.isfinite(self.kld)
        if not finite.any():
            raise ValueError("regularity map has no finite entry")
        vmin = self.kld[finite].min()
        rows, cols = np.nonzero(finite & (self.kld == vmin))
        r = self.search_radius
        best = min(
            ((int(c) - r, int(rw) - r) for rw, c in zip(rows, cols)),
            key=lambda xy: (xy[0] ** 2 + xy[1] ** 2, xy),
        )
        return best

    def to_csv(self, path: str | Path) -> None:
        """Matrix CSV; header row/column carry the displacement coords."""
        r = self.search_radius
        coords = list(range(-r, r + 1))
        lines = ["y\\x," + ",".join(str(c) for c in coords)]
        for row, y in enumerate(coords):
            vals = ",".join(f"{float(v)!r}" for v in self.kld[row])
            lines.append(f"{y},{vals}")
        Path(path).write_text("\n".join(lines) + "\n")

    def to_pgm16(self, path: str | Path) -> None:
        """Render as a 16-bit PGM, min-max scaled over finite entries.

        Infinite entries map to full white; the sidecar JSON records
        the scaling so values are recoverable.
        """
        path = Path(path)
        finite = np.isfinite(self.kld)
        if finite.any():
            lo = float(self.kld[finite].min())
            hi = float(self.kld[finite].max())
        else:
            lo, hi = 0.0, 0.0
        span = hi - lo
        img = np.zeros_like(self.kld)
        if span > 0:
            img[finite] = (self.kld[finite] - lo) / span * 65535.0
        img[~finite] = 65535.0
        write_pgm16(path, img)
        sidecar = {
            "min_kld": lo,
            "max_kld": hi,
            "infinite_value": 65535,
            "search_radius": self.search_radius,
            "patch_origin": list(self.patch_origin),
            "norm_kind": self.norm_kind,
        }
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
        )


@dataclass
class MotionEstimate:
    """Sub-pixel motion estimate from the low-divergence displacement set."""

    u_est: float
    v_est: float
    patch_origin: tuple[int, int, int]
    percentile_set_size: int

    def __post_init__(self):
        self.u_est = float(self.u_est)
        self.v_est = float(self.v_est)
        self.patch_origin = tuple(int(v) for v in self.patch_origin)
        self.percentile_set_size = int(self.percentile_set_size)
        if self.percentile_set_size < 1:
            raise ValueError("percentile set must contain at least one entry")


def _slice_kld(diffs: np.ndarray, window: norm.GaussianWindow, saturation: float,
               bins: int, value_range: tuple[float, float],
               reference: stats.Histogram) -> np.ndarray:
    """KLD-vs-Gaussian of each 2-D slice in a stack after SDN.

    An exactly-zero difference slice is a perfect displaced match and
    scores 0; a degenerate zero-variance (constant, nonzero) slice
    cannot be scaled to unit variance and scores +inf.
    """
    count = diffs.shape[0]
    out = np.full(count, np.inf)
    zero = np.all(diffs == 0.0, axis=(1, 2))
    out[zero] = 0.0
    _, sigma = norm.local_moments(diffs, window, (1, 2))
    coeffs = diffs / (sigma + saturation)
    var = coeffs.reshape(count, -1).var(axis=1)
    for i in range(count):
        if zero[i] or var[i] <= 0.0:
            continue
        scaled = coeffs[i] / math.sqrt(var[i])
        hist = stats.histogram(scaled, bins, value_range)
        out[i] = stats.kld(hist, reference)
    return out


def regularity_map(seq: FrameSequence, patch_origin: tuple[int, int, int],
                   patch_size: int, temporal_displacement: int = 1, *,
                   saturation: float = 0.5,
                   spatial_half_widths: tuple[int, int] = (5, 5),
                   bins: int = stats.DEFAULT_BINS,
                   value_range: tuple[float, float] = stats.DEFAULT_RANGE,
                   allow_partial: bool = False) -> RegularityMap:
    """Score every displacement in [-R, R]^2 for one patch.

    Each difference patch runs through spatial divisive normalization
    (SDN), unit-variance scaling and histogram comparison against the
    unit normal. With ``allow_partial`` a displacement whose displaced
    patch sticks out of the frame is scored on the in-frame overlap of
    the two patches instead of raising, which is what border tiles of a
    dense field need; only displacements with no overlap at all stay
    +inf.
    """
    n = int(patch_size)
    r = displacement_range(n)
    x0, y0, t0 = (int(v) for v in patch_origin)
    t = int(temporal_displacement)
    if t < 1:
        raise ValueError("temporal displacement must be >= 1")
    if not 0 <= t0 < seq.count or t0 + t >= seq.count:
        raise ValueError(f"frames {t0} and {t0 + t} must exist in the sequence")
    if not (0 <= x0 and x0 + n <= seq.width and 0 <= y0 and y0 + n <= seq.height):
        raise ValueError("reference patch exits the frame")

    lo_x, hi_x = x0 - r, x0 + n + r
    lo_y, hi_y = y0 - r, y0 + n + r
    if not allow_partial and (lo_x < 0 or lo_y < 0 or hi_x > seq.width or hi_y > seq.height):
        raise ValueError("displaced patches exit the frame; smaller patch or interior origin needed")
    clo_x, chi_x = max(lo_x, 0), min(hi_x, seq.width)
    clo_y, chi_y = max(lo_y, 0), min(hi_y, seq.height)

    a = seq.frames[t0, y0:y0 + n, x0:x0 + n]
    region = seq.frames[t0 + t, clo_y:chi_y, clo_x:chi_x]
    windows = sliding_window_view(region, (n, n))
    ny, nx = windows.shape[:2]
    diffs = (a[None, None] - windows).reshape(ny * nx, n, n)

    window = norm.gaussian_window(tuple(spatial_half_widths))
    reference = stats.gaussian_reference(bins, value_range)
    scores = _slice_kld(diffs, window, saturation, bins, value_range, reference)

    grid = np.full((2 * r + 1, 2 * r + 1), np.inf)
    row0 = clo_y - lo_y  # first fully in-frame map row (y = clo_y - y0 - r + row)
    col0 = clo_x - lo_x
    grid[row0:row0 + ny, col0:col0 + nx] = scores.reshape(ny, nx)

    if allow_partial:
        later = seq.frames[t0 + t]
        for row in range(2 * r + 1):
            for col in range(2 * r + 1):
                if np.isfinite(grid[row, col]):
                    continue
                dx, dy = col - r, row - r
                bx_lo, bx_hi = max(x0 + dx, 0), min(x0 + dx + n, seq.width)
                by_lo, by_hi = max(y0 + dy, 0), min(y0 + dy + n, seq.height)
                if bx_hi <= bx_lo or by_hi <= by_lo:
                    continue
                sub = a[by_lo - (y0 + dy):by_hi - (y0 + dy),
                        bx_lo - (x0 + dx):bx_hi - (x0 + dx)]
                diff = sub - later[by_lo:by_hi, bx_lo:bx_hi]
                grid[row, col] = _slice_kld(
                    diff[None], window, saturation, bins, value_range, reference,
                )[0]
    return RegularityMap(grid, (x0, y0, t0), r, norm.KIND_SDN)


def estimate_patch_motion(rmap: RegularityMap) -> MotionEstimate:
    """Average the displacements in the lowest 5th percentile of the map.

    The threshold is the nearest-rank 5th percentile of the finite map
    values (the ceil(0.05 K)-th smallest of K finite entries); the
    averaged set is every displacement scoring strictly below it plus
    all displacements tied at the minimum, so the arg-min always
    participates and a uniform map averages the whole grid to (0, 0).
    """
    finite = np.isfinite(rmap.kld)
    if not finite.any():
        raise ValueError("regularity map has no finite entry")
    vals = rmap.kld[finite]
    vmin = float(vals.min())
    k = int(math.ceil(0.05 * vals.size))
    threshold = float(np.partition(vals, k - 1)[k - 1])
    selected = finite & ((rmap.kld < threshold) | (rmap.kld == vmin))
    coords = rmap.displacements()[selected]
    u_est = float(coords[:, 0].mean())
    v_est = float(coords[:, 1].mean())
    return MotionEstimate(u_est, v_est, rmap.patch_origin, int(selected.sum()))


def estimate_flow_field(seq: FrameSequence, t0: int, patch_size: int,
                        temporal_displacement: int = 1, *,
                        saturation: float = 0.5,
                        spatial_half_widths: tuple[int, int] = (5, 5),
                        bins: int = stats.DEFAULT_BINS,
                        value_range: tuple[float, float] = stats.DEFAULT_RANGE) -> FlowField:
    """Dense flow from per-tile regularity estimates.

    The frame is partitioned into non-overlapping NxN tiles anchored at
    (0, 0); partial border tiles are skipped and left invalid. Each
    tile's estimate (map displacement divided by the temporal
    displacement, so px/frame) is broadcast to its pixels.
    """
    n = int(patch_size)
    t = int(temporal_displacement)
    tiles_x = seq.width // n
    tiles_y = seq.height // n
    if tiles_x < 1 or tiles_y < 1:
        raise ValueError(f"frame {seq.width}x{seq.height} smaller than one {n}x{n} tile")
    u = np.zeros((seq.height, seq.width))
    v = np.zeros((seq.height, seq.width))
    valid = np.zeros((seq.height, seq.width), dtype=bool)
    for iy in range(tiles_y):
        for ix in range(tiles_x):
            x0, y0 = ix * n, iy * n
            rmap = regularity_map(
                seq, (x0, y0, t0), n, t,
                saturation=saturation, spatial_half_widths=spatial_half_widths,
                bins=bins, value_range=value_range, allow_partial=True,
            )
            est = estimate_patch_motion(rmap)
            u[y0:y0 + n, x0:x0 + n] = est.u_est / t
            v[y0:y0 + n, x0:x0 + n] = est.v_est / t
            valid[y0:y0 + n, x0:x0 + n] = True
    return FlowField(u, v, valid)


def _volume_kld(seq: FrameSequence, origin: tuple[int, int, int], patch_size: int,
                offsets: np.ndarray, norm_kind: str, window: norm.GaussianWindow,
                saturation: float, bins: int, value_range: tuple[float, float],
                reference: stats.Histogram) -> float | None:
    """Score one candidate trajectory; None when its patches exit the frame."""
    x0, y0, t0 = origin
    n = patch_size
    if t0 + offsets.shape[0] >= seq.count:
        return None
    a = seq.frames[t0, y0:y0 + n, x0:x0 + n]
    slices = []
    for k, (dx, dy) in enumerate(offsets):
        xs, ys = x0 + int(dx), y0 + int(dy)
        if not (0 <= xs and xs + n <= seq.width and 0 <= ys and ys + n <= seq.height):
            return None
        slices.append(a - seq.frames[t0 + k + 1, ys:ys + n, xs:xs + n])
    vol = np.stack(slices)
    if np.all(vol == 0.0):
        return 0.0  # exact displaced match: perfectly regular
    coeffs = norm.divisive_normalize(vol, norm_kind, window, saturation).coeffs
    var = float(coeffs.var())
    if var <= 0.0:
        return math.inf
    hist = stats.histogram(coeffs / math.sqrt(var), bins, value_range)
    return stats.kld(hist, reference)


def _line_offsets(endpoint: tuple[int, int], depth: int) -> np.ndarray:
    """Per-step rounded straight-line offsets toward the endpoint."""
    steps = np.arange(1, depth + 1, dtype=np.float64)[:, None] / depth
    return round_half_up(steps * np.asarray(endpoint, dtype=np.float64)[None, :])


def four_step_trajectory_search(seq: FrameSequence, patch_origin: tuple[int, int, int],
                                norm_kind: str = norm.KIND_TDN, *,
                                depth: int = 10, patch_size: int = 100,
                                search_range: int = 24,
                                grid_steps: tuple[int, ...] = (12, 6, 3, 1),
                                half_widths: tuple[int, ...] | None = None,
                                saturation: float = 0.5,
                                bins: int = stats.DEFAULT_BINS,
                                value_range: tuple[float, float] = stats.DEFAULT_RANGE,
                                step_log: list | None = None) -> Trajectory:
    """Coarse-to-fine search for the most regular straight-line trajectory.

    Candidate endpoints arrive at frame t0 + depth. Step one scans the
    lattice of spacing grid_steps[0] covering [-search_range,
    search_range]^2; each later step scans the 3x3 neighborhood of the
    incumbent at the next spacing. Endpoints outside the search range
    are not considered. The incumbent survives ties and is only
    replaced by a strictly better candidate (lower KLD; exact ties
    break toward the smaller endpoint norm, then lexicographic (x, y)),
    so the per-step incumbent KLD is monotonically non-increasing.
    ``step_log`` (when given) receives one (step, endpoint, kld) triple
    per step.
    """
    if norm_kind not in (norm.KIND_TDN, norm.KIND_STDN):
        raise ValueError("trajectory search supports TDN or STDN normalization")
    x0, y0, t0 = (int(v) for v in patch_origin)
    n = int(patch_size)
    if t0 < 0 or t0 + depth >= seq.count:
        raise ValueError(f"need {depth} frames after t0={t0}, sequence has {seq.count}")
    if not (0 <= x0 and x0 + n <= seq.width and 0 <= y0 and y0 + n <= seq.height):
        raise ValueError("reference patch exits the frame")
    if half_widths is None:
        half_widths = (5,) if norm_kind == norm.KIND_TDN else (5, 5, 5)
    window = norm.gaussian_window(tuple(half_widths))
    reference = stats.gaussian_reference(bins, value_range)
    sr = int(search_range)

    cache: dict[tuple[int, int], float | None] = {}

    def score(endpoint: tuple[int, int]) -> float | None:
        if endpoint not in cache:
            cache[endpoint] = _volume_kld(
                seq, (x0, y0, t0), n, _line_offsets(endpoint, depth),
                norm_kind, window, saturation, bins, value_range, reference,
            )
        return cache[endpoint]

    def rank(endpoint: tuple[int, int], value: float):
        return (value, endpoint[0] ** 2 + endpoint[1] ** 2, endpoint)

    incumbent = None
    incumbent_rank = None
    g0 = grid_steps[0]
    lattice = list(range(-sr, sr + 1, g0))
    for step_idx, spacing in enumerate(grid_steps):
        if step_idx == 0:
            candidates = [(cx, cy) for cy in lattice for cx in lattice]
        else:
            bx, by = incumbent
            candidates = [
                (bx + dx, by + dy)
                for dy in (-spacing, 0, spacing)
                for dx in (-spacing, 0, spacing)
            ]
        for cand in candidates:
            if abs(cand[0]) > sr or abs(cand[1]) > sr:
                continue
            val = score(cand)
            if val is None or math.isinf(val):
                continue
            cand_rank = rank(cand, val)
            if incumbent_rank is None or cand_rank < incumbent_rank:
                incumbent, incumbent_rank = cand, cand_rank
        if incumbent is None:
            raise ValueError("no candidate trajectory stays inside the frame")
        if step_log is not None:
            step_log.append((step_idx + 1, incumbent, incumbent_rank[0]))
    return Trajectory(KIND_MOTION, (x0, y0, t0), _line_offsets(incumbent, depth))


def four_step_flow_field(seq: FrameSequence, t0: int,
                         norm_kind: str = norm.KIND_TDN, *,
                         depth: int = 10, patch_size: int = 100,
                         search_range: int = 24,
                         grid_steps: tuple[int, ...] = (12, 6, 3, 1),
                         half_widths: tuple[int, ...] | None = None,
                         saturation: float = 0.5,
                         bins: int = stats.DEFAULT_BINS,
                         value_range: tuple[float, float] = stats.DEFAULT_RANGE) -> FlowField:
    """Dense per-frame flow from tile-wise four-step trajectory searches.

    Each full tile's endpoint is divided by the trajectory depth to a
    per-frame displacement and broadcast over the tile; tiles whose
    every candidate exits the frame stay invalid.
    """
    n = int(patch_size)
    tiles_x = seq.width // n
    tiles_y = seq.height // n
    if tiles_x < 1 or tiles_y < 1:
        raise ValueError(f"frame {seq.width}x{seq.height} smaller than one {n}x{n} tile")
    u = np.zeros((seq.height, seq.width))
    v = np.zeros((seq.height, seq.width))
    valid = np.zeros((seq.height, seq.width), dtype=bool)
    for iy in range(tiles_y):
        for ix in range(tiles_x):
            x0, y0 = ix * n, iy * n
            try:
                traj = four_step_trajectory_search(
                    seq, (x0, y0, t0), norm_kind,
                    depth=depth, patch_size=n, search_range=search_range,
                    grid_steps=grid_steps, half_widths=half_widths,
                    saturation=saturation, bins=bins, value_range=value_range,
                )
            except ValueError:
                continue
            ex, ey = (int(c) for c in traj.offsets[-1])
            u[y0:y0 + n, x0:x0 + n] = ex / depth
            v[y0:y0 + n, x0:x0 + n] = ey / depth
            valid[y0:y0 + n, x0:x0 + n] = True
    return FlowField(u, v, valid)
