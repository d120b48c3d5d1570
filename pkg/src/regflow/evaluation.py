"""Flow-field accuracy metrics: angular error and endpoint error.

The angular error treats flow vectors as space-time directions
(u, v, 1) and measures the angle between estimate and ground truth;
the constant third component keeps the metric finite for zero flow.
Endpoint error is the Euclidean distance between the 2-D vectors.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .video_io import FlowField


def _angular_error_grid(ue, ve, ug, vg, degrees: bool) -> np.ndarray:
    num = ue * ug + ve * vg + 1.0
    den = np.sqrt(ue * ue + ve * ve + 1.0) * np.sqrt(ug * ug + vg * vg + 1.0)
    ang = np.arccos(np.clip(num / den, -1.0, 1.0))
    return np.degrees(ang) if degrees else ang


def angular_error(est: tuple[float, float], gt: tuple[float, float],
                  degrees: bool = True) -> float:
    """Angle between (u_e, v_e, 1) and (u_g, v_g, 1); symmetric in its
    arguments, zero iff the vectors are equal."""
    ue, ve = (float(c) for c in est)
    ug, vg = (float(c) for c in gt)
    if not all(np.isfinite([ue, ve, ug, vg])):
        raise ValueError("flow components must be finite")
    return float(_angular_error_grid(np.float64(ue), np.float64(ve),
                                     np.float64(ug), np.float64(vg), degrees))


def endpoint_error(est: tuple[float, float], gt: tuple[float, float]) -> float:
    """Euclidean distance between the flow vectors."""
    ue, ve = (float(c) for c in est)
    ug, vg = (float(c) for c in gt)
    if not all(np.isfinite([ue, ve, ug, vg])):
        raise ValueError("flow components must be finite")
    return float(np.hypot(ue - ug, ve - vg))


@dataclass
class EvalReport:
    """Mean errors over the jointly valid pixels of an evaluation."""

    mean_ae: float
    mean_ee: float
    pixel_count: int
    per_patch: list | None = None
    wall_clock_sec: float | None = None

    def __post_init__(self):
        self.mean_ae = float(self.mean_ae)
        self.mean_ee = float(self.mean_ee)
        self.pixel_count = int(self.pixel_count)
        if self.pixel_count < 1:
            raise ValueError("report needs at least one evaluated pixel")
        if not 0.0 <= self.mean_ae <= 180.0:
            raise ValueError("mean angular error must lie in [0, 180] degrees")
        if self.mean_ee < 0.0:
            raise ValueError("mean endpoint error must be nonnegative")

    def to_json(self, path: str | Path, wall_clock: bool = True) -> None:
        """``wall_clock=False`` omits the timing field so identical inputs
        serialize to identical bytes."""
        payload = {
            "mean_ae": self.mean_ae,
            "mean_ee": self.mean_ee,
            "pixel_count": self.pixel_count,
        }
        if wall_clock and self.wall_clock_sec is not None:
            payload["wall_clock_sec"] = self.wall_clock_sec
        if self.per_patch is not None:
            payload["per_patch"] = [
                {"x": int(x), "y": int(y), "ae": float(ae), "ee": float(ee)}
                for x, y, ae, ee in self.per_patch
            ]
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def csv_row(self, patch_size=None, disp_range=None) -> str:
        n = "" if patch_size is None else str(int(patch_size))
        r = "" if disp_range is None else str(int(disp_range))
        return f"{n},{r},{self.mean_ae!r},{self.mean_ee!r}"

    def to_csv(self, path: str | Path, patch_size=None, disp_range=None) -> None:
        Path(path).write_text("N,range,AE,EE\n" + self.csv_row(patch_size, disp_range) + "\n")


def evaluate_field(est: FlowField, gt: FlowField, degrees: bool = True,
                   tile: int | None = None) -> EvalReport:
    """Mean AE/EE of an estimated field over jointly valid pixels.

    ``tile`` additionally produces a per-patch table of means for each
    full NxN tile containing at least one jointly valid pixel.
    """
    start = time.perf_counter()
    if est.u.shape != gt.u.shape:
        raise ValueError(
            f"field dimensions differ: {est.u.shape} vs {gt.u.shape}"
        )
    joint = est.valid & gt.valid
    count = int(joint.sum())
    if count == 0:
        raise ValueError("no jointly valid pixels to evaluate")
    ae = _angular_error_grid(est.u, est.v, gt.u, gt.v, degrees)
    ee = np.hypot(est.u - gt.u, est.v - gt.v)
    per_patch = None
    if tile is not None:
        n = int(tile)
        per_patch = []
        for y0 in range(0, est.u.shape[0] - n + 1, n):
            for x0 in range(0, est.u.shape[1] - n + 1, n):
                m = joint[y0:y0 + n, x0:x0 + n]
                if not m.any():
                    continue
                per_patch.append((
                    x0, y0,
                    float(ae[y0:y0 + n, x0:x0 + n][m].mean()),
                    float(ee[y0:y0 + n, x0:x0 + n][m].mean()),
                ))
    return EvalReport(
        float(ae[joint].mean()), float(ee[joint].mean()), count,
        per_patch=per_patch, wall_clock_sec=time.perf_counter() - start,
    )
