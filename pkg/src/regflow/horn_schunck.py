"""Classical global optical flow baseline.

Luminance-constancy data term plus quadratic smoothness penalty,
minimized by Jacobi relaxation of the coupled update equations. The
derivative estimates use the original 2x2x2 averaging stencils over the
frame pair and the 8-neighbor weighted average for the flow
neighborhood term. Single scale, no pyramid: the linearized data term
only holds for displacements of about a pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .video_io import FlowField

# 2x2 derivative stencils applied to both frames of the pair.
_KX = 0.25 * np.array([[-1.0, 1.0], [-1.0, 1.0]])
_KY = 0.25 * np.array([[-1.0, -1.0], [1.0, 1.0]])
_KT = 0.25 * np.ones((2, 2))

# Weighted 8-neighbor average for the smoothness term.
_AVG = np.array([
    [1 / 12, 1 / 6, 1 / 12],
    [1 / 6, 0.0, 1 / 6],
    [1 / 12, 1 / 6, 1 / 12],
])


@dataclass
class HsParams:
    """smoothness_weight is the regularizer alpha; prefilter enables a
    light Gaussian presmoothing of both frames."""

    smoothness_weight: float = 1.0
    iterations: int = 12
    prefilter: bool = False

    def __post_init__(self):
        if self.smoothness_weight <= 0:
            raise ValueError("smoothness weight must be > 0")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")


def horn_schunck(frame_a: np.ndarray, frame_b: np.ndarray,
                 params: HsParams | None = None,
                 residual_out: list | None = None) -> FlowField:
    """Estimate flow from frame_a to frame_b.

    Frames are 8-bit luminance grids; they are scaled to [0, 1]
    internally so derivative magnitudes are of unit order and the
    default smoothness weight is meaningful. ``residual_out`` (when
    given) receives the RMS change of the flow per iteration, which is
    non-increasing under this relaxation.
    """
    if params is None:
        params = HsParams()
    a = np.asarray(frame_a, dtype=np.float64) / 255.0
    b = np.asarray(frame_b, dtype=np.float64) / 255.0
    if a.ndim != 2 or a.shape != b.shape:
        raise ValueError("frames must be equal-shaped 2-D grids")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("frames must be finite")
    if params.prefilter:
        a = ndimage.gaussian_filter(a, 1.0, mode="reflect")
        b = ndimage.gaussian_filter(b, 1.0, mode="reflect")

    # correlate, not convolve: the asymmetric 2x2 stencils must be applied
    # unflipped, anchored on the pixel's forward 2x2 block
    fx = ndimage.correlate(a, _KX, mode="reflect") + ndimage.correlate(b, _KX, mode="reflect")
    fy = ndimage.correlate(a, _KY, mode="reflect") + ndimage.correlate(b, _KY, mode="reflect")
    ft = ndimage.correlate(b, _KT, mode="reflect") - ndimage.correlate(a, _KT, mode="reflect")

    alpha2 = params.smoothness_weight ** 2
    denom = alpha2 + fx * fx + fy * fy
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    for _ in range(params.iterations):
        u_avg = ndimage.convolve(u, _AVG, mode="reflect")
        v_avg = ndimage.convolve(v, _AVG, mode="reflect")
        shared = (fx * u_avg + fy * v_avg + ft) / denom
        u_new = u_avg - fx * shared
        v_new = v_avg - fy * shared
        if residual_out is not None:
            residual_out.append(
                float(np.sqrt(np.mean((u_new - u) ** 2 + (v_new - v) ** 2)))
            )
        u, v = u_new, v_new
    return FlowField(u, v, np.ones_like(u, dtype=bool))
