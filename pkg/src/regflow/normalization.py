"""Gaussian pooling windows and divisive normalization.

Divisive normalization divides each coefficient of a frame-difference
volume by sigma + C, where sigma is the Gaussian-weighted RMS deviation
about the Gaussian-weighted local mean over a pooling neighborhood and
C > 0 is a saturation constant. The numerator keeps the raw difference
value: frame differences are already zero-centered bandpass signals, so
no local average is subtracted from them. Three pooling geometries are
supported:

* ``TDN``  pools along the temporal axis only,
* ``SDN``  pools over the in-slice spatial neighborhood,
* ``STDN`` pools over the full space-time neighborhood.

``mscn`` is the still-image variant: it does subtract the local mean in
the numerator and normalizes a single luminance image.

All local pooling uses mirror (symmetric) boundary extension, i.e. the
edge sample participates in its own reflection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

KIND_MSCN = "MSCN2D"
KIND_TDN = "TDN"
KIND_SDN = "SDN"
KIND_STDN = "STDN"

# Volume axes are (time, row, column); each kind pools over these axes.
_KIND_AXES = {KIND_TDN: (0,), KIND_SDN: (1, 2), KIND_STDN: (0, 1, 2)}


@dataclass
class GaussianWindow:
    """Unit-mass sampling of a separable Gaussian at integer offsets.

    ``taps`` has one axis per pooled dimension with extent
    2*half_width + 1; taps sum to 1 and are symmetric per axis.
    half_widths follow the axis order of the data the window is
    applied to: (time,) for 1-D, (row, col) for 2-D,
    (time, row, col) for 3-D.
    """

    taps: np.ndarray
    half_widths: tuple[int, ...]

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        self.half_widths = tuple(int(h) for h in self.half_widths)
        if self.taps.ndim != len(self.half_widths):
            raise ValueError("taps dimensionality must match half_widths")
        for ax, hw in enumerate(self.half_widths):
            if hw < 1:
                raise ValueError("each half-width must be >= 1")
            if self.taps.shape[ax] != 2 * hw + 1:
                raise ValueError(f"axis {ax} extent must be 2*{hw}+1")
            if not np.array_equal(self.taps, np.flip(self.taps, axis=ax)):
                raise ValueError(f"taps must be symmetric along axis {ax}")
        if np.any(self.taps < 0):
            raise ValueError("taps must be nonnegative")
        if abs(float(self.taps.sum()) - 1.0) > 1e-9:
            raise ValueError("taps must sum to 1")


def gaussian_window(half_widths) -> GaussianWindow:
    """Build a Gaussian window with per-axis std = half_width / 3.

    The Gaussian is sampled at the integer offsets -hw..hw of each axis
    and rescaled to unit total mass, so the window reaches out to three
    standard deviations.
    """
    if isinstance(half_widths, int):
        half_widths = (half_widths,)
    half_widths = tuple(int(h) for h in half_widths)
    if not 1 <= len(half_widths) <= 3:
        raise ValueError("window dimensionality must be 1, 2 or 3")
    axes = []
    for hw in half_widths:
        if hw < 1:
            raise ValueError("each half-width must be >= 1")
        n = np.arange(-hw, hw + 1, dtype=np.float64)
        sigma = hw / 3.0
        axes.append(np.exp(-(n * n) / (2.0 * sigma * sigma)))
    taps = axes[0]
    for g in axes[1:]:
        taps = np.multiply.outer(taps, g)
    taps = taps / taps.sum()
    return GaussianWindow(taps, half_widths)


@dataclass
class NormalizedVolume:
    """Divisively normalized coefficients with their pooling kind."""

    coeffs: np.ndarray
    kind: str

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 3:
            raise ValueError("coefficients must be 3-D (depth, height, width)")
        if self.kind not in (KIND_MSCN, KIND_TDN, KIND_SDN, KIND_STDN):
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")


def _axis_factors(window: GaussianWindow) -> list[np.ndarray] | None:
    """Per-axis 1-D factors when the window separates exactly, else None.

    A normalized product-form window equals the outer product of its
    normalized axis marginals; windows built by gaussian_window always
    separate.
    """
    taps = window.taps
    if taps.ndim == 1:
        return [taps]
    factors = []
    for ax in range(taps.ndim):
        other = tuple(a for a in range(taps.ndim) if a != ax)
        factors.append(taps.sum(axis=other))
    outer = factors[0]
    for f in factors[1:]:
        outer = np.multiply.outer(outer, f)
    if np.allclose(outer, taps, rtol=1e-12, atol=1e-15):
        return factors
    return None


def _weighted_average(arr: np.ndarray, window: GaussianWindow, axes: tuple[int, ...]) -> np.ndarray:
    """Window-weighted local average along ``axes`` with symmetric padding.

    Padding with the mirror rule first and correlating with zero fill
    afterwards keeps the result exact even when the window overhangs the
    axis (e.g. a 21-tap temporal window on a depth-10 volume).
    """
    pad = [(0, 0)] * arr.ndim
    for ax, hw in zip(axes, window.half_widths):
        pad[ax] = (hw, hw)
    padded = np.pad(arr, pad, mode="symmetric")
    factors = _axis_factors(window)
    if factors is not None:
        out = padded
        for ax, taps in zip(axes, factors):
            out = ndimage.correlate1d(out, taps, axis=ax, mode="constant", cval=0.0)
    else:
        full = window.taps
        shape = [1] * arr.ndim
        for ax, n in zip(axes, full.shape):
            shape[ax] = n
        out = ndimage.correlate(padded, full.reshape(shape), mode="constant", cval=0.0)
    sl = tuple(
        slice(p[0], dim + p[0]) for p, dim in zip(pad, arr.shape)
    )
    return out[sl]


def local_moments(arr: np.ndarray, window: GaussianWindow, axes: tuple[int, ...]):
    """Gaussian-weighted local mean and RMS deviation about that mean."""
    mu = _weighted_average(arr, window, axes)
    ex2 = _weighted_average(arr * arr, window, axes)
    var = np.clip(ex2 - mu * mu, 0.0, None)
    return mu, np.sqrt(var)


def mscn(image: np.ndarray, saturation: float = 1.0,
         window: GaussianWindow | None = None) -> NormalizedVolume:
    """Mean-subtracted contrast-normalized coefficients of one image.

    (I - mu) / (sigma + C) with mu and sigma pooled over a 2-D Gaussian
    window (default half-widths (5, 5), an 11x11 neighborhood).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    if not np.all(np.isfinite(img)):
        raise ValueError("image values must be finite")
    if saturation <= 0:
        raise ValueError("saturation constant must be > 0")
    if window is None:
        window = gaussian_window((5, 5))
    if window.taps.ndim != 2:
        raise ValueError("mscn needs a 2-D window")
    mu, sigma = local_moments(img, window, (0, 1))
    coeffs = (img - mu) / (sigma + saturation)
    return NormalizedVolume(coeffs[None, :, :], KIND_MSCN)


def divisive_normalize(volume, kind: str, window: GaussianWindow,
                       saturation: float = 0.5) -> NormalizedVolume:
    """Divisively normalize a difference volume without mean subtraction.

    Parameters
    ----------
    volume : 3-D ndarray (depth, height, width) or an object with a
        ``diffs`` attribute holding one.
    kind : "TDN", "SDN" or "STDN"; selects the pooling axes.
    window : GaussianWindow whose dimensionality matches the kind
        (1-D temporal, 2-D spatial, 3-D space-time).
    saturation : the constant C > 0 added to the pooled deviation.
    """
    arr = np.asarray(getattr(volume, "diffs", volume), dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("volume must be 3-D (depth, height, width)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("volume values must be finite")
    if saturation <= 0:
        raise ValueError("saturation constant must be > 0")
    if kind not in _KIND_AXES:
        raise ValueError(f"unknown normalization kind {kind!r}")
    axes = _KIND_AXES[kind]
    if window.taps.ndim != len(axes):
        raise ValueError(
            f"{kind} needs a {len(axes)}-D window, got {window.taps.ndim}-D taps"
        )
    _, sigma = local_moments(arr, window, axes)
    return NormalizedVolume(arr / (sigma + saturation), kind)


def unit_variance(volume: NormalizedVolume) -> NormalizedVolume:
    """Rescale a normalized volume to unit sample variance.

    Scale-only (no centering), so the shape of the empirical
    distribution is unchanged. Makes downstream histogram comparisons
    invariant to global luminance scaling.
    """
    var = float(volume.coeffs.var())
    if var <= 0.0:
        raise ValueError("zero-variance volume cannot be scaled to unit variance")
    return NormalizedVolume(volume.coeffs / np.sqrt(var), volume.kind)
