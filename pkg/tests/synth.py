"""Shared synthetic-texture and sequence generators for the test suite.

Everything here is deterministic given explicit seeds. The generators
produce sequences whose ground-truth motion is exact integer
translation, so tests can assert against known displacements instead of
against the code under test.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage, signal

from regflow.video_io import FrameSequence


def disk_texture(shape, rng, blur=1.0, grain=4.0, density=1.0 / 30.0,
                 radius=(2.0, 12.0), levels=(40.0, 215.0)):
    """Occluding-disk texture: random binary-contrast disks on a mid-gray
    ground, lightly blurred, with i.i.d. Gaussian grain baked in.

    The grain translates with the content, so a correctly displaced
    frame difference cancels exactly while a wrong displacement sees
    both the disk structure and a doubled grain field.
    """
    h, w = shape
    img = np.full(shape, 127.5)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(int(h * w * density)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(*radius)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        img[mask] = rng.choice(levels)
    img = ndimage.gaussian_filter(img, blur, mode="reflect")
    if grain > 0:
        img += rng.normal(0.0, grain, shape)
    return np.clip(img, 0.0, 255.0)


def gabor_texture(shape, rng, amplitude, wavelength, envelope):
    """Quasi-periodic texture: white noise convolved with a Gabor kernel.

    The autocorrelation along x oscillates with the carrier wavelength
    under a Gaussian envelope, so displaced differences nearly cancel at
    integer multiples of the wavelength and swing between correlated
    and anti-correlated at other offsets.
    """
    white = rng.normal(0.0, 1.0, shape)
    half = int(3 * envelope)
    y, x = np.mgrid[-half:half + 1, -half:half + 1]
    kern = (np.exp(-(x * x + y * y) / (2.0 * envelope * envelope))
            * np.cos(2.0 * np.pi * x / wavelength))
    tex = signal.fftconvolve(white, kern, mode="same")
    img = 127.5 + tex / tex.std() * amplitude
    return np.clip(img, 0.0, 255.0)


def smooth_texture(shape, rng, scale=1.2, amplitude=50.0):
    """Low-pass filtered noise around mid-gray, wrap-around boundary."""
    base = ndimage.gaussian_filter(rng.normal(0.0, 1.0, shape), scale, mode="wrap")
    img = 127.5 + base / base.std() * amplitude
    return np.clip(img, 0.0, 255.0)


def translating_sequence(master, frame_shape, count, step,
                         noise_sigma=0.0, noise_seed=None) -> FrameSequence:
    """Cut ``count`` frames from a master image so the content translates
    by exactly ``step`` = (dx, dy) pixels per frame.

    Pixel (r, c) of frame t equals master[my - t*dy + r, mx - t*dx + c],
    hence frame t+1 at (r + dy, c + dx) equals frame t at (r, c): the
    ground-truth displacement of every pixel is (dx, dy). Optional
    i.i.d. Gaussian per-frame noise is drawn frame by frame from one
    seeded generator and clipped back to [0, 255].
    """
    h, w = frame_shape
    dx, dy = step
    mh, mw = master.shape
    need_w = w + abs(dx) * (count - 1)
    need_h = h + abs(dy) * (count - 1)
    if mw < need_w or mh < need_h:
        raise ValueError(f"master {master.shape} too small for {count} frames "
                         f"of {frame_shape} at step {step}")
    mx = dx * (count - 1) if dx > 0 else 0
    my = dy * (count - 1) if dy > 0 else 0
    nrng = np.random.default_rng(noise_seed) if noise_sigma > 0 else None
    frames = []
    for t in range(count):
        fr = master[my - t * dy: my - t * dy + h, mx - t * dx: mx - t * dx + w]
        if nrng is not None:
            fr = np.clip(fr + nrng.normal(0.0, noise_sigma, fr.shape), 0.0, 255.0)
        frames.append(np.asarray(fr, dtype=np.float64))
    return FrameSequence(np.stack(frames))


def sad_argmin(seq, origin, patch_size, radius, temporal_displacement=1):
    """Brute-force sum-of-absolute-differences block-matching arg-min.

    Independent oracle for displacement estimators: scans every integer
    displacement in [-radius, radius]^2 whose displaced patch stays in
    frame and returns the (dx, dy) with the smallest SAD, ties broken
    toward the smaller x^2 + y^2 and then lexicographically.
    """
    x0, y0, t0 = origin
    n = int(patch_size)
    a = seq.frames[t0, y0:y0 + n, x0:x0 + n]
    later = seq.frames[t0 + temporal_displacement]
    best_key, best_arg = None, None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            xs, ys = x0 + dx, y0 + dy
            if not (0 <= xs and xs + n <= seq.width
                    and 0 <= ys and ys + n <= seq.height):
                continue
            sad = float(np.abs(a - later[ys:ys + n, xs:xs + n]).sum())
            key = (sad, dx * dx + dy * dy, (dx, dy))
            if best_key is None or key < best_key:
                best_key, best_arg = key, (dx, dy)
    return best_arg
