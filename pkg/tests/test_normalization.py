"""Gaussian pooling windows and divisive normalization.

The small-case oracles are worked out by hand from the definitions:
a window of half-width 1 has taps proportional to (e^-4.5, 1, e^-4.5)
because the per-axis standard deviation is hw / 3, and the local
moments under mirror padding reduce to short closed forms.
"""

import math

import numpy as np
import pytest

from regflow.normalization import (
    KIND_MSCN,
    KIND_SDN,
    KIND_STDN,
    KIND_TDN,
    GaussianWindow,
    NormalizedVolume,
    divisive_normalize,
    gaussian_window,
    local_moments,
    mscn,
    unit_variance,
)

TOLERANCE = 1e-12

# Normalized half-width-1 tap weights, straight from the definition.
_T1 = math.exp(-4.5) / (1.0 + 2.0 * math.exp(-4.5))
_T0 = 1.0 / (1.0 + 2.0 * math.exp(-4.5))


def test_window_taps_match_definition():
    win = gaussian_window((2,))
    n = np.arange(-2, 3, dtype=float)
    sigma = 2.0 / 3.0
    expected = np.exp(-(n * n) / (2 * sigma * sigma))
    expected /= expected.sum()
    assert np.max(np.abs(win.taps - expected)) <= TOLERANCE
    assert win.half_widths == (2,)


def test_window_is_separable_outer_product():
    win = gaussian_window((1, 2))
    k1 = np.exp(-np.arange(-1, 2, dtype=float) ** 2 / (2 * (1 / 3) ** 2))
    k2 = np.exp(-np.arange(-2, 3, dtype=float) ** 2 / (2 * (2 / 3) ** 2))
    expected = np.multiply.outer(k1, k2)
    expected /= expected.sum()
    assert win.taps.shape == (3, 5)
    assert np.max(np.abs(win.taps - expected)) <= TOLERANCE


def test_window_scalar_argument_and_validation():
    assert gaussian_window(3).taps.shape == (7,)
    with pytest.raises(ValueError):
        gaussian_window((0,))
    with pytest.raises(ValueError):
        gaussian_window((1, 1, 1, 1))
    with pytest.raises(ValueError):
        GaussianWindow(np.array([0.2, 0.5, 0.3]), (1,))  # asymmetric
    with pytest.raises(ValueError):
        GaussianWindow(np.array([0.2, 0.2, 0.2]), (1,))  # mass != 1


def test_local_moments_constant_input():
    arr = np.full((3, 4, 5), 7.0)
    win = gaussian_window((1, 1))
    mu, sigma = local_moments(arr, win, (1, 2))
    assert np.max(np.abs(mu - 7.0)) <= TOLERANCE
    assert np.max(np.abs(sigma)) <= 1e-6  # sqrt of a clipped tiny negative


def test_temporal_normalization_hand_case():
    # Volume 3x1x1 with values (3, 4, 5) along time, half-width-1 window,
    # saturation 0.5. Mirror padding makes the padded series 3,3,4,5,5.
    vol = np.array([3.0, 4.0, 5.0]).reshape(3, 1, 1)
    out = divisive_normalize(vol, KIND_TDN, gaussian_window((1,)), 0.5)
    mu_c = 4.0
    sig_c = math.sqrt(2.0 * _T1)  # weighted var of (-1, 0, 1) about 4
    sig_e = math.sqrt(_T1 - _T1 * _T1)  # end samples, one mirrored twin
    assert abs(out.coeffs[1, 0, 0] - 4.0 / (sig_c + 0.5)) <= TOLERANCE
    assert abs(out.coeffs[0, 0, 0] - 3.0 / (sig_e + 0.5)) <= TOLERANCE
    assert abs(out.coeffs[2, 0, 0] - 5.0 / (sig_e + 0.5)) <= TOLERANCE
    assert out.kind == KIND_TDN
    assert mu_c == 4.0  # anchor for the derivation above


def test_axis_selection_spatial_vs_temporal():
    # A volume constant in space varies only along t: spatial pooling sees
    # zero deviation, so SDN divides by the saturation constant alone.
    # Pooled moments of a constant signal cancel only to rounding, so the
    # local deviation is ~sqrt(eps)*|x| rather than exactly zero; 1e-4 still
    # cleanly separates "divides by saturation alone" from any real pooling.
    tvar = np.arange(1.0, 5.0)[:, None, None] * np.ones((1, 6, 7))
    sdn = divisive_normalize(tvar, KIND_SDN, gaussian_window((2, 2)), 0.5)
    assert np.max(np.abs(sdn.coeffs - tvar / 0.5)) <= 1e-4
    # And vice versa: constant along t, varying in space.
    svar = np.ones((5, 1, 1)) * np.arange(1.0, 13.0).reshape(1, 3, 4)
    tdn = divisive_normalize(svar, KIND_TDN, gaussian_window((2,)), 0.5)
    assert np.max(np.abs(tdn.coeffs - svar / 0.5)) <= 1e-4


def test_space_time_normalization_constant_volume():
    vol = np.full((4, 5, 6), 8.0)
    out = divisive_normalize(vol, KIND_STDN, gaussian_window((1, 1, 1)), 0.5)
    assert np.max(np.abs(out.coeffs - 16.0)) <= 1e-5
    assert out.kind == KIND_STDN


def test_divisive_normalize_accepts_diffs_attribute():
    class Holder:
        diffs = np.ones((2, 2, 2))

    out = divisive_normalize(Holder(), KIND_TDN, gaussian_window((1,)), 0.5)
    assert out.coeffs.shape == (2, 2, 2)


def test_divisive_normalize_validation():
    win1 = gaussian_window((1,))
    with pytest.raises(ValueError):
        divisive_normalize(np.ones((2, 2)), KIND_TDN, win1)
    with pytest.raises(ValueError):
        divisive_normalize(np.ones((2, 2, 2)), "XYZ", win1)
    with pytest.raises(ValueError):
        divisive_normalize(np.ones((2, 2, 2)), KIND_TDN, win1, saturation=0.0)
    with pytest.raises(ValueError):
        divisive_normalize(np.ones((2, 2, 2)), KIND_SDN, win1)  # needs 2-D taps
    bad = np.ones((2, 2, 2))
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        divisive_normalize(bad, KIND_TDN, win1)


def test_mscn_constant_image_is_zero():
    out = mscn(np.full((8, 9), 42.0))
    assert out.coeffs.shape == (1, 8, 9)
    assert np.max(np.abs(out.coeffs)) <= 1e-6
    assert out.kind == KIND_MSCN


def test_mscn_impulse_hand_case():
    # 3x3 zeros with a single 1 in the center, half-width-1 window,
    # saturation 1. At the center the window lies fully inside; with w0
    # the 2-D center weight, mu = w0 and E[x^2] = w0, so the local
    # deviation is sqrt(w0 - w0^2).
    img = np.zeros((3, 3))
    img[1, 1] = 1.0
    w0 = _T0 * _T0  # 2-D center weight of the separable window
    expected = (1.0 - w0) / (math.sqrt(w0 - w0 * w0) + 1.0)
    out = mscn(img, saturation=1.0, window=gaussian_window((1, 1)))
    assert abs(out.coeffs[0, 1, 1] - expected) <= TOLERANCE


def test_mscn_validation():
    with pytest.raises(ValueError):
        mscn(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        mscn(np.zeros((4, 4)), saturation=0.0)
    with pytest.raises(ValueError):
        mscn(np.zeros((4, 4)), window=gaussian_window((1,)))


def test_unit_variance_scales_exactly():
    rng = np.random.default_rng(5)
    vol = NormalizedVolume(rng.normal(3.0, 2.5, (4, 6, 6)), KIND_TDN)
    out = unit_variance(vol)
    assert abs(float(out.coeffs.var()) - 1.0) <= 1e-12
    # Scale-only: ratios between coefficients are preserved.
    ratio = out.coeffs / vol.coeffs
    assert np.max(np.abs(ratio - ratio.ravel()[0])) <= 1e-12


def test_unit_variance_rejects_constant():
    with pytest.raises(ValueError):
        unit_variance(NormalizedVolume(np.full((2, 2, 2), 3.0), KIND_TDN))


def test_normalized_volume_validation():
    with pytest.raises(ValueError):
        NormalizedVolume(np.zeros((2, 2)), KIND_TDN)
    with pytest.raises(ValueError):
        NormalizedVolume(np.zeros((2, 2, 2)), "nope")
