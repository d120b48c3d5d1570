"""Histograms, Gaussian references, KL divergence and GGD fitting.

The regularity measure of the pipeline is the Kullback-Leibler
divergence between the empirical distribution of normalized
coefficients and a unit normal reference, both discretized on the same
equal-width binning (project default: 101 bins over [-5, 5]).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.special import gammaln, ndtr

DEFAULT_BINS = 101
DEFAULT_RANGE = (-5.0, 5.0)
KLD_FLOOR = 1e-10


@dataclass
class Histogram:
    """Normalized equal-width histogram with explicit bin count and range."""

    bins: int
    lo: float
    hi: float
    mass: np.ndarray

    def __post_init__(self):
        self.bins = int(self.bins)
        self.lo = float(self.lo)
        self.hi = float(self.hi)
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.bins < 1:
            raise ValueError("bin count must be >= 1")
        if not self.lo < self.hi:
            raise ValueError("histogram range must be non-degenerate")
        if self.mass.shape != (self.bins,):
            raise ValueError("mass length must equal bin count")
        if np.any(self.mass < 0):
            raise ValueError("bin mass must be nonnegative")
        if abs(float(self.mass.sum()) - 1.0) > 1e-12:
            raise ValueError("bin mass must sum to 1")

    @property
    def bin_edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def bin_centers(self) -> np.ndarray:
        edges = self.bin_edges
        return 0.5 * (edges[:-1] + edges[1:])

    def same_binning(self, other: "Histogram") -> bool:
        return self.bins == other.bins and self.lo == other.lo and self.hi == other.hi

    def to_csv(self, path: str | Path) -> None:
        lines = ["bin_center,mass"]
        for c, m in zip(self.bin_centers, self.mass):
            lines.append(f"{float(c)!r},{float(m)!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def histogram(samples: np.ndarray, bins: int = DEFAULT_BINS,
              value_range: tuple[float, float] = DEFAULT_RANGE) -> Histogram:
    """Histogram with out-of-range samples clamped into the end bins."""
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("cannot histogram an empty sample set")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    lo, hi = float(value_range[0]), float(value_range[1])
    counts, _ = np.histogram(np.clip(arr, lo, hi), bins=int(bins), range=(lo, hi))
    return Histogram(bins, lo, hi, counts / arr.size)


def gaussian_reference(bins: int = DEFAULT_BINS,
                       value_range: tuple[float, float] = DEFAULT_RANGE) -> Histogram:
    """Unit normal N(0, 1) discretized on the binning, end bins absorbing the tails."""
    bins = int(bins)
    if bins < 3:
        raise ValueError("reference needs at least 3 bins")
    lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise ValueError("reference range must be non-degenerate")
    edges = np.linspace(lo, hi, bins + 1)
    cdf = ndtr(edges)
    mass = np.diff(cdf)
    mass[0] = cdf[1]
    mass[-1] = 1.0 - cdf[-2]
    return Histogram(bins, lo, hi, mass)


def kld(p: Histogram, q: Histogram, floor: float = KLD_FLOOR) -> float:
    """Kullback-Leibler divergence sum(P ln(P/Q)) in nats.

    Empty P bins contribute zero; Q is floored at ``floor`` so empty
    reference bins stay finite. Requires identical binning.
    """
    if not p.same_binning(q):
        raise ValueError("histograms must share bin count and range")
    mask = p.mass > 0
    pm = p.mass[mask]
    qm = np.maximum(q.mass[mask], floor)
    val = float(np.sum(pm * np.log(pm / qm)))
    return max(val, 0.0)


@dataclass
class GgdFit:
    """Generalized Gaussian fit: shape alpha, variance s^2 and scale beta.

    The density is alpha / (2 beta Gamma(1/alpha)) exp(-(|x|/beta)^alpha)
    with beta = s sqrt(Gamma(1/alpha) / Gamma(3/alpha)); alpha = 2 is
    Gaussian, alpha = 1 Laplacian.
    """

    alpha: float
    variance: float
    beta: float

    def __post_init__(self):
        if not 0.1 <= self.alpha <= 10.0:
            raise ValueError("shape parameter outside [0.1, 10]")
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        expected = float(np.sqrt(self.variance) *
                         np.exp(0.5 * (gammaln(1.0 / self.alpha) - gammaln(3.0 / self.alpha))))
        if abs(self.beta - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError("beta inconsistent with alpha and variance")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({
            "alpha": float(self.alpha),
            "variance": float(self.variance),
            "beta": float(self.beta),
        }, indent=2, sort_keys=True) + "\n")


def _moment_ratio(alpha: float) -> float:
    # E[x^2] / E[|x|]^2 for a zero-mean GGD with shape alpha.
    return float(np.exp(gammaln(1.0 / alpha) + gammaln(3.0 / alpha) - 2.0 * gammaln(2.0 / alpha)))


def ggd_fit(samples: np.ndarray) -> GgdFit:
    """Fit a zero-mean generalized Gaussian by moment matching.

    Solves E[x^2] / E[|x|]^2 = Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2 for
    the shape by bracketed root search on a in [0.1, 10]; the ratio is
    strictly decreasing in a, so the root is unique when bracketed.
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size < 100:
        raise ValueError(f"need at least 100 samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    variance = float(arr.var())
    if variance <= 0.0:
        raise ValueError("constant samples have no shape to fit")
    m1 = float(np.mean(np.abs(arr)))
    m2 = float(np.mean(arr * arr))
    ratio = m2 / (m1 * m1)

    def objective(a: float) -> float:
        return _moment_ratio(a) - ratio

    f_lo, f_hi = objective(0.1), objective(10.0)
    if f_lo * f_hi > 0:
        raise ValueError(
            f"moment ratio {ratio:.6g} has no shape solution in [0.1, 10]"
        )
    alpha = float(optimize.brentq(objective, 0.1, 10.0, xtol=1e-12, rtol=1e-14))
    beta = float(np.sqrt(variance) *
                 np.exp(0.5 * (gammaln(1.0 / alpha) - gammaln(3.0 / alpha))))
    return GgdFit(alpha, variance, beta)
