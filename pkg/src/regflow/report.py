"""Figure rendering for CLI reports.

Every figure lands next to the delimited output it visualizes; the CSV
and JSON files remain the data interface. The Agg backend keeps
rendering headless and deterministic.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport
from .regularity import RegularityMap
from .stats import GgdFit, Histogram
from .video_io import FlowField

_DPI = 120


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_histogram_figure(hist: Histogram, reference: Histogram,
                          path: str | Path, ggd: GgdFit | None = None) -> None:
    """Coefficient histogram against the unit normal reference."""
    fig, ax = plt.subplots(figsize=(6, 4))
    width = (hist.hi - hist.lo) / hist.bins
    ax.bar(hist.bin_centers, hist.mass, width=width, color="#4878cf",
           label="coefficients")
    ax.plot(reference.bin_centers, reference.mass, "k-", lw=1.5,
            label="unit normal")
    title = "Normalized coefficient distribution"
    if ggd is not None:
        title += f" (GGD shape {ggd.alpha:.3f})"
    ax.set_title(title)
    ax.set_xlabel("coefficient")
    ax.set_ylabel("mass")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def save_regularity_map_figure(rmap: RegularityMap, path: str | Path,
                               estimate=None) -> None:
    """Heatmap of the displacement-space KLD grid."""
    r = rmap.search_radius
    finite = np.isfinite(rmap.kld)
    shown = np.where(finite, rmap.kld, np.nan)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(shown, origin="lower", extent=(-r - 0.5, r + 0.5, -r - 0.5, r + 0.5),
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label="KLD vs unit normal")
    if estimate is not None:
        ax.plot([estimate.u_est], [estimate.v_est], "rx", ms=10, mew=2,
                label="estimate")
        ax.legend()
    ax.set_xlabel("x displacement")
    ax.set_ylabel("y displacement")
    ax.set_title(f"Regularity map at {rmap.patch_origin[:2]}")
    fig.tight_layout()
    _save(fig, path)


def save_flow_figure(field: FlowField, path: str | Path) -> None:
    """Quiver rendering of a flow field, downsampled to stay readable."""
    h, w = field.u.shape
    step = max(1, max(h, w) // 32)
    ys, xs = np.mgrid[0:h:step, 0:w:step]
    u = field.u[::step, ::step]
    v = field.v[::step, ::step]
    m = field.valid[::step, ::step]
    fig, ax = plt.subplots(figsize=(6, 6 * h / max(w, 1)))
    ax.quiver(xs[m], ys[m], u[m], -v[m], angles="xy")
    ax.set_xlim(-1, w)
    ax.set_ylim(h, -1)
    ax.set_aspect("equal")
    ax.set_title("Estimated flow")
    fig.tight_layout()
    _save(fig, path)


def save_residual_figure(residuals, path: str | Path,
                         ylabel: str = "RMS flow change",
                         title: str = "Relaxation residual") -> None:
    """Per-iteration magnitude curve; log scale when the data allows it."""
    values = np.asarray(list(residuals), dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(values) + 1), values, "o-")
    if np.any(values > 0):
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def save_error_map_figure(est: FlowField, gt: FlowField, path: str | Path) -> None:
    """Per-pixel endpoint error over the jointly valid region."""
    ee = np.hypot(est.u - gt.u, est.v - gt.v)
    ee = np.where(est.valid & gt.valid, ee, np.nan)
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(ee, cmap="magma")
    fig.colorbar(im, ax=ax, label="endpoint error (px)")
    ax.set_title("Endpoint error")
    fig.tight_layout()
    _save(fig, path)


def save_report_figure(report: EvalReport, path: str | Path) -> None:
    """Bar summary of a per-patch evaluation table."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if report.per_patch:
        labels = [f"({x},{y})" for x, y, _, _ in report.per_patch]
        ax.bar(labels, [ee for _, _, _, ee in report.per_patch], color="#4878cf")
        ax.set_ylabel("endpoint error (px)")
        ax.set_xlabel("patch origin")
        ax.tick_params(axis="x", rotation=90)
    else:
        ax.bar(["AE (deg)", "EE (px)"], [report.mean_ae, report.mean_ee],
               color=["#4878cf", "#d65f5f"])
    ax.set_title(f"Evaluation over {report.pixel_count} px")
    fig.tight_layout()
    _save(fig, path)
