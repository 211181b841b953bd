"""Static figures for experiment outputs, written to image files (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .embeddings import EmbeddingReport  # noqa: E402
from .grid import SampledFunction  # noqa: E402
from .hausdorff import DualityReport  # noqa: E402
from .witness import GrowthReport  # noqa: E402

__all__ = ["plot_growth", "plot_embedding", "plot_sampled", "plot_profile", "plot_duality"]


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_growth(report: GrowthReport, path) -> None:
    """log2 of the main, error and total masses against j, with the target slope."""
    js = report.js
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, style in (("main_p", "o-"), ("total_p", "s--"), ("error_p", "^:")):
        vals = report.column(name)
        keep = vals > 0
        if keep.any():
            ax.plot(js[keep], np.log2(vals[keep]), style, label=name)
    main = report.column("main_p")
    if np.all(main > 0):
        anchor = np.log2(main[-1]) - report.target_slope * js[-1]
        ax.plot(js, anchor + report.target_slope * js, "k-", lw=0.8,
                label=f"slope {report.target_slope:g}")
    region = "Xi_j (mollified)" if report.mollified else "E_j"
    ax.set_xlabel("j")
    ax.set_ylabel(f"log2 ||.||_p^p over {region}")
    ax.set_title(f"{report.profile_name}, p={report.p:g}")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    else:
        ax.text(0.5, 0.5, "all values are zero", transform=ax.transAxes, ha="center")
    _save(fig, path)


def plot_embedding(report: EmbeddingReport, path) -> None:
    """Per-sample ratios with the configured bound."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ratios = report.ratios
    ax.plot(np.arange(len(ratios)), ratios, "o")
    ax.axhline(report.bound, color="k", lw=0.8, label=f"bound {report.bound:g}")
    ax.set_xlabel("sample")
    ax.set_ylabel("ratio")
    ax.set_title(f"{report.check}: {report.space}")
    ax.legend()
    _save(fig, path)


def plot_sampled(f: SampledFunction, path, title: str = "") -> None:
    """Line plot in 1-D (real and imaginary parts), image of |f| in 2-D."""
    fig, ax = plt.subplots(figsize=(6, 4))
    g = f.grid
    if g.n == 1:
        x = g.axes()[0]
        ax.plot(x, f.values.real, label="re")
        if f.is_complex:
            ax.plot(x, f.values.imag, label="im")
            ax.legend()
        ax.set_xlabel("x")
    else:
        (x0, x1), (y0, y1) = [(o, u) for o, u in zip(g.origin[:2], g.upper[:2])]
        im = ax.imshow(np.abs(f.values).T, origin="lower", extent=(x0, x1, y0, y1), aspect="auto")
        fig.colorbar(im, ax=ax)
    ax.set_title(title)
    _save(fig, path)


def plot_profile(r: np.ndarray, phi: np.ndarray, phi_dual: np.ndarray, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(r, phi, label="phi")
    ax.semilogx(r, phi_dual, "--", label="dual phi")
    ax.axvline(1.0, color="k", lw=0.5)
    ax.set_xlabel("r")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def plot_duality(report: DualityReport, path, title: str = "") -> None:
    """Moduli of both sides and their pointwise difference."""
    xi = report.lhs.grid.axes()[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(xi, np.abs(report.lhs.values) + 1e-300, label="|F(Hf)|")
    ax.semilogy(xi, np.abs(report.rhs.values) + 1e-300, "--", label="|dual H (Ff)|")
    ax.semilogy(xi, np.abs(report.lhs.values - report.rhs.values) + 1e-300, ":", label="difference")
    ax.set_xlabel("xi")
    ax.set_title(title or f"relative L2 discrepancy {report.discrepancy:.2e}")
    ax.legend()
    _save(fig, path)
