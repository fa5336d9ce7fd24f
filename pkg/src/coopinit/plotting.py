"""Figures written next to the CSV outputs: sample scatters, learning curves,
run comparisons and sweep summaries.

Everything is rendered with the non-interactive Agg canvas. SVG output uses a
fixed hash salt and no date stamp, so identical inputs give identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "coopinit",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})

REAL_COLOR = "0.6"
FAKE_COLOR = "tab:blue"
BOUNDARY_COLOR = "tab:red"


def _save(fig, path):
    fmt = str(path).rsplit(".", 1)[-1]
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, metadata=metadata, bbox_inches="tight")
    plt.close(fig)


def scatter_snapshot(path, real, fake, centers, title="", limit=None):
    """Real points in gray, generated points in color, mode centers as black crosses.

    1D data is drawn as overlaid histograms instead.
    """
    real = np.asarray(real)
    fake = np.asarray(fake)
    centers = np.asarray(centers)
    fig, ax = plt.subplots(figsize=(4, 4) if real.shape[1] == 2 else (5, 3))
    if real.shape[1] == 2:
        ax.scatter(real[:, 0], real[:, 1], s=2, c=REAL_COLOR, lw=0, label="real", rasterized=False)
        ax.scatter(fake[:, 0], fake[:, 1], s=2, c=FAKE_COLOR, lw=0, label="generated")
        ax.scatter(centers[:, 0], centers[:, 1], s=30, c="k", marker="x", lw=1, label="modes")
        if limit is None:
            limit = 1.5 * np.abs(centers).max() + 1e-9
        ax.set_xlim(-limit, limit)
        ax.set_ylim(-limit, limit)
        ax.set_aspect("equal")
    else:
        lo = min(real.min(), centers.min()) - 1.0
        hi = max(real.max(), centers.max()) + 1.0
        bins = np.linspace(lo, hi, 121)
        ax.hist(real[:, 0], bins=bins, color=REAL_COLOR, alpha=0.7, density=True, label="real")
        ax.hist(np.clip(fake[:, 0], lo, hi), bins=bins, color=FAKE_COLOR, alpha=0.6, density=True,
                label="generated")
        for c in centers[:, 0]:
            ax.axvline(c, color="k", lw=0.6, ls=":")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=7, markerscale=3, frameon=False)
    _save(fig, path)


def learning_curves(path, records, transition_at=None, modes_total=None):
    """Coverage, sample quality and energy distance against examples consumed."""
    x = np.array([r.consumed for r in records], dtype=float)
    panels = [
        ("modes covered", [r.modes_covered for r in records]),
        ("high-quality fraction", [r.hq_fraction for r in records]),
        ("energy distance", [r.energy_distance for r in records]),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(10, 2.8))
    for ax, (label, y) in zip(axes, panels):
        ax.plot(x, y, marker="o", ms=2.5, lw=1)
        if transition_at is not None:
            ax.axvline(transition_at, color=BOUNDARY_COLOR, lw=1)
        ax.set_xlabel("examples consumed")
        ax.set_ylabel(label)
    if modes_total:
        axes[0].set_ylim(-0.3, modes_total + 0.3)
    axes[2].set_yscale("log")
    fig.tight_layout()
    _save(fig, path)


def comparison_bars(path, labels, finals, bests=None, ylabel="modes covered"):
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(labels) + 1), 3))
    idx = np.arange(len(labels))
    ax.bar(idx, finals, width=0.6, color=FAKE_COLOR, label="final")
    if bests is not None:
        ax.scatter(idx, bests, color="k", marker="_", s=200, label="best", zorder=3)
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def sweep_plot(path, axis, values, per_seed, metric="modes covered"):
    """``per_seed`` maps each axis value to the list of per-seed final metrics."""
    fig, ax = plt.subplots(figsize=(4, 3))
    xs = np.arange(len(values))
    for i, v in enumerate(values):
        ys = per_seed.get(v, [])
        ax.scatter(np.full(len(ys), i), ys, color=REAL_COLOR, s=12, zorder=2)
        if ys:
            ax.scatter([i], [np.mean(ys)], color=FAKE_COLOR, marker="D", s=30, zorder=3)
    ax.set_xticks(xs)
    ax.set_xticklabels([str(v) for v in values])
    ax.set_xlabel(axis)
    ax.set_ylabel(metric)
    fig.tight_layout()
    _save(fig, path)
