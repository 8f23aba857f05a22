"""Figures written next to a comparison report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from vmfs.telemetry import Resource  # noqa: E402


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=9)


def plot_validity(report, path) -> Path:
    """Side-by-side bars of Davies-Bouldin and Dunn per selector."""
    ok = [r for r in report.results if r.db is not None]
    names = [r.selector for r in ok]
    fig, (ax_db, ax_dunn) = plt.subplots(1, 2, figsize=(8, 3.2))
    x = np.arange(len(ok))
    ax_db.bar(x, [r.db for r in ok], color="#4c72b0")
    ax_db.set_title("Davies-Bouldin (lower is better)", fontsize=10)
    ax_dunn.bar(x, [r.dunn for r in ok], color="#dd8452")
    ax_dunn.set_title("Dunn (higher is better)", fontsize=10)
    for ax in (ax_db, ax_dunn):
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=30)
        _style(ax)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_feature_counts(report, path) -> Path:
    """Heat map of selected-feature counts, resource x selector."""
    resources = [r.value for r in Resource]
    counts = np.zeros((len(resources), len(report.results)), dtype=int)
    for j, res in enumerate(report.results):
        for f in res.features:
            counts[resources.index(f.split(":", 1)[0]), j] += 1
    fig, ax = plt.subplots(figsize=(1.2 * len(report.results) + 2, 3.2))
    im = ax.imshow(counts, cmap="Blues", aspect="auto")
    ax.set_xticks(range(len(report.results)))
    ax.set_xticklabels([r.selector for r in report.results], rotation=30)
    ax.set_yticks(range(len(resources)))
    ax.set_yticklabels(resources)
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(j, i, str(counts[i, j]), ha="center", va="center", fontsize=8)
    fig.colorbar(im, ax=ax, fraction=0.046)
    ax.set_title("Selected features", fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_figures(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        plot_validity(report, out / "validity.png"),
        plot_feature_counts(report, out / "features.png"),
    ]
