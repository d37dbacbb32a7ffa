"""Figure rendering for the CLI report paths (written next to the CSVs)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import METRIC_NAMES


def metric_figure(reports, out_path):
    """Per-metric mean bars (log scale: the metrics span orders of magnitude)."""
    means = [float(np.mean([getattr(r, m) for r in reports])) for m in METRIC_NAMES]
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.bar(METRIC_NAMES, means, color="#336699")
    for x, v in enumerate(means):
        ax.text(x, v, f"{v:.3g}", ha="center", va="bottom", fontsize=8)
    ax.set_ylabel(f"mean over {len(reports)} image(s)")
    ax.set_title("fusion quality metrics")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def rank_figure(table, out_path):
    """Horizontal bars of per-method average rank, best (lowest) on top."""
    order = np.argsort(table.avg_rank)
    names = [table.methods[i] for i in order]
    vals = table.avg_rank[order]
    fig, ax = plt.subplots(figsize=(6.4, 0.32 * len(names) + 1.2))
    ax.barh(range(len(names)), vals, color="#993344")
    ax.set_yticks(range(len(names)), names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("average rank (lower is better)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def bench_figure(sizes, times, out_path, slope=None):
    """Log-log runtime plot, optionally annotated with the fitted slope."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(sizes, times, "o-", color="#336699")
    title = "runtime scaling"
    if slope is not None:
        title += f" (log-log slope {slope:.3f})"
    ax.set_title(title)
    ax.set_xlabel("size")
    ax.set_ylabel("median seconds")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
