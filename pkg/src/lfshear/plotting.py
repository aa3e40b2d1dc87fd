"""Report figures.  Uses the non-interactive Agg backend; every function
writes one file and closes its figure."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_psnr_per_view(report, path):
    """Bar chart of held-out view PSNR with the mean as a dashed line."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        idx = [i for i, _ in report.per_view]
        vals = [p if math.isfinite(p) else np.nan for _, p in report.per_view]
        ax.bar(range(len(idx)), vals, color="0.45")
        ax.set_xticks(range(len(idx)))
        ax.set_xticklabels([str(i) for i in idx], rotation=90 if len(idx) > 20 else 0)
        if math.isfinite(report.mean_psnr):
            ax.axhline(report.mean_psnr, ls="--", color="C3", lw=1,
                       label=f"mean {report.mean_psnr:.2f} dB")
            ax.legend(loc="lower right")
        ax.set_xlabel("view index")
        ax.set_ylabel("PSNR [dB]")
        ax.set_title(report.dataset)
        return _finish(fig, path)


def plot_convergence(history, path, label=None):
    """Residual and threshold per iteration; ``history`` holds
    ``(n, lam, alpha, residual)`` tuples."""
    h = np.asarray(history, dtype=float)
    with plt.rc_context(RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(7, 2.8))
        ax0.semilogy(h[:, 0], h[:, 3], label=label)
        ax0.semilogy(h[:, 0], h[:, 1], ls=":", color="0.5", label="lambda")
        ax0.set_xlabel("iteration")
        ax0.set_ylabel("residual")
        ax0.legend()
        ax1.plot(h[:, 0], h[:, 2])
        ax1.set_xlabel("iteration")
        ax1.set_ylabel("alpha")
        return _finish(fig, path)


def plot_epi_comparison(truth, recon, path, gain=10.0):
    """Ground truth, reconstruction and scaled absolute difference side by side."""
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 3, figsize=(9, 3), sharey=True)
        lo, hi = float(np.min(truth)), float(np.max(truth))
        for ax, img, title in zip(axes[:2], (truth, recon), ("ground truth", "reconstruction")):
            ax.imshow(img, cmap="gray", vmin=lo, vmax=hi, aspect="auto", interpolation="nearest")
            ax.set_title(title)
        diff = np.clip(gain * np.abs(np.asarray(truth) - np.asarray(recon)), 0, hi - lo or 1)
        axes[2].imshow(diff, cmap="magma", aspect="auto", interpolation="nearest")
        axes[2].set_title(f"|difference| x{gain:g}")
        axes[0].set_ylabel("t")
        for ax in axes:
            ax.set_xlabel("v")
        return _finish(fig, path)
