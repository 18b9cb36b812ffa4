"""Matplotlib rendering for the CLI report path.

Figures are presentation only; the metric core stays plot-free.  PNG
metadata is pinned so report bytes are reproducible across reruns.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .training import TrainingCurves  # noqa: E402

_PNG_METADATA = {"Software": None}


def render_roc(points, auc: float, path: str | Path) -> None:
    """ROC curve with the chance diagonal."""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(xs, ys, color="tab:blue", lw=1.8, label=f"AUC = {auc:.3f}")
    ax.plot([0, 1], [0, 1], color="gray", ls="--", lw=1.0, label="chance")
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_training_curves(curves: TrainingCurves, path: str | Path) -> None:
    """Loss and accuracy curves over epochs."""
    epochs = range(len(curves.train_loss))
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax_loss.plot(epochs, curves.train_loss, color="tab:red", lw=1.5)
    ax_loss.set_xlabel("Epoch")
    ax_loss.set_ylabel("Training loss")
    ax_loss.grid(alpha=0.3)
    ax_acc.plot(epochs, curves.train_accuracy, label="train", lw=1.5)
    ax_acc.plot(epochs, curves.val_accuracy, label="validation", lw=1.5)
    ax_acc.set_xlabel("Epoch")
    ax_acc.set_ylabel("Accuracy")
    ax_acc.set_ylim(0.0, 1.02)
    ax_acc.legend(loc="lower right")
    ax_acc.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
