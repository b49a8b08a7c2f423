"""Figures written next to the JSON reports: training curves, decode
latency, and attention heatmaps."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DECODER_COLORS = {"parallel": "#1f77b4", "autoregressive": "#d62728"}


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_training_curves(history: Sequence[dict], path) -> Path:
    epochs = [h["epoch"] for h in history]
    fig, (ax_loss, ax_dev) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, [h["train_loss"] for h in history], marker="o", label="joint")
    ax_loss.plot(epochs, [h["train_intent_loss"] for h in history], ls="--", label="intent")
    ax_loss.plot(epochs, [h["train_slot_loss"] for h in history], ls=":", label="slot")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss per utterance")
    ax_loss.legend(frameon=False)

    for key, label in (("slot_f1", "slot F1"), ("intent_acc", "intent acc"), ("overall_acc", "overall acc")):
        ax_dev.plot(epochs, [h["dev"][key] for h in history], marker=".", label=label)
    best = [h["epoch"] for h in history if h.get("best")]
    if best:
        ax_dev.axvline(best[-1], color="0.6", lw=0.8, ls="--")
    ax_dev.set_ylim(0, 1)
    ax_dev.set_xlabel("epoch")
    ax_dev.set_ylabel("dev")
    ax_dev.legend(frameon=False)
    return _finish(fig, path)


def plot_latency(report, path) -> Path:
    sizes = report.batch_sizes
    decoders = [d for d in ("parallel", "autoregressive") if any(e.decoder == d for e in report.entries)]
    x = np.arange(len(sizes))
    width = 0.8 / max(len(decoders), 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, dec in enumerate(decoders):
        secs = [report.seconds(dec, bs) for bs in sizes]
        ax.bar(x + (i - (len(decoders) - 1) / 2) * width, secs, width, label=dec, color=DECODER_COLORS[dec])
    ax.set_xticks(x)
    ax.set_xticklabels([str(bs) for bs in sizes])
    ax.set_xlabel("batch size")
    ax.set_ylabel("slot decoding time per pass (s)")
    if len(decoders) == 2:
        ax2 = ax.twinx()
        ax2.plot(x, [report.speedup(bs) for bs in sizes], color="k", marker="o", label="speedup")
        ax2.set_ylabel("autoregressive / parallel")
        ax2.axhline(1.0, color="k", lw=0.5, ls=":")
    ax.legend(frameon=False, loc="upper left")
    return _finish(fig, path)


def plot_attention(weights, row_labels: Sequence[str], col_labels: Sequence[str] | None = None,
                   path=None, title: str | None = None) -> Path:
    weights = np.asarray(weights)
    col_labels = row_labels if col_labels is None else col_labels
    fig, ax = plt.subplots(figsize=(0.45 * len(col_labels) + 2, 0.45 * len(row_labels) + 1.5))
    im = ax.imshow(weights, cmap="Greens", vmin=0.0, vmax=max(float(weights.max()), 1e-9))
    ax.set_xticks(range(len(col_labels)))
    ax.set_xticklabels(col_labels, rotation=60, ha="right", fontsize=8)
    ax.set_yticks(range(len(row_labels)))
    ax.set_yticklabels(row_labels, fontsize=8)
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    return _finish(fig, path)
