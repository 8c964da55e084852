"""Figure rendering for the report commands.

Uses the object-oriented matplotlib API (no pyplot state), so it is safe to
call from scripts and worker threads.  Figures are written next to the CSV
they illustrate.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 0.8,
}


def figsize(width: float = 6.5, rows: int = 1, aspect: float = (math.sqrt(5) - 1) / 2):
    return (width, width * aspect * (0.55 if rows > 1 else 1.0) * rows)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    return path


def _mark(ax, freqs_khz, y, **kwargs):
    if freqs_khz is not None and len(freqs_khz):
        ax.plot(freqs_khz, np.full(len(freqs_khz), y), "x", ms=3, color="C3", **kwargs)


def plot_layer_spectra(layers: Sequence[dict], path) -> Path:
    """One panel per stage: average log spectrum with predicted replica positions.

    Each item holds ``freqs`` (Hz), ``log_magnitude``, ``title`` and
    optionally ``peaks`` (Hz) where the stage's input DC would be cloned.
    """
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=figsize(rows=len(layers)))
        axes = fig.subplots(len(layers), 1, squeeze=False)[:, 0]
        for ax, layer in zip(axes, layers):
            freqs = np.asarray(layer["freqs"]) / 1000.0
            values = np.asarray(layer["log_magnitude"])
            ax.plot(freqs, values, color="C0")
            peaks = layer.get("peaks")
            if peaks is not None:
                _mark(ax, np.asarray(peaks) / 1000.0, values.min() - 0.05 * np.ptp(values))
            ax.set_title(layer.get("title", ""), loc="left")
            ax.set_ylabel("log |X|")
        axes[-1].set_xlabel("frequency (kHz)")
        fig.tight_layout()
        return _save(fig, path)


def plot_fingerprint(freqs, values, path, *, predicted=None, title: str = "") -> Path:
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=figsize())
        ax = fig.subplots()
        freqs = np.asarray(freqs) / 1000.0
        ax.plot(freqs, values, color="C0")
        if predicted is not None:
            _mark(ax, np.asarray(predicted) / 1000.0, -0.05 * max(np.max(values), 1e-12))
        ax.set_xlabel("frequency (kHz)")
        ax.set_ylabel("log magnitude above local minimum")
        ax.set_title(title, loc="left")
        fig.tight_layout()
        return _save(fig, path)


def plot_weights(freqs, weights, path, *, predicted=None, title: str = "") -> Path:
    """Learned coefficients per bin; positive bars mark peak-indicating bins."""
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=figsize())
        ax = fig.subplots()
        freqs = np.asarray(freqs) / 1000.0
        weights = np.asarray(weights)
        ax.axhline(0.0, color="0.6", lw=0.5)
        ax.plot(freqs, weights, color="C2")
        if predicted is not None:
            _mark(ax, np.asarray(predicted) / 1000.0, weights.min() - 0.05 * np.ptp(weights))
        ax.set_xlabel("frequency (kHz)")
        ax.set_ylabel("weight")
        ax.set_title(title, loc="left")
        fig.tight_layout()
        return _save(fig, path)


def plot_breakdown(rows: Sequence[tuple[str, int, float]], path, *, title: str = "") -> Path:
    """Horizontal bars of per-class accuracy, as in a detection-score table."""
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=figsize(aspect=0.1 + 0.08 * len(rows)))
        ax = fig.subplots()
        names = [f"{label} (n={count})" for label, count, _ in rows]
        scores = [100.0 * acc for _, _, acc in rows]
        ax.barh(names[::-1], scores[::-1], color="C0")
        for y, score in enumerate(scores[::-1]):
            ax.text(min(score, 100.0) - 1, y, f"{score:.2f}", va="center", ha="right",
                    color="white", fontsize=7)
        ax.set_xlim(0, 100)
        ax.set_xlabel("accuracy (%)")
        ax.set_title(title, loc="left")
        fig.tight_layout()
        return _save(fig, path)
