"""Static SVG figures with CSV sidecars."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .survival.evaluation import CalibrationBin  # noqa: E402

# fixed salt and no date so repeated runs write identical files
matplotlib.rcParams["svg.hashsalt"] = "chemoutcome"
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_survival_curves(
    grid: Sequence[float],
    curves: Mapping[str, np.ndarray],
    t_star: float | None,
    svg_path: str | Path,
    csv_path: str | Path,
) -> None:
    """Step plot of mean predicted survival per group, with a t* marker."""
    grid = np.asarray(grid, dtype=float)
    names = list(curves)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_days", *names])
        for i, t in enumerate(grid):
            w.writerow([repr(float(t)), *(repr(float(curves[n][i])) for n in names)])

    fig, ax = plt.subplots(figsize=(6, 4))
    for n in names:
        ax.step(np.r_[0.0, grid], np.r_[1.0, curves[n]], where="post", label=n)
    if t_star is not None:
        ax.axvline(t_star, color="grey", linestyle="--", label=f"t* = {t_star:g} d")
    ax.set_xlabel("days since plan start")
    ax.set_ylabel("mean predicted survival")
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    _save(fig, Path(svg_path))


def plot_calibration(bins: Sequence[CalibrationBin], svg_path: str | Path, csv_path: str | Path) -> None:
    """Reliability diagram: observed failure fraction against mean prediction."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lower", "upper", "mean_predicted", "observed_fraction", "count"])
        for b in bins:
            w.writerow([b.lower, b.upper, b.mean_predicted, b.observed_fraction, b.count])

    filled = [b for b in bins if b.count]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot([0, 1], [0, 1], color="grey", linestyle=":", label="perfect")
    ax.plot([b.mean_predicted for b in filled], [b.observed_fraction for b in filled], marker="o", label="model")
    ax.set_xlabel("predicted failure probability")
    ax.set_ylabel("observed failure fraction")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    _save(fig, Path(svg_path))
