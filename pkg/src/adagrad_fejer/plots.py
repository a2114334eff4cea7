"""Static SVG line plots of a diagnostics report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fejer import FejerReport  # noqa: E402

# deterministic SVG output
plt.rcParams["svg.hashsalt"] = "adagrad-fejer"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_report(report: FejerReport, outdir: str | Path, title: str = "") -> list[Path]:
    """Write up to three SVG files into ``outdir`` and return their paths.

    * ``metric_distance.svg``: ``||x_k - z||_{B_k}`` (Euclidean for gradient descent)
    * ``grad_energy.svg``: partial sums of ``||g_k||^2`` against the bound, log scale
    * ``eta_partial_sums.svg``: partial sums of ``eta_k``
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    if report.metric_distances is not None:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.arange(len(report.metric_distances)), report.metric_distances)
        ax.set_xlabel("k")
        ax.set_ylabel("metric distance to witness")
        ax.set_title(title)
        written.append(_save(fig, outdir / "metric_distance.svg"))

    fig, ax = plt.subplots(figsize=(6, 4))
    sums = report.grad_energy_partial_sums
    ax.plot(np.arange(len(sums)), sums, label="partial sum of |g_k|^2")
    for col in report.bounds.get("per_coordinate", []):
        bound = col["bound"]
        if np.isfinite(bound) and bound > 0:
            label = f"{col['branch']} bound" + (f" (coord {col['coordinate']})" if "coordinate" in col else "")
            ax.axhline(bound, linestyle="--", linewidth=1, label=label)
    positive = sums[sums > 0]
    if positive.size:
        ax.set_yscale("log")
    ax.set_xlabel("k")
    ax.legend(fontsize="small")
    ax.set_title(title)
    written.append(_save(fig, outdir / "grad_energy.svg"))

    if report.eta_partial_sums is not None:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(np.arange(len(report.eta_partial_sums)), report.eta_partial_sums)
        ax.set_xlabel("k")
        ax.set_ylabel("partial sum of eta_k")
        ax.set_title(title)
        written.append(_save(fig, outdir / "eta_partial_sums.svg"))
    return written
