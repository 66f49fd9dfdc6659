"""Structured reports: key = value text with CSV blocks, a plot-ready CSV,
and matplotlib figures rendered to files next to them."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SERIES_COLUMNS = (
    "step",
    "fom_norm",
    "rel_error_srom",
    "rel_error_strom",
    "bound1",
    "bound2",
    "bound3",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _csv_lines(series: dict) -> list[str]:
    columns = list(series.keys())
    lines = [",".join(columns)]
    length = len(next(iter(series.values())))
    for i in range(length):
        row = []
        for col in columns:
            v = series[col][i]
            row.append("%d" % v if col == "step" else f"{v:.12g}")
        lines.append(",".join(row))
    return lines


def write_report(path, pairs, series: dict | None = None) -> None:
    """Write `key = value` lines, then an optional `[series]` CSV block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key} = {_fmt(value)}" for key, value in pairs]
    if series:
        lines.append("")
        lines.append("[series]")
        lines.extend(_csv_lines(series))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_series_csv(path, series: dict) -> None:
    """Plot-ready CSV with the standard column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = {col: series[col] for col in SERIES_COLUMNS if col in series}
    path.write_text("\n".join(_csv_lines(ordered)) + "\n", encoding="utf-8")


def _finite(series, name):
    y = np.asarray(series.get(name, ()), dtype=float)
    return y if y.size and np.any(np.isfinite(y)) else None


def render_error_figure(path, series: dict, title: str) -> None:
    """Per-step relative errors with the three bounds overlaid (log scale)."""
    step = np.asarray(series["step"])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = {
        "rel_error_srom": dict(color="tab:blue", marker="o", ms=3, label="spatial ROM error"),
        "rel_error_strom": dict(color="tab:red", marker="s", ms=3, label="space-time ROM error"),
    }
    for name, style in styles.items():
        y = _finite(series, name)
        if y is not None:
            ax.semilogy(step, np.maximum(y, 1e-18), **style)
    bound_labels = {
        "bound1": "residual bound",
        "bound2": "ROM-specific bound",
        "bound3": "space-time bound",
    }
    fom = _finite(series, "fom_norm")
    for name, label in bound_labels.items():
        y = _finite(series, name)
        if y is None:
            continue
        # bounds are absolute; plot them relative to the solution norm
        rel = y / fom if fom is not None else y
        ax.semilogy(step, np.maximum(rel, 1e-18), ls="--", lw=1.2, label=label)
    ax.set_xlabel("time step")
    ax.set_ylabel("relative error")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_output_figure(path, times, outputs: dict, title: str) -> None:
    """Output trajectories (first output component) for FOM and ROMs."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = {
        "fom": dict(color="k", lw=1.8, label="full order"),
        "srom": dict(color="tab:blue", lw=1.2, ls="--", label="spatial ROM"),
        "strom": dict(color="tab:red", lw=1.2, ls=":", label="space-time ROM"),
    }
    for name, y in outputs.items():
        if y is None:
            continue
        ax.plot(times, np.atleast_2d(y)[0], **styles.get(name, {}))
    ax.set_xlabel("time")
    ax.set_ylabel("output")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_training_figures(out_dir, sigma: np.ndarray, rank_history: np.ndarray) -> list[Path]:
    """Singular-value decay and streaming rank history."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(1, sigma.size + 1), sigma, "o-", ms=3)
    ax.set_xlabel("mode")
    ax.set_ylabel("singular value")
    ax.set_title("snapshot singular values")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    p = out_dir / "train_singular_values.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(np.arange(1, rank_history.size + 1), rank_history, where="post")
    ax.set_xlabel("ingested column")
    ax.set_ylabel("rank")
    ax.set_title("incremental SVD rank history")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    p = out_dir / "train_rank_history.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)
    return paths
