"""Figure rendering for the benchmark reports.

Figures are rendered headless to PNG next to the delimited outputs;
they visualize the CSV content and never feed back into it.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_error_curves(records, path) -> Path:
    """Per-iteration AP error and neighbor RMSE, one line per robot."""
    by_robot_ale = defaultdict(dict)
    by_robot_rmse = defaultdict(dict)
    for r in records:
        if not math.isnan(r.ale_m):
            by_robot_ale[r.robot].setdefault(r.iteration, []).append(r.ale_m)
        if not math.isnan(r.rmse_m):
            by_robot_rmse[r.robot].setdefault(r.iteration, []).append(r.rmse_m)
    fig, (ax_ale, ax_rmse) = plt.subplots(1, 2, figsize=(9, 3.4))
    for robot in sorted(by_robot_ale):
        iters = sorted(by_robot_ale[robot])
        ax_ale.plot(iters, [np.mean(by_robot_ale[robot][i]) for i in iters], label=f"robot {robot}")
    for robot in sorted(by_robot_rmse):
        iters = sorted(by_robot_rmse[robot])
        ax_rmse.plot(iters, [np.mean(by_robot_rmse[robot][i]) for i in iters], label=f"robot {robot}")
    ax_ale.set_xlabel("iteration")
    ax_ale.set_ylabel("AP error (m)")
    ax_rmse.set_xlabel("iteration")
    ax_rmse.set_ylabel("relative RMSE (m)")
    ax_ale.legend(fontsize=8)
    return _save(fig, path)


def plot_field(field_rows: np.ndarray, true_ap, estimate, path) -> Path:
    """Posterior-mean heatmap from one field dump, with AP markers."""
    xs = np.unique(field_rows[:, 0])
    ys = np.unique(field_rows[:, 1])
    grid = field_rows[:, 2].reshape(xs.size, ys.size).T
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    im = ax.imshow(
        grid, origin="lower", extent=(xs[0], xs[-1], ys[0], ys[-1]), aspect="equal", cmap="viridis"
    )
    fig.colorbar(im, ax=ax, label="mean RSSI (dBm)")
    if true_ap is not None:
        ax.plot(true_ap[0], true_ap[1], "w*", markersize=11, label="true AP")
    if estimate is not None:
        ax.plot(estimate[0], estimate[1], "rx", markersize=9, label="estimate")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(fontsize=8, loc="upper right")
    return _save(fig, path)


def plot_ap_bench(rows: list[dict], path) -> Path:
    """ALE and inference-time distributions per method."""
    methods = []
    for row in rows:
        if row["method"] not in methods:
            methods.append(row["method"])
    ale = {m: [r["ale_m"] for r in rows if r["method"] == m] for m in methods}
    times = {m: [r["infer_ms"] for r in rows if r["method"] == m] for m in methods}
    fig, (ax_ale, ax_t) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    ax_ale.boxplot([ale[m] for m in methods], tick_labels=methods)
    ax_ale.set_ylabel("AP error (m)")
    ax_ale.tick_params(axis="x", rotation=45)
    ax_t.bar(methods, [np.mean(times[m]) for m in methods])
    ax_t.set_ylabel("inference time (ms)")
    ax_t.tick_params(axis="x", rotation=45)
    return _save(fig, path)


def plot_trajectories(trajectories, bounds, ap_position, path, epsilon: float | None = None) -> Path:
    """Ground-truth robot tracks in the workspace."""
    by_robot = defaultdict(list)
    for _, _, robot, x, y, _ in trajectories:
        by_robot[robot].append((x, y))
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    for robot in sorted(by_robot):
        pts = np.asarray(by_robot[robot])
        ax.plot(pts[:, 0], pts[:, 1], lw=1.0, label=f"robot {robot}")
        ax.plot(pts[0, 0], pts[0, 1], "o", color=ax.lines[-1].get_color(), markersize=5)
        ax.plot(pts[-1, 0], pts[-1, 1], "s", color=ax.lines[-1].get_color(), markersize=5)
    ax.plot(ap_position[0], ap_position[1], "k*", markersize=12, label="AP")
    ax.set_xlim(0, bounds[0])
    ax.set_ylim(0, bounds[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(fontsize=8)
    if epsilon is not None:
        ax.set_title(f"start = circle, end = square (epsilon = {epsilon} m)", fontsize=9)
    return _save(fig, path)


def plot_pairwise_distance(series_by_trial: dict[int, list[float]], epsilon: float, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    for trial in sorted(series_by_trial):
        ax.plot(series_by_trial[trial], lw=1.0, label=f"trial {trial}")
    ax.axhline(epsilon, color="k", ls="--", lw=1.0, label="epsilon")
    ax.set_xlabel("iteration")
    ax.set_ylabel("max pairwise distance (m)")
    if len(series_by_trial) <= 6:
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_sweep(rows: list[dict], path) -> Path:
    """RMSE versus the swept value."""
    values = [row["sweep_value"] for row in rows]
    rmse = [row["rmse_mean_m"] for row in rows]
    std = [row.get("rmse_std_m", 0.0) for row in rows]
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.errorbar(values, rmse, yerr=std, marker="o")
    ax.set_xlabel(rows[0]["sweep_axis"] if rows else "value")
    ax.set_ylabel("relative RMSE (m)")
    return _save(fig, path)
