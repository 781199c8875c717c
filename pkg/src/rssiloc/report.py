"""Delimited outputs with stable schemas and byte-stable formatting.

All writers emit LF-terminated CSV with fixed column orders and fixed
numeric formats so that reruns under the same seed produce identical
bytes. Timing columns hold real measurements only when performance
capture is enabled; otherwise they are written as zeros to keep the
default outputs reproducible.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .runtime import TrialResult
from .search import HierarchyConfig, field_grid

METRICS_COLUMNS = [
    "trial", "iter", "robot", "ale_m", "rmse_m",
    "train_ms", "infer_ms", "mean_evals", "bytes_tx", "phase",
]

TRAJECTORY_COLUMNS = ["trial", "iter", "robot", "x_m", "y_m", "theta_rad"]

SUMMARY_COLUMNS_SIMULATE = [
    "trial", "robots", "width_m", "height_m", "shadow_sigma_dbm", "multipath_sigma_dbm",
    "ale_mean_m", "ale_std_m", "ale_steady_m", "rmse_mean_m", "rmse_std_m", "rmse_steady_m",
    "train_ms_mean", "infer_ms_mean", "iter_ms_mean", "bytes_per_robot_iter",
]

SUMMARY_COLUMNS_RENDEZVOUS = [
    "trial", "robots", "width_m", "height_m", "shadow_sigma_dbm",
    "success", "time_to_converge_iter", "max_pairwise_final_m",
    "rmse_mean_m", "ale_mean_m", "iter_ms_mean",
]

SUMMARY_COLUMNS_SWEEP = [
    "sweep_axis", "sweep_value", "trials", "robots", "width_m", "height_m",
    "ale_mean_m", "ale_steady_m", "rmse_mean_m", "rmse_std_m", "rmse_steady_m",
    "train_ms_mean", "infer_ms_mean", "iter_ms_mean", "bytes_per_robot_iter",
]

APBENCH_COLUMNS = ["method", "seed", "ale_m", "train_ms", "infer_ms", "mean_evals"]

FIELD_COLUMNS = ["x", "y", "mean_dbm", "var_dbm2"]


def fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.9f}"
    return str(value)


def _write_rows(path: Path, columns: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_metrics_csv(records, path) -> Path:
    rows = (
        (r.trial, r.iteration, r.robot, r.ale_m, r.rmse_m,
         round(r.train_ms, 3), round(r.infer_ms, 3), r.mean_evals, r.bytes_tx, r.phase)
        for r in records
    )
    return _write_rows(path, METRICS_COLUMNS, rows)


def write_trajectories_csv(trajectories, path) -> Path:
    return _write_rows(path, TRAJECTORY_COLUMNS, trajectories)


def write_summary_csv(rows: list[dict], columns: list[str], path) -> Path:
    return _write_rows(path, columns, ([row.get(c, math.nan) for c in columns] for row in rows))


def write_apbench_csv(rows: list[dict], path) -> Path:
    return _write_rows(
        path, APBENCH_COLUMNS, ([row[c] for c in APBENCH_COLUMNS] for row in rows)
    )


def write_field_dumps(result: TrialResult, hierarchy: HierarchyConfig, out_dir) -> list[Path]:
    """One ``field_lvl{k}_robot{id}.csv`` per hierarchy level per robot,
    sampled over the regions the robot's last search actually visited."""
    out_dir = Path(out_dir)
    paths = []
    for rid in sorted(result.agents):
        agent = result.agents[rid]
        if agent.model is None or agent.ap_estimate is None:
            continue
        for level, trace in enumerate(agent.ap_estimate.level_trace, start=1):
            rows = field_grid(agent.model, trace.region, hierarchy.grid_points)
            path = out_dir / f"field_lvl{level}_robot{rid}.csv"
            paths.append(_write_rows(path, FIELD_COLUMNS, rows))
    return paths


def aggregate_sweep_row(axis: str, value, summaries: list[dict]) -> dict:
    """Collapse per-trial summaries into the single row a sweep reports."""
    def _mean(key):
        vals = np.array([s[key] for s in summaries], dtype=float)
        finite = vals[np.isfinite(vals)]
        return float(finite.mean()) if finite.size else math.nan

    def _std(key):
        vals = np.array([s[key] for s in summaries], dtype=float)
        finite = vals[np.isfinite(vals)]
        return float(finite.std()) if finite.size else math.nan

    return {
        "sweep_axis": axis,
        "sweep_value": value,
        "trials": len(summaries),
        "robots": summaries[0]["robots"],
        "width_m": summaries[0]["width_m"],
        "height_m": summaries[0]["height_m"],
        "ale_mean_m": _mean("ale_mean_m"),
        "ale_steady_m": _mean("ale_steady_m"),
        "rmse_mean_m": _mean("rmse_mean_m"),
        "rmse_std_m": _std("rmse_mean_m"),
        "rmse_steady_m": _mean("rmse_steady_m"),
        "train_ms_mean": _mean("train_ms_mean"),
        "infer_ms_mean": _mean("infer_ms_mean"),
        "iter_ms_mean": _mean("iter_ms_mean"),
        "bytes_per_robot_iter": _mean("bytes_per_robot_iter"),
    }
