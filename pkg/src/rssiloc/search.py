"""Access-point localization over a trained RSSI field model.

Three strategies share the same posterior-mean objective: an exhaustive
dense grid argmax (the accuracy reference), a multi-resolution
coarse-to-fine search that recenters a fixed-size grid on each level's
peak, and a fixed-step gradient ascent baseline that is deliberately
susceptible to local maxima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gp import TrainedGp, predict_mean, predict_variance

MAX_GRID_POINTS = 10_000_000

# Per-level region shrink applied to the previous level's half extent.
DEFAULT_SHRINK = 0.5
GRADIENT_NORM_TOL = 1e-6  # dBm/m


class GridTooLarge(ValueError):
    """Requested grid resolution exceeds the evaluation-point budget."""


@dataclass(frozen=True)
class SearchRegion:
    """Axis-aligned box: center plus positive half extents (m)."""

    center: tuple[float, float]
    half_extent: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(
            self, "half_extent", (float(self.half_extent[0]), float(self.half_extent[1]))
        )
        if not all(math.isfinite(c) for c in self.center + self.half_extent):
            raise ValueError("region must be finite")
        if self.half_extent[0] <= 0.0 or self.half_extent[1] <= 0.0:
            raise ValueError("half extents must be > 0")

    @property
    def lo(self) -> tuple[float, float]:
        return (self.center[0] - self.half_extent[0], self.center[1] - self.half_extent[1])

    @property
    def hi(self) -> tuple[float, float]:
        return (self.center[0] + self.half_extent[0], self.center[1] + self.half_extent[1])


@dataclass(frozen=True)
class HierarchyConfig:
    """Multi-resolution schedule: strictly decreasing cell sizes, one
    ``grid_points`` x ``grid_points`` grid per level."""

    resolutions: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
    grid_points: int = 30
    shrink: float = DEFAULT_SHRINK
    uncertainty_expansion: bool = True

    def __post_init__(self):
        object.__setattr__(self, "resolutions", tuple(float(r) for r in self.resolutions))
        if len(self.resolutions) < 1:
            raise ValueError("need at least one level")
        if any(r <= 0.0 for r in self.resolutions):
            raise ValueError("resolutions must be > 0")
        if any(a <= b for a, b in zip(self.resolutions, self.resolutions[1:])):
            raise ValueError("resolutions must be strictly decreasing")
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")

    @property
    def levels(self) -> int:
        return len(self.resolutions)


@dataclass(frozen=True)
class LevelTrace:
    """Per-level argmax, its posterior variance, and the searched region."""

    position: tuple[float, float]
    variance: float
    region: SearchRegion


@dataclass(frozen=True, eq=False)
class ApEstimate:
    """AP position in the querying robot's frame with an uncertainty
    aggregate (resolution-weighted variance sum; a diagnostic, not a
    calibrated variance)."""

    position: np.ndarray        # (2,), m
    variance: float             # dBm^2 scale diagnostic
    level_trace: tuple[LevelTrace, ...] = ()
    mean_evals: int = 0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(2)
        pos.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "variance", float(self.variance))


def _grid_axis(center: float, n: int, spacing: float) -> np.ndarray:
    # n cells of width `spacing`, symmetric about `center` (cell centers).
    return center + (np.arange(n) - (n - 1) / 2.0) * spacing


def _grid_points(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # Lexicographic (x, then y) enumeration so index order doubles as the
    # final tie-break order.
    return np.column_stack((np.repeat(xs, ys.size), np.tile(ys, xs.size)))


def _argmax_with_tiebreak(model: TrainedGp, points: np.ndarray, means: np.ndarray) -> tuple[int, float]:
    """Max mean, then min variance, then lexicographic smallest point.

    Returns the winning index and its posterior variance.
    """
    top = means.max()
    candidates = np.flatnonzero(means == top)
    if candidates.size == 1:
        idx = int(candidates[0])
        return idx, float(predict_variance(model, points[idx])[0])
    variances = predict_variance(model, points[candidates])
    best_var = variances.min()
    idx = int(candidates[np.flatnonzero(variances == best_var)[0]])
    return idx, float(best_var)


def dense_argmax(model: TrainedGp, region: SearchRegion, resolution: float) -> ApEstimate:
    """Exhaustive posterior-mean argmax on a full grid of cell size
    ``resolution`` covering ``region``.

    Raises :class:`GridTooLarge` beyond ``MAX_GRID_POINTS`` evaluations.
    """
    if resolution <= 0.0:
        raise ValueError("resolution must be > 0")
    nx = max(1, int(round(2.0 * region.half_extent[0] / resolution)))
    ny = max(1, int(round(2.0 * region.half_extent[1] / resolution)))
    if nx * ny > MAX_GRID_POINTS:
        raise GridTooLarge(f"{nx}x{ny} grid exceeds the {MAX_GRID_POINTS}-point budget")
    xs = _grid_axis(region.center[0], nx, resolution)
    ys = _grid_axis(region.center[1], ny, resolution)
    points = _grid_points(xs, ys)
    means = predict_mean(model, points)
    idx, variance = _argmax_with_tiebreak(model, points, means)
    position = points[idx]
    trace = LevelTrace(position=(position[0], position[1]), variance=variance, region=region)
    return ApEstimate(position=position, variance=variance, level_trace=(trace,), mean_evals=nx * ny)


def _clamp_region(center: np.ndarray, half: float, outer: SearchRegion) -> SearchRegion:
    lo = np.maximum(center - half, np.asarray(outer.lo))
    hi = np.minimum(center + half, np.asarray(outer.hi))
    # The previous argmax lies inside `outer`, so lo <= hi holds per axis.
    return SearchRegion(center=tuple((lo + hi) / 2.0), half_extent=tuple(np.maximum((hi - lo) / 2.0, 1e-9)))


def _level_grid(model: TrainedGp, region: SearchRegion, n: int) -> tuple[np.ndarray, np.ndarray]:
    xs = _grid_axis(region.center[0], n, 2.0 * region.half_extent[0] / n)
    ys = _grid_axis(region.center[1], n, 2.0 * region.half_extent[1] / n)
    points = _grid_points(xs, ys)
    return points, predict_mean(model, points)


def hierarchical_search(model: TrainedGp, start: SearchRegion, cfg: HierarchyConfig) -> ApEstimate:
    """Coarse-to-fine argmax of the posterior mean.

    Level 1 covers ``start`` with a ``G x G`` grid; each later level
    recenters a shrunken region on the previous argmax (optionally
    widened by the previous level's uncertainty ratio), clamps it to
    ``start``, and refines. The returned position is the final level's
    argmax; the variance aggregates the per-level variances weighted by
    their resolutions. Exactly ``levels * G^2`` posterior-mean
    evaluations are performed regardless of region sizes.
    """
    g = cfg.grid_points
    sigma_f = math.sqrt(model.hyperparams.signal_variance)
    region = start
    traces: list[LevelTrace] = []
    position = np.asarray(start.center, dtype=float)
    for k, res in enumerate(cfg.resolutions):
        if k > 0:
            prev_res = cfg.resolutions[k - 1]
            half = max(prev_res * g / 2.0 * cfg.shrink, res * g / 2.0)
            if cfg.uncertainty_expansion:
                ratio = math.sqrt(traces[-1].variance) / sigma_f
                half += min(prev_res * g / 4.0, prev_res * ratio)
            region = _clamp_region(position, half, start)
        points, means = _level_grid(model, region, g)
        idx, variance = _argmax_with_tiebreak(model, points, means)
        position = points[idx]
        traces.append(LevelTrace(position=(position[0], position[1]), variance=variance, region=region))
    aggregate = sum(res * trace.variance for res, trace in zip(cfg.resolutions, traces))
    return ApEstimate(
        position=position,
        variance=aggregate,
        level_trace=tuple(traces),
        mean_evals=cfg.levels * g * g,
    )


def gradient_ascent_baseline(
    model: TrainedGp,
    start,
    step: float = 0.05,
    max_iters: int = 200,
) -> ApEstimate:
    """Fixed-step steepest ascent on the posterior mean.

    Central differences with ``h = step / 10`` estimate the gradient;
    the walk stops when its norm drops below ``GRADIENT_NORM_TOL`` or
    after ``max_iters`` steps. No optimality claim: the baseline exists
    to exhibit convergence to local maxima.
    """
    if step <= 0.0:
        raise ValueError("step must be > 0")
    h = step / 10.0
    point = np.asarray(start, dtype=float).reshape(2).copy()
    start_var = float(predict_variance(model, point)[0])
    trace = [LevelTrace(position=(point[0], point[1]), variance=start_var,
                        region=SearchRegion(tuple(point), (step, step)))]
    evals = 0
    for _ in range(max_iters):
        stencil = np.array(
            [
                [point[0] + h, point[1]],
                [point[0] - h, point[1]],
                [point[0], point[1] + h],
                [point[0], point[1] - h],
            ]
        )
        m = predict_mean(model, stencil)
        evals += 4
        grad = np.array([(m[0] - m[1]) / (2.0 * h), (m[2] - m[3]) / (2.0 * h)])
        norm = float(np.linalg.norm(grad))
        if norm < GRADIENT_NORM_TOL:
            break
        point = point + step * grad / norm
    final_var = float(predict_variance(model, point)[0])
    trace.append(
        LevelTrace(position=(point[0], point[1]), variance=final_var,
                   region=SearchRegion(tuple(point), (step, step)))
    )
    return ApEstimate(position=point, variance=final_var, level_trace=tuple(trace), mean_evals=evals)


def default_search_region(model: TrainedGp, cfg: HierarchyConfig) -> SearchRegion:
    """Level-1 region sized ``G * r_1`` per side, centered on the
    training input with the highest posterior mean (the hottest spot the
    robot has visited). Needs no ground truth."""
    means = predict_mean(model, model.inputs)
    center = model.inputs[int(np.argmax(means))]
    half = cfg.resolutions[0] * cfg.grid_points / 2.0
    return SearchRegion(center=(center[0], center[1]), half_extent=(half, half))


def field_grid(model: TrainedGp, region: SearchRegion, n: int):
    """``n x n`` grid over ``region`` with posterior mean and variance,
    as rows ``(x, y, mean_dbm, var_dbm2)`` for field dumps."""
    points, means = _level_grid(model, region, n)
    variances = predict_variance(model, points)
    return np.column_stack((points, means, variances))
