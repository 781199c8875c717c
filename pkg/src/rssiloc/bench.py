"""Single-robot AP-search benchmark: seeded simulated fields plus the
method lineup (multi-level search at 1..K levels, dense and sparse
single-level grids, gradient ascent).

Every field places the transmitter at the workspace center, draws
uniformly scattered sample positions, and applies the same two-draw
noise contract as the live channel, so the benchmark and the simulator
share one physics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .gp import FitBudget, RssiSample, TrainedGp, fit
from .search import (
    ApEstimate,
    HierarchyConfig,
    SearchRegion,
    default_search_region,
    dense_argmax,
    gradient_ascent_baseline,
    hierarchical_search,
)
from .world import ChannelParams, mean_rssi

_FIELD_STREAM = 0xF1E1D

DENSE_RESOLUTION = 0.0125
SPARSE_RESOLUTION = 0.1
GRADIENT_MIN_START_DISTANCE = 1.0


@dataclass(frozen=True)
class BenchField:
    seed: int
    samples: tuple[RssiSample, ...]
    model: TrainedGp
    true_ap: np.ndarray
    region: SearchRegion
    train_seconds: float


@dataclass(frozen=True)
class MethodResult:
    method: str
    estimate: ApEstimate
    ale_m: float
    infer_seconds: float
    mean_evals: int


def simulate_samples(
    seed: int,
    n_samples: int,
    width: float = 3.2,
    height: float = 2.0,
    channel: ChannelParams = ChannelParams(),
    margin: float = 0.05,
) -> tuple[list[RssiSample], np.ndarray]:
    """Uniformly scattered noisy readings of a centered transmitter."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _FIELD_STREAM]))
    ap = np.array([width / 2.0, height / 2.0])
    samples = []
    for _ in range(n_samples):
        x = rng.uniform(margin, width - margin)
        y = rng.uniform(margin, height - margin)
        distance = math.hypot(x - ap[0], y - ap[1])
        shadow = rng.standard_normal()
        multipath = rng.standard_normal()
        rssi = (
            mean_rssi(channel, distance)
            - channel.shadow_sigma * shadow
            - channel.multipath_sigma * multipath
        )
        samples.append(RssiSample((x, y), rssi))
    return samples, ap


def make_field(
    seed: int,
    n_samples: int = 50,
    width: float = 3.2,
    height: float = 2.0,
    channel: ChannelParams = ChannelParams(),
    hierarchy: HierarchyConfig = HierarchyConfig(),
    budget: FitBudget | None = None,
) -> BenchField:
    samples, ap = simulate_samples(seed, n_samples, width, height, channel)
    if budget is None:
        budget = FitBudget(seed=seed)
    start = time.perf_counter()
    model = fit(samples, budget)
    train_seconds = time.perf_counter() - start
    region = default_search_region(model, hierarchy)
    return BenchField(
        seed=seed,
        samples=tuple(samples),
        model=model,
        true_ap=ap,
        region=region,
        train_seconds=train_seconds,
    )


def gradient_start(field: BenchField) -> np.ndarray:
    """Start point for the gradient baseline, at least
    ``GRADIENT_MIN_START_DISTANCE`` from the true AP: the farthest
    training input, or the farthest region corner as a fallback."""
    distances = np.linalg.norm(field.model.inputs - field.true_ap, axis=1)
    candidate = field.model.inputs[int(np.argmax(distances))]
    if distances.max() >= GRADIENT_MIN_START_DISTANCE:
        return np.asarray(candidate, dtype=float)
    lo, hi = field.region.lo, field.region.hi
    corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
    far = corners[int(np.argmax(np.linalg.norm(corners - field.true_ap, axis=1)))]
    return np.asarray(far, dtype=float)


def _timed(fn, repeats: int = 1):
    best = math.inf
    result = None
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return result, best


def run_method(field: BenchField, method: str, hierarchy: HierarchyConfig, repeats: int = 1) -> MethodResult:
    """Run one named method: ``hier_k<N>``, ``dense``, ``sparse``, or
    ``gradient``."""
    if method.startswith("hier_k"):
        levels = int(method.removeprefix("hier_k"))
        cfg = HierarchyConfig(
            resolutions=hierarchy.resolutions[:levels],
            grid_points=hierarchy.grid_points,
            shrink=hierarchy.shrink,
            uncertainty_expansion=hierarchy.uncertainty_expansion,
        )
        estimate, seconds = _timed(lambda: hierarchical_search(field.model, field.region, cfg), repeats)
    elif method == "dense":
        estimate, seconds = _timed(
            lambda: dense_argmax(field.model, field.region, DENSE_RESOLUTION), repeats
        )
    elif method == "sparse":
        estimate, seconds = _timed(
            lambda: dense_argmax(field.model, field.region, SPARSE_RESOLUTION), repeats
        )
    elif method == "gradient":
        start = gradient_start(field)
        estimate, seconds = _timed(
            lambda: gradient_ascent_baseline(field.model, start), repeats
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    ale = float(np.linalg.norm(estimate.position - field.true_ap))
    return MethodResult(
        method=method,
        estimate=estimate,
        ale_m=ale,
        infer_seconds=seconds,
        mean_evals=estimate.mean_evals,
    )


def default_methods(hierarchy: HierarchyConfig) -> list[str]:
    return [f"hier_k{k}" for k in range(1, hierarchy.levels + 1)] + ["dense", "sparse", "gradient"]


def run_ap_bench(
    seeds,
    n_samples: int = 50,
    width: float = 3.2,
    height: float = 2.0,
    channel: ChannelParams = ChannelParams(),
    hierarchy: HierarchyConfig = HierarchyConfig(),
    methods: list[str] | None = None,
    repeats: int = 1,
) -> list[dict]:
    """One row per method x seed with ALE, timings, and eval counts."""
    if methods is None:
        methods = default_methods(hierarchy)
    rows = []
    for seed in seeds:
        field = make_field(seed, n_samples=n_samples, width=width, height=height,
                           channel=channel, hierarchy=hierarchy)
        for method in methods:
            result = run_method(field, method, hierarchy, repeats=repeats)
            rows.append(
                {
                    "method": method,
                    "seed": seed,
                    "ale_m": result.ale_m,
                    "train_ms": field.train_seconds * 1e3,
                    "infer_ms": result.infer_seconds * 1e3,
                    "mean_evals": result.mean_evals,
                }
            )
    return rows
