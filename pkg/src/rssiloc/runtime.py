"""Distributed per-robot agent loop, simulated message bus, rendezvous
consensus, and the seeded trial harness.

Agents see only their own odometry, their own RSSI samples, and inbox
messages; ground truth stays on the harness side of the
:meth:`~rssiloc.world.World.agent_guard` boundary and is used solely
for motion scripting (the environment's random walk) and metrics. Every
stochastic element draws from named per-robot substreams, so runs are
bit-reproducible for a given config and scheduling-independent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .config import SimConfig, SimOptions, spawn_robot_starts
from .frames import (
    MESSAGE_SIZE_BYTES,
    NeighborEstimate,
    PeerMessage,
    Pose2D,
    pack_message,
    relative_position,
    rotation_between,
    unpack_message,
)
from .gp import DegenerateData, FactorizationFailure, FitBudget, RssiSample, TrainedGp, fit
from .search import ApEstimate, HierarchyConfig, default_search_region, hierarchical_search
from .world import RandomWalkController, World, WorldConfig, sample_rssi, si_to_unicycle

PHASE_RANDOM_WALK = "random_walk"
PHASE_LOCALIZE = "localize"
PHASE_RENDEZVOUS = "rendezvous"

_BUS_STREAM = 0xB5
_TRIAL_STREAM = 0x7A1A


class NoNeighbors(RuntimeError):
    """Consensus requested with an empty neighbor table."""


@dataclass(frozen=True)
class LocalObservation:
    """Everything an agent may see in one tick."""

    iteration: int
    odometry: Pose2D          # own frame
    rssi: float               # dBm
    walk_command: tuple[float, float]  # environment-scripted (v, omega)


@dataclass(frozen=True)
class AgentOutput:
    command: tuple[float, float]
    outbox: PeerMessage | None
    train_ms: float
    infer_ms: float
    mean_evals: int
    phase: str


def rendezvous_command(
    position: np.ndarray,
    neighbors: list[NeighborEstimate],
    gain: float = 1.0,
) -> np.ndarray:
    """Average-consensus velocity toward the centroid of self plus all
    neighbor estimates (local frame). Raises :class:`NoNeighbors` when
    the table is empty."""
    if not neighbors:
        raise NoNeighbors("no neighbor estimates available")
    points = np.vstack([position] + [n.position for n in neighbors])
    return gain * (points.mean(axis=0) - position)


class Agent:
    """One robot's estimation pipeline.

    Per tick: buffer the RSSI sample, retrain on cadence, refresh the AP
    estimate by hierarchical search, re-derive neighbor estimates from
    the latest peer messages, broadcast one fixed-size message, and
    return the active controller's command.
    """

    def __init__(
        self,
        robot_id: int,
        config: SimConfig,
        options: SimOptions,
        initial_headings: dict[int, float],
        fit_seed: int,
    ):
        self.robot_id = robot_id
        self.config = config
        self.options = options
        self.initial_headings = dict(initial_headings)
        self.fit_seed = fit_seed
        self.samples: list[RssiSample] = []
        self.buffer_capacity = 4 * config.gp.max_training_points
        self.model: TrainedGp | None = None
        self.ap_estimate: ApEstimate | None = None
        self.last_messages: dict[int, tuple[PeerMessage, int]] = {}
        self.neighbor_table: dict[int, tuple[PeerMessage, NeighborEstimate]] = {}
        self.phase = PHASE_RANDOM_WALK
        self.seq = 0
        self._fit_count = 0
        self._last_fit_iter: int | None = None
        self._last_hyperfit_iter: int | None = None

    # -- training -----------------------------------------------------

    def _budget(self, full: bool) -> FitBudget:
        warm = self.model.hyperparams if self.model is not None else None
        seed = self.fit_seed + self._fit_count
        if full and warm is None:
            # First fit: the whole multi-start budget.
            return FitBudget(
                restarts=self.config.gp.restarts,
                max_training_points=self.config.gp.max_training_points,
                seed=seed,
            )
        if full:
            # Periodic hyperparameter refresh, warm-started: data drifts
            # slowly so a reduced search suffices.
            return FitBudget(
                restarts=2,
                max_training_points=self.config.gp.max_training_points,
                seed=seed,
                scan_points=11,
                max_sweeps=3,
                warm_start=warm,
            )
        # Cheap refresh: keep hyperparameters, redraw the subset and
        # refactorize with the new data.
        return FitBudget(
            restarts=1,
            max_training_points=self.config.gp.max_training_points,
            seed=seed,
            max_sweeps=0,
            warm_start=warm,
        )

    def _maybe_retrain(self, iteration: int) -> float:
        due = (
            self.model is None
            or iteration - self._last_fit_iter >= self.config.gp.retrain_every
        )
        if not due:
            return 0.0
        full = (
            self._last_hyperfit_iter is None
            or iteration - self._last_hyperfit_iter >= self.options.hyperfit_every
        )
        start = time.perf_counter() if self.options.perf else 0.0
        try:
            self.model = fit(self.samples, self._budget(full))
        except FactorizationFailure:
            self.model = fit(self.samples, self._budget(True))
            full = True
        except DegenerateData:
            return 0.0
        self._fit_count += 1
        self._last_fit_iter = iteration
        if full:
            self._last_hyperfit_iter = iteration
        return (time.perf_counter() - start) * 1e3 if self.options.perf else 0.0

    # -- per-tick pipeline ---------------------------------------------

    def tick(self, obs: LocalObservation, inbox: list[PeerMessage]) -> AgentOutput:
        self.samples.append(RssiSample((obs.odometry.x, obs.odometry.y), obs.rssi))
        if len(self.samples) > self.buffer_capacity:
            del self.samples[0]
        if self.phase == PHASE_RANDOM_WALK and len(self.samples) > self.config.gp.initial_samples:
            self.phase = PHASE_LOCALIZE

        train_ms = 0.0
        infer_ms = 0.0
        mean_evals = 0
        if self.phase != PHASE_RANDOM_WALK:
            train_ms = self._maybe_retrain(obs.iteration)
            if self.model is not None:
                start = time.perf_counter() if self.options.perf else 0.0
                region = default_search_region(self.model, self.config.hierarchy)
                self.ap_estimate = hierarchical_search(self.model, region, self.config.hierarchy)
                if self.options.perf:
                    infer_ms = (time.perf_counter() - start) * 1e3
                mean_evals = self.ap_estimate.mean_evals

        for msg in sorted(inbox, key=lambda m: m.sender):
            self.last_messages[msg.sender] = (msg, obs.iteration)
        if self.ap_estimate is not None:
            own_heading = self.initial_headings[self.robot_id]
            self.neighbor_table = {}
            for sender in sorted(self.last_messages):
                msg, received = self.last_messages[sender]
                rotation = rotation_between(self.initial_headings[sender], own_heading)
                estimate = relative_position(
                    self.ap_estimate,
                    msg,
                    rotation,
                    age=obs.iteration - received,
                    max_age=self.options.max_message_age,
                )
                self.neighbor_table[sender] = (msg, estimate)

        outbox: PeerMessage | None = None
        if self.phase != PHASE_RANDOM_WALK and self.ap_estimate is not None:
            outbox = PeerMessage(
                sender=self.robot_id,
                seq=self.seq,
                odometry=obs.odometry,
                ap_estimate=self.ap_estimate,
            )
            self.seq += 1

        if (
            self.phase == PHASE_LOCALIZE
            and self.config.controller.type == "rendezvous"
            and self.ap_estimate is not None
            and obs.iteration >= self.options.rendezvous_after
        ):
            self.phase = PHASE_RENDEZVOUS

        command = obs.walk_command
        if self.phase == PHASE_RENDEZVOUS:
            try:
                velocity = rendezvous_command(
                    obs.odometry.xy,
                    [est for _, est in self.neighbor_table.values()],
                    gain=self.options.consensus_gain,
                )
            except NoNeighbors:
                velocity = np.zeros(2)
            command = si_to_unicycle(
                velocity,
                obs.odometry,
                v_max=self.config.controller.v_max,
                omega_max=self.config.controller.omega_max,
            )
        return AgentOutput(
            command=command,
            outbox=outbox,
            train_ms=train_ms,
            infer_ms=infer_ms,
            mean_evals=mean_evals,
            phase=self.phase,
        )


@dataclass(frozen=True)
class MetricsRecord:
    """One robot-iteration of harness-side measurements. Ground-truth
    errors are computed only here, never inside agents."""

    trial: int
    iteration: int
    robot: int
    ale_m: float
    rmse_m: float
    train_ms: float
    infer_ms: float
    mean_evals: int
    bytes_tx: int
    phase: str


@dataclass
class TrialResult:
    trial: int
    records: list[MetricsRecord]
    trajectories: list[tuple[int, int, int, float, float, float]]
    pairwise_max: list[float]          # ground-truth max pairwise distance per iteration
    iter_ms: list[float]
    agents: dict[int, Agent]
    world: World


def _trial_seed(base_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([base_seed, _TRIAL_STREAM, trial]).generate_state(1)[0])


def run_trial(config: SimConfig, trial: int = 0, options: SimOptions = SimOptions()) -> TrialResult:
    """Run one seeded trial; deterministic given (config, trial, options
    minus perf)."""
    trial_seed = _trial_seed(config.world.seed, trial)
    starts = spawn_robot_starts(config, trial_seed)
    world_cfg = WorldConfig(
        width=config.world.width,
        height=config.world.height,
        ap_position=config.world.ap_position,
        robots=starts,
        seed=trial_seed,
    )
    world = World(
        world_cfg,
        channel=config.channel,
        v_max=config.controller.v_max,
        omega_max=config.controller.omega_max,
    )
    initial_headings = {r.robot_id: r.start.heading for r in starts}
    agents = {
        rid: Agent(rid, config, options, initial_headings, world.fit_seed(rid))
        for rid in world.robot_ids
    }
    walkers = {
        rid: RandomWalkController(
            world.control_stream(rid),
            v_max=config.controller.v_max,
            omega_max=config.controller.omega_max,
        )
        for rid in world.robot_ids
    }
    bus_rng = np.random.default_rng(np.random.SeedSequence([trial_seed, _BUS_STREAM]))

    records: list[MetricsRecord] = []
    trajectories: list[tuple[int, int, int, float, float, float]] = []
    pairwise_max: list[float] = []
    iter_ms: list[float] = []
    inboxes: dict[int, list[PeerMessage]] = {rid: [] for rid in world.robot_ids}

    for iteration in range(config.run.iterations):
        tick_start = time.perf_counter() if options.perf else 0.0

        observations = {}
        for rid in world.robot_ids:
            walk_cmd = walkers[rid](world.true_pose(rid), world.bounds)
            observations[rid] = LocalObservation(
                iteration=iteration,
                odometry=world.local_odometry(rid),
                rssi=sample_rssi(world, rid),
                walk_command=walk_cmd,
            )

        outputs: dict[int, AgentOutput] = {}
        for rid in world.robot_ids:
            with world.agent_guard():
                outputs[rid] = agents[rid].tick(observations[rid], inboxes[rid])

        # Harness-side metrics against ground truth.
        for rid in world.robot_ids:
            agent = agents[rid]
            out = outputs[rid]
            ale = math.nan
            rmse = math.nan
            if agent.ap_estimate is not None:
                ale = float(
                    np.linalg.norm(agent.ap_estimate.position - world.true_ap_local(rid))
                )
            if agent.neighbor_table:
                errors = [
                    float(
                        np.linalg.norm(
                            est.position - world.true_relative_position(rid, other)
                        )
                    )
                    for other, (_, est) in agent.neighbor_table.items()
                ]
                rmse = math.sqrt(sum(e * e for e in errors) / len(errors))
            records.append(
                MetricsRecord(
                    trial=trial,
                    iteration=iteration,
                    robot=rid,
                    ale_m=ale,
                    rmse_m=rmse,
                    train_ms=out.train_ms,
                    infer_ms=out.infer_ms,
                    mean_evals=out.mean_evals,
                    bytes_tx=MESSAGE_SIZE_BYTES if out.outbox is not None else 0,
                    phase=out.phase,
                )
            )

        # Synchronous zero-latency broadcast: messages emitted this tick
        # arrive in everyone else's next-tick inbox, sorted by sender.
        # The wire round-trip keeps the payload accounting honest.
        next_inboxes: dict[int, list[PeerMessage]] = {rid: [] for rid in world.robot_ids}
        for sender in world.robot_ids:
            msg = outputs[sender].outbox
            if msg is None:
                continue
            wire = pack_message(msg)
            for receiver in world.robot_ids:
                if receiver == sender:
                    continue
                if options.drop_prob > 0.0 and bus_rng.random() < options.drop_prob:
                    continue
                next_inboxes[receiver].append(unpack_message(wire))
        inboxes = {rid: sorted(box, key=lambda m: m.sender) for rid, box in next_inboxes.items()}

        for rid in world.robot_ids:
            v, omega = outputs[rid].command
            world.apply_command(rid, v, omega, dt=options.dt)

        if options.collect_trajectories:
            for rid in world.robot_ids:
                pose = world.true_pose(rid)
                trajectories.append((trial, iteration, rid, pose.x, pose.y, pose.heading))

        poses = [world.true_pose(rid) for rid in world.robot_ids]
        max_dist = 0.0
        for i in range(len(poses)):
            for j in range(i + 1, len(poses)):
                max_dist = max(
                    max_dist, math.hypot(poses[i].x - poses[j].x, poses[i].y - poses[j].y)
                )
        pairwise_max.append(max_dist)
        iter_ms.append((time.perf_counter() - tick_start) * 1e3 if options.perf else 0.0)

    return TrialResult(
        trial=trial,
        records=records,
        trajectories=trajectories,
        pairwise_max=pairwise_max,
        iter_ms=iter_ms,
        agents=agents,
        world=world,
    )


def converged_at(pairwise_max: list[float], epsilon: float) -> int | None:
    """First iteration with max pairwise distance within epsilon."""
    for iteration, dist in enumerate(pairwise_max):
        if dist <= epsilon:
            return iteration
    return None


def summarize_trial(result: TrialResult, config: SimConfig) -> dict:
    """Mean/std aggregation over robots and iterations for one trial.

    Besides the full-run means (which include the random-walk bootstrap
    while the maps are still nearly empty), the converged behavior is
    reported over the final third of the iterations as the ``steady``
    metrics; that window is what trial-level accuracy claims compare.
    """
    ale = np.array([r.ale_m for r in result.records], dtype=float)
    rmse = np.array([r.rmse_m for r in result.records], dtype=float)
    train = np.array([r.train_ms for r in result.records], dtype=float)
    infer = np.array([r.infer_ms for r in result.records], dtype=float)
    bytes_tx = np.array([r.bytes_tx for r in result.records], dtype=float)
    robots = len(result.world.robot_ids)
    iters = config.run.iterations
    steady_start = iters - max(1, iters // 3)
    steady = np.array([r.iteration >= steady_start for r in result.records])

    def _mean(values: np.ndarray) -> float:
        finite = values[np.isfinite(values)]
        return float(finite.mean()) if finite.size else math.nan

    def _std(values: np.ndarray) -> float:
        finite = values[np.isfinite(values)]
        return float(finite.std()) if finite.size else math.nan

    epsilon = config.controller.rendezvous_epsilon_m
    converged = converged_at(result.pairwise_max, epsilon)
    return {
        "trial": result.trial,
        "robots": robots,
        "width_m": config.world.width,
        "height_m": config.world.height,
        "shadow_sigma_dbm": config.channel.shadow_sigma,
        "multipath_sigma_dbm": config.channel.multipath_sigma,
        "ale_mean_m": _mean(ale),
        "ale_std_m": _std(ale),
        "ale_steady_m": _mean(ale[steady]),
        "rmse_mean_m": _mean(rmse),
        "rmse_std_m": _std(rmse),
        "rmse_steady_m": _mean(rmse[steady]),
        "train_ms_mean": _mean(train),
        "infer_ms_mean": _mean(infer),
        "iter_ms_mean": float(np.mean(result.iter_ms)) if result.iter_ms else 0.0,
        "bytes_per_robot_iter": float(bytes_tx.sum() / (robots * iters)),
        "success": int(result.pairwise_max[-1] <= epsilon) if result.pairwise_max else 0,
        "time_to_converge_iter": converged if converged is not None else -1,
        "max_pairwise_final_m": result.pairwise_max[-1] if result.pairwise_max else math.nan,
    }
