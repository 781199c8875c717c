"""Structured trial configuration: exact file schema, validation with
key-path errors, and seeded default generation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .frames import Pose2D
from .search import HierarchyConfig
from .world import ChannelParams, RobotInit, WorldConfig


class ConfigInvalid(ValueError):
    """A configuration value is missing or out of contract; the message
    names the offending key path."""

    def __init__(self, key_path: str, reason: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {reason}")


@dataclass(frozen=True)
class GpConfig:
    initial_samples: int = 10
    max_training_points: int = 100
    restarts: int = 5
    retrain_every: int = 10

    def __post_init__(self):
        if self.initial_samples < 2:
            raise ConfigInvalid("gp.initial_samples", "must be >= 2")
        if self.max_training_points < 2:
            raise ConfigInvalid("gp.max_training_points", "must be >= 2")
        if self.restarts < 1:
            raise ConfigInvalid("gp.restarts", "must be >= 1")
        if self.retrain_every < 1:
            raise ConfigInvalid("gp.retrain_every", "must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 300
    trials: int = 10

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigInvalid("run.iterations", "must be >= 1")
        if self.trials < 1:
            raise ConfigInvalid("run.trials", "must be >= 1")


@dataclass(frozen=True)
class ControllerConfig:
    type: str = "walk"
    v_max: float = 0.2
    omega_max: float = 2.0
    rendezvous_epsilon_m: float = 0.2

    def __post_init__(self):
        if self.type not in ("walk", "rendezvous"):
            raise ConfigInvalid("controller.type", "must be 'walk' or 'rendezvous'")
        if self.v_max <= 0.0:
            raise ConfigInvalid("controller.v_max", "must be > 0")
        if self.omega_max <= 0.0:
            raise ConfigInvalid("controller.omega_max", "must be > 0")
        if self.rendezvous_epsilon_m <= 0.0:
            raise ConfigInvalid("controller.rendezvous_epsilon_m", "must be > 0")


@dataclass(frozen=True)
class SimConfig:
    """Everything a trial needs; `world.robots` may be empty, in which
    case starts are drawn per trial from the trial seed."""

    world: WorldConfig
    channel: ChannelParams = ChannelParams()
    gp: GpConfig = GpConfig()
    hierarchy: HierarchyConfig = HierarchyConfig()
    run: RunConfig = RunConfig()
    controller: ControllerConfig = ControllerConfig()
    robot_count: int = 3  # used only when world.robots is empty


@dataclass(frozen=True)
class SimOptions:
    """API-level knobs that are not part of the config-file schema.

    ``dt`` is the motion step between successive samples. The 33 ms
    per-iteration figure is a compute budget (the pipeline stays well
    under it); robots cover useful ground between samples, so the
    default spacing is 0.2 s of motion.
    """

    dt: float = 0.2
    drop_prob: float = 0.0
    max_message_age: int = 20
    rendezvous_after: int = 90     # min iterations before consensus engages
    hyperfit_every: int = 30       # iterations between hyperparameter refits
    consensus_gain: float = 1.0
    perf: bool = False             # measure wall times into the records
    collect_trajectories: bool = True
    dump_fields: bool = False


def default_config(
    robots: int = 3,
    width: float = 3.2,
    height: float = 2.0,
    seed: int = 0,
    controller_type: str = "walk",
) -> SimConfig:
    world = WorldConfig(
        width=width,
        height=height,
        ap_position=(width / 2.0, height / 2.0),
        robots=(),
        seed=seed,
    )
    return SimConfig(
        world=world,
        controller=ControllerConfig(type=controller_type),
        robot_count=robots,
    )


def spawn_robot_starts(config: SimConfig, trial_seed: int) -> tuple[RobotInit, ...]:
    """Robot starts for one trial: explicit starts from the config, or
    seeded uniform draws with a wall margin and a shared zero heading."""
    if config.world.robots:
        return config.world.robots
    rng = np.random.default_rng(np.random.SeedSequence([trial_seed, 0x57A2]))
    margin = min(0.2, 0.2 * min(config.world.width, config.world.height))
    robots = []
    for robot_id in range(config.robot_count):
        x = rng.uniform(margin, config.world.width - margin)
        y = rng.uniform(margin, config.world.height - margin)
        robots.append(RobotInit(robot_id=robot_id, start=Pose2D(x, y, 0.0, frame="world")))
    return tuple(robots)


def _require(mapping, key_path: str, key: str, kind, optional_default=None):
    leaf = key_path.split(".")[-1] if "." in key_path else key
    if key not in mapping:
        if optional_default is not None:
            return optional_default
        raise ConfigInvalid(key_path, "missing required key")
    value = mapping[key]
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(key_path, f"expected {kind.__name__}, got {value!r}") from exc


def _check_known_keys(mapping, known: set[str], prefix: str):
    for key in mapping:
        if key not in known:
            raise ConfigInvalid(f"{prefix}.{key}" if prefix else key, "unknown key")


def config_from_dict(raw: dict) -> SimConfig:
    """Build and validate a :class:`SimConfig`; errors carry key paths."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>", "config must be a mapping")
    _check_known_keys(raw, {"world", "robots", "channel", "gp", "hierarchy", "run", "controller"}, "")

    world_raw = raw.get("world")
    if not isinstance(world_raw, dict):
        raise ConfigInvalid("world", "missing required section")
    _check_known_keys(world_raw, {"width_m", "height_m", "ap", "seed"}, "world")
    width = _require(world_raw, "world.width_m", "width_m", float)
    height = _require(world_raw, "world.height_m", "height_m", float)
    ap = world_raw.get("ap")
    if not isinstance(ap, (list, tuple)) or len(ap) != 2:
        raise ConfigInvalid("world.ap", "expected [x, y]")
    seed = _require(world_raw, "world.seed", "seed", int)

    robots: list[RobotInit] = []
    for i, entry in enumerate(raw.get("robots") or []):
        if not isinstance(entry, dict):
            raise ConfigInvalid(f"robots[{i}]", "expected a mapping")
        _check_known_keys(entry, {"id", "start"}, f"robots[{i}]")
        robot_id = _require(entry, f"robots[{i}].id", "id", int)
        start = entry.get("start")
        if not isinstance(start, (list, tuple)) or len(start) != 3:
            raise ConfigInvalid(f"robots[{i}].start", "expected [x, y, theta]")
        robots.append(
            RobotInit(robot_id=robot_id, start=Pose2D(float(start[0]), float(start[1]), float(start[2]), frame="world"))
        )

    channel_raw = raw.get("channel") or {}
    _check_known_keys(
        channel_raw, {"rssi_d0_dbm", "eta", "shadow_sigma_dbm", "multipath_sigma_dbm"}, "channel"
    )
    try:
        channel = ChannelParams(
            rssi_d0=_require(channel_raw, "channel.rssi_d0_dbm", "rssi_d0_dbm", float, -20.0),
            path_loss_exponent=_require(channel_raw, "channel.eta", "eta", float, 3.0),
            shadow_sigma=_require(channel_raw, "channel.shadow_sigma_dbm", "shadow_sigma_dbm", float, 2.0),
            multipath_sigma=_require(
                channel_raw, "channel.multipath_sigma_dbm", "multipath_sigma_dbm", float, 2.0
            ),
        )
    except ValueError as exc:
        raise ConfigInvalid("channel", str(exc)) from exc

    gp_raw = raw.get("gp") or {}
    _check_known_keys(gp_raw, {"initial_samples", "max_training_points", "restarts", "retrain_every"}, "gp")
    gp = GpConfig(
        initial_samples=_require(gp_raw, "gp.initial_samples", "initial_samples", int, 10),
        max_training_points=_require(gp_raw, "gp.max_training_points", "max_training_points", int, 100),
        restarts=_require(gp_raw, "gp.restarts", "restarts", int, 5),
        retrain_every=_require(gp_raw, "gp.retrain_every", "retrain_every", int, 10),
    )

    hier_raw = raw.get("hierarchy") or {}
    _check_known_keys(hier_raw, {"levels", "resolutions_m", "grid_points"}, "hierarchy")
    resolutions = hier_raw.get("resolutions_m", [0.1, 0.05, 0.025, 0.0125])
    if not isinstance(resolutions, (list, tuple)) or not resolutions:
        raise ConfigInvalid("hierarchy.resolutions_m", "expected a non-empty list")
    levels = _require(hier_raw, "hierarchy.levels", "levels", int, len(resolutions))
    if levels != len(resolutions):
        raise ConfigInvalid("hierarchy.levels", f"must equal len(resolutions_m) = {len(resolutions)}")
    try:
        hierarchy = HierarchyConfig(
            resolutions=tuple(float(r) for r in resolutions),
            grid_points=_require(hier_raw, "hierarchy.grid_points", "grid_points", int, 30),
        )
    except ValueError as exc:
        raise ConfigInvalid("hierarchy.resolutions_m", str(exc)) from exc

    run_raw = raw.get("run") or {}
    _check_known_keys(run_raw, {"iterations", "trials"}, "run")
    run = RunConfig(
        iterations=_require(run_raw, "run.iterations", "iterations", int, 300),
        trials=_require(run_raw, "run.trials", "trials", int, 10),
    )

    controller_raw = raw.get("controller") or {}
    _check_known_keys(
        controller_raw, {"type", "v_max", "omega_max", "rendezvous_epsilon_m"}, "controller"
    )
    controller = ControllerConfig(
        type=_require(controller_raw, "controller.type", "type", str, "walk"),
        v_max=_require(controller_raw, "controller.v_max", "v_max", float, 0.2),
        omega_max=_require(controller_raw, "controller.omega_max", "omega_max", float, 2.0),
        rendezvous_epsilon_m=_require(
            controller_raw, "controller.rendezvous_epsilon_m", "rendezvous_epsilon_m", float, 0.2
        ),
    )

    try:
        world = WorldConfig(
            width=width, height=height, ap_position=(float(ap[0]), float(ap[1])),
            robots=tuple(robots), seed=seed,
        )
    except ValueError as exc:
        raise ConfigInvalid("world", str(exc)) from exc

    return SimConfig(
        world=world,
        channel=channel,
        gp=gp,
        hierarchy=hierarchy,
        run=run,
        controller=controller,
        robot_count=len(robots) if robots else 3,
    )


def load_config(path) -> SimConfig:
    """Load a YAML (or JSON) config file."""
    with open(path) as handle:
        try:
            raw = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigInvalid("<file>", f"unparseable config: {exc}") from exc
    return config_from_dict(raw or {})


def apply_overrides(
    config: SimConfig,
    seed: int | None = None,
    robots: int | None = None,
    world_size: tuple[float, float] | None = None,
    trials: int | None = None,
    iterations: int | None = None,
    controller_type: str | None = None,
) -> SimConfig:
    """CLI flag overrides; explicit robot starts are dropped whenever the
    robot count or world size changes."""
    world = config.world
    robot_count = config.robot_count
    starts = world.robots
    if world_size is not None:
        width, height = world_size
        starts = ()
        world = WorldConfig(
            width=width, height=height, ap_position=(width / 2.0, height / 2.0),
            robots=starts, seed=world.seed,
        )
    if robots is not None:
        robot_count = robots
        starts = ()
        world = WorldConfig(
            width=world.width, height=world.height, ap_position=world.ap_position,
            robots=starts, seed=world.seed,
        )
    if seed is not None:
        world = WorldConfig(
            width=world.width, height=world.height, ap_position=world.ap_position,
            robots=world.robots, seed=seed,
        )
    run = config.run
    if trials is not None or iterations is not None:
        run = RunConfig(
            iterations=iterations if iterations is not None else run.iterations,
            trials=trials if trials is not None else run.trials,
        )
    controller = config.controller
    if controller_type is not None:
        controller = replace(controller, type=controller_type)
    return SimConfig(
        world=world,
        channel=config.channel,
        gp=config.gp,
        hierarchy=config.hierarchy,
        run=run,
        controller=controller,
        robot_count=robot_count,
    )
