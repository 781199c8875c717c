"""Ground-truth world: log-distance RSSI channel, unicycle kinematics,
workspace bounds, and per-robot seeded randomness.

All stochastic draws come from named substreams derived from the world
seed and robot id, so adding robots or re-running with the same seed
never perturbs existing streams.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np

from .frames import Pose2D, point_world_to_local, world_to_local, wrap_angle

DT_DEFAULT = 0.2  # s of motion between samples (compute budget is 33 ms)

# Substream tags (arbitrary distinct constants).
_STREAM_CHANNEL = 0x5157
_STREAM_CONTROL = 0xC0DE
_STREAM_FIT = 0xF17


class GroundTruthAccess(RuntimeError):
    """Ground truth was read while an agent was executing."""


@dataclass(frozen=True)
class ChannelParams:
    """Log-distance path-loss constants with Gaussian shadowing and
    multipath terms (dBm)."""

    rssi_d0: float = -20.0
    path_loss_exponent: float = 3.0
    shadow_sigma: float = 2.0
    multipath_sigma: float = 2.0
    min_distance: float = 0.01

    def __post_init__(self):
        if self.path_loss_exponent <= 0.0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.shadow_sigma < 0.0 or self.multipath_sigma < 0.0:
            raise ValueError("noise sigmas must be >= 0")
        if self.min_distance <= 0.0:
            raise ValueError("min_distance must be > 0")


def mean_rssi(channel: ChannelParams, distance: float) -> float:
    """Noise-free RSSI at a given distance (m) from the transmitter."""
    d = max(distance, channel.min_distance)
    return channel.rssi_d0 - 10.0 * channel.path_loss_exponent * math.log10(d)


def sample_rssi(world: "World", robot_id: int, rng: np.random.Generator | None = None) -> float:
    """Draw one noisy RSSI reading for a robot at its true position.

    Exactly two standard-normal variates are consumed from the robot's
    channel stream (or the provided ``rng``) regardless of the sigmas,
    so noise sweeps stay sample-aligned across levels.
    """
    stream = rng if rng is not None else world.channel_stream(robot_id)
    pose = world._true_pose_unaudited(robot_id)
    distance = math.hypot(pose.x - world.config.ap_position[0], pose.y - world.config.ap_position[1])
    shadow = stream.standard_normal()
    multipath = stream.standard_normal()
    return (
        mean_rssi(world.channel, distance)
        - world.channel.shadow_sigma * shadow
        - world.channel.multipath_sigma * multipath
    )


@dataclass(frozen=True)
class RobotInit:
    robot_id: int
    start: Pose2D


@dataclass(frozen=True)
class WorldConfig:
    """Workspace rectangle ([0,w] x [0,h]), AP position, robot starts, seed."""

    width: float
    height: float
    ap_position: tuple[float, float]
    robots: tuple[RobotInit, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ap_position", (float(self.ap_position[0]), float(self.ap_position[1])))
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError("workspace must have positive extent")
        ax, ay = self.ap_position
        if not (0.0 <= ax <= self.width and 0.0 <= ay <= self.height):
            raise ValueError("AP must lie inside the workspace")
        ids = [r.robot_id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise ValueError("robot ids must be unique")
        for r in self.robots:
            if not (0.0 <= r.start.x <= self.width and 0.0 <= r.start.y <= self.height):
                raise ValueError(f"robot {r.robot_id} starts outside the workspace")


@dataclass(frozen=True)
class UnicycleState:
    """World pose plus the commanded twist, clamped to the limits."""

    pose: Pose2D
    v: float = 0.0
    omega: float = 0.0
    v_max: float = 0.2
    omega_max: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "v", float(np.clip(self.v, -self.v_max, self.v_max)))
        object.__setattr__(self, "omega", float(np.clip(self.omega, -self.omega_max, self.omega_max)))


def step_unicycle(state: UnicycleState, dt: float, bounds: tuple[float, float] | None = None) -> UnicycleState:
    """Forward-Euler unicycle step; hitting a wall clamps the pose and
    zeroes the translational velocity (virtual limits)."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    x = state.pose.x + state.v * math.cos(state.pose.heading) * dt
    y = state.pose.y + state.v * math.sin(state.pose.heading) * dt
    heading = wrap_angle(state.pose.heading + state.omega * dt)
    v = state.v
    if bounds is not None:
        cx = min(max(x, 0.0), bounds[0])
        cy = min(max(y, 0.0), bounds[1])
        if cx != x or cy != y:
            v = 0.0
        x, y = cx, cy
    return replace(state, pose=Pose2D(x, y, heading, frame=state.pose.frame), v=v, omega=state.omega)


def si_to_unicycle(
    desired_velocity,
    pose: Pose2D,
    v_max: float = 0.2,
    omega_max: float = 2.0,
    k_omega: float = 2.0,
) -> tuple[float, float]:
    """Map a single-integrator velocity to (v, omega).

    Forward speed is the velocity magnitude projected on the heading and
    clamped at zero (no reversing); the turn rate is proportional to the
    heading error.
    """
    u = np.asarray(desired_velocity, dtype=float)
    speed = float(np.linalg.norm(u))
    if speed == 0.0:
        return 0.0, 0.0
    delta = wrap_angle(math.atan2(u[1], u[0]) - pose.heading)
    v = float(np.clip(speed * math.cos(delta), 0.0, v_max))
    omega = float(np.clip(k_omega * delta, -omega_max, omega_max))
    return v, omega


class RandomWalkController:
    """Seeded bounded random twist, held for ``hold`` steps, that turns
    toward the workspace interior near the walls.

    With probability ``center_bias`` a resample starts an interior
    traverse: the walk steers toward a jittered point near the workspace
    middle until it gets there, then resumes random twists. Exploration
    therefore keeps crossing the interior from diverse directions in any
    workspace size instead of orbiting near the walls.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        v_max: float = 0.2,
        omega_max: float = 2.0,
        hold: int = 20,
        margin: float = 0.3,
        v_frac: tuple[float, float] = (0.7, 1.0),
        omega_frac: float = 0.15,
        center_bias: float = 0.6,
    ):
        self.rng = rng
        self.v_max = v_max
        self.omega_max = omega_max
        self.hold = hold
        self.margin = margin
        self.v_frac = v_frac
        self.omega_frac = omega_frac
        self.center_bias = center_bias
        self._countdown = 0
        self._twist = (0.0, 0.0)
        self._goal: tuple[float, float] | None = None

    def __call__(self, pose: Pose2D, bounds: tuple[float, float]) -> tuple[float, float]:
        width, height = bounds
        margin = min(self.margin, 0.45 * min(width, height))
        near_wall = (
            pose.x < margin
            or pose.y < margin
            or pose.x > width - margin
            or pose.y > height - margin
        )
        if near_wall:
            inward = math.atan2(height / 2.0 - pose.y, width / 2.0 - pose.x)
            delta = wrap_angle(inward - pose.heading)
            if abs(delta) > math.pi / 4.0:
                # Facing out: turn inward without consuming random draws.
                self._countdown = 0
                omega = float(np.clip(2.0 * delta, -self.omega_max, self.omega_max))
                return 0.5 * self.v_max, omega
        if self._goal is not None:
            gx, gy = self._goal
            if math.hypot(gx - pose.x, gy - pose.y) > 0.3:
                toward = math.atan2(gy - pose.y, gx - pose.x)
                delta = wrap_angle(toward - pose.heading)
                omega = float(np.clip(2.0 * delta, -self.omega_max, self.omega_max))
                return self.v_max, omega
            self._goal = None
            self._countdown = 0
        if self._countdown <= 0:
            if self.rng.random() < self.center_bias:
                jitter = 0.15 * min(width, height)
                self._goal = (
                    width / 2.0 + float(self.rng.uniform(-jitter, jitter)),
                    height / 2.0 + float(self.rng.uniform(-jitter, jitter)),
                )
            self._twist = (
                float(self.rng.uniform(*self.v_frac) * self.v_max),
                float(self.rng.uniform(-self.omega_frac, self.omega_frac) * self.omega_max),
            )
            self._countdown = self.hold
        self._countdown -= 1
        return self._twist


class World:
    """Single ground-truth authority for one trial.

    Agents never hold a reference to this object; the harness hands them
    local observations only. Ground-truth reads made while an agent is
    executing (inside :meth:`agent_guard`) raise
    :class:`GroundTruthAccess`.
    """

    def __init__(self, config: WorldConfig, channel: ChannelParams = ChannelParams(),
                 v_max: float = 0.2, omega_max: float = 2.0):
        self.config = config
        self.channel = channel
        self._states: dict[int, UnicycleState] = {}
        self._initial: dict[int, Pose2D] = {}
        self._channel_rng: dict[int, np.random.Generator] = {}
        self._control_rng: dict[int, np.random.Generator] = {}
        self._in_agent = False
        for robot in config.robots:
            pose = Pose2D(robot.start.x, robot.start.y, robot.start.heading, frame="world")
            self._states[robot.robot_id] = UnicycleState(pose=pose, v_max=v_max, omega_max=omega_max)
            self._initial[robot.robot_id] = pose
            self._channel_rng[robot.robot_id] = self._stream(robot.robot_id, _STREAM_CHANNEL)
            self._control_rng[robot.robot_id] = self._stream(robot.robot_id, _STREAM_CONTROL)

    def _stream(self, robot_id: int, tag: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.config.seed, robot_id, tag]))

    @property
    def robot_ids(self) -> list[int]:
        return sorted(self._states)

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.config.width, self.config.height)

    def channel_stream(self, robot_id: int) -> np.random.Generator:
        return self._channel_rng[robot_id]

    def control_stream(self, robot_id: int) -> np.random.Generator:
        return self._control_rng[robot_id]

    def fit_seed(self, robot_id: int) -> int:
        return int(np.random.SeedSequence([self.config.seed, robot_id, _STREAM_FIT]).generate_state(1)[0])

    @contextmanager
    def agent_guard(self):
        """Marks an agent-execution section; truth reads inside raise."""
        self._in_agent = True
        try:
            yield
        finally:
            self._in_agent = False

    def _true_pose_unaudited(self, robot_id: int) -> Pose2D:
        return self._states[robot_id].pose

    def true_pose(self, robot_id: int) -> Pose2D:
        if self._in_agent:
            raise GroundTruthAccess("agents must not read ground-truth poses")
        return self._states[robot_id].pose

    def true_ap(self) -> np.ndarray:
        if self._in_agent:
            raise GroundTruthAccess("agents must not read the ground-truth AP position")
        return np.asarray(self.config.ap_position)

    def initial_pose(self, robot_id: int) -> Pose2D:
        return self._initial[robot_id]

    def local_odometry(self, robot_id: int) -> Pose2D:
        """Robot pose in its own frame (anchored at the initial pose)."""
        return world_to_local(
            self._states[robot_id].pose, self._initial[robot_id], frame=f"robot{robot_id}"
        )

    def true_ap_local(self, robot_id: int) -> np.ndarray:
        """Ground-truth AP position in a robot's frame (metrics only)."""
        if self._in_agent:
            raise GroundTruthAccess("agents must not read the ground-truth AP position")
        return point_world_to_local(self.config.ap_position, self._initial[robot_id])

    def true_relative_position(self, observer_id: int, target_id: int) -> np.ndarray:
        """Target's true position in the observer's frame (metrics only)."""
        if self._in_agent:
            raise GroundTruthAccess("agents must not read ground-truth poses")
        target = self._states[target_id].pose
        return point_world_to_local((target.x, target.y), self._initial[observer_id])

    def apply_command(self, robot_id: int, v: float, omega: float, dt: float = DT_DEFAULT):
        state = self._states[robot_id]
        commanded = replace(state, v=v, omega=omega)
        self._states[robot_id] = step_unicycle(commanded, dt, bounds=self.bounds)
