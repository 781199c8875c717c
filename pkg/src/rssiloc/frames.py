"""Planar frames, the peer wire format, and AP-anchored neighbor positioning.

Each robot's frame is pinned at its initial world pose. Because every
robot locates the same physical access point in its own frame, the
vector from a robot to the AP is frame-invariant up to rotation, which
is what lets a received (odometry, AP estimate) pair be re-anchored at
the local AP estimate.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .search import ApEstimate

# Fixed little-endian layout: sender u16, seq u32, odometry x/y/theta
# f64, AP estimate x/y f64, AP variance f64.
_WIRE = struct.Struct("<HI6d")
MESSAGE_SIZE_BYTES = _WIRE.size  # 54


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose2D:
    """Planar position (m) plus heading (rad, normalized) in a named frame."""

    x: float
    y: float
    heading: float
    frame: str = "world"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.heading)):
            raise ValueError("pose must be finite")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_between(source_heading: float, target_heading: float) -> np.ndarray:
    """Rotation taking vectors from the source frame into the target frame.

    Frames are identified by the world heading of their x-axis;
    the result is ``Rot(source_heading - target_heading)``, orthonormal
    with determinant +1.
    """
    return rotation_matrix(source_heading - target_heading)


def world_to_local(pose: Pose2D, origin: Pose2D, frame: str) -> Pose2D:
    """Express a world pose in the frame anchored at ``origin``."""
    delta = rotation_matrix(-origin.heading) @ (pose.xy - origin.xy)
    return Pose2D(delta[0], delta[1], pose.heading - origin.heading, frame=frame)


def local_to_world(pose: Pose2D, origin: Pose2D) -> Pose2D:
    """Inverse of :func:`world_to_local`."""
    world = rotation_matrix(origin.heading) @ pose.xy + origin.xy
    return Pose2D(world[0], world[1], pose.heading + origin.heading, frame=origin.frame)


def point_world_to_local(point, origin: Pose2D) -> np.ndarray:
    return rotation_matrix(-origin.heading) @ (np.asarray(point, dtype=float) - origin.xy)


def point_local_to_world(point, origin: Pose2D) -> np.ndarray:
    return rotation_matrix(origin.heading) @ np.asarray(point, dtype=float) + origin.xy


@dataclass(frozen=True)
class PeerMessage:
    """The fixed-size datum a robot broadcasts each iteration: its
    odometry pose and AP estimate, both in its own frame."""

    sender: int
    seq: int
    odometry: Pose2D
    ap_estimate: ApEstimate

    def __post_init__(self):
        if self.sender < 0 or self.sender > 0xFFFF:
            raise ValueError("sender id must fit u16")
        if self.ap_estimate.variance < 0.0:
            raise ValueError("AP estimate variance must be >= 0")


def pack_message(msg: PeerMessage) -> bytes:
    """Serialize to the fixed 54-byte wire form."""
    return _WIRE.pack(
        msg.sender,
        msg.seq & 0xFFFFFFFF,
        msg.odometry.x,
        msg.odometry.y,
        msg.odometry.heading,
        float(msg.ap_estimate.position[0]),
        float(msg.ap_estimate.position[1]),
        msg.ap_estimate.variance,
    )


def unpack_message(data: bytes) -> PeerMessage:
    """Inverse of :func:`pack_message`; the level trace is not carried."""
    sender, seq, ox, oy, oh, ax, ay, avar = _WIRE.unpack(data)
    frame = f"robot{sender}"
    return PeerMessage(
        sender=sender,
        seq=seq,
        odometry=Pose2D(ox, oy, oh, frame=frame),
        ap_estimate=ApEstimate(position=np.array([ax, ay]), variance=avar),
    )


@dataclass(frozen=True, eq=False)
class NeighborEstimate:
    """A peer's position mapped into the local frame.

    ``combined_variance`` adds both AP-estimate variances (an
    independent-error diagnostic, not a calibrated covariance);
    ``stale`` flags estimates older than the configured message age.
    """

    neighbor: int
    position: np.ndarray  # (2,), local frame, m
    combined_variance: float
    age: int = 0
    stale: bool = False

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(2)
        if not np.all(np.isfinite(pos)):
            raise ValueError("neighbor position must be finite")
        pos.flags.writeable = False
        object.__setattr__(self, "position", pos)


def relative_position(
    ap_local: ApEstimate,
    msg: PeerMessage,
    rotation: np.ndarray,
    age: int = 0,
    max_age: int | None = None,
) -> NeighborEstimate:
    """Re-anchor a peer's AP-relative pose at the local AP estimate.

    ``rotation`` must map sender-frame vectors into the local frame.
    Estimates older than ``max_age`` iterations are still returned but
    flagged stale.
    """
    offset = rotation @ (msg.odometry.xy - msg.ap_estimate.position)
    position = np.asarray(ap_local.position) + offset
    stale = max_age is not None and age > max_age
    return NeighborEstimate(
        neighbor=msg.sender,
        position=position,
        combined_variance=ap_local.variance + msg.ap_estimate.variance,
        age=age,
        stale=stale,
    )
