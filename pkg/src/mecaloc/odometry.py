"""Dead-reckoning pose integration from body-frame twists.

One Euler step rotates the body twist into the world frame and advances
the pose; heading is wrapped to (-pi, pi] after every step so downstream
trigonometry always sees a bounded angle.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels
from .kinematics import BodyTwist


class Pose2D(NamedTuple):
    """Planar pose: position in meters, heading in radians, world frame."""

    x: float
    y: float
    theta: float


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return theta - 2.0 * math.pi * math.ceil((theta - math.pi) / (2.0 * math.pi))


def integrate_pose(pose: Pose2D, twist: BodyTwist, dt: float) -> Pose2D:
    """Advance a pose by one Euler step of the dead-reckoning model.

        x' = x + dt * (vx*cos(theta) - vy*sin(theta))
        y' = y + dt * (vx*sin(theta) + vy*cos(theta))
        theta' = wrap(theta + dt*omega)

    Args:
        pose: current pose.
        twist: body-frame velocities held over the step.
        dt: step duration, seconds; must be > 0.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    if not all(math.isfinite(v) for v in (*pose, *twist)):
        raise ValueError("pose and twist must be finite")
    x, y, theta = pose
    vx, vy, omega = twist
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    return Pose2D(
        x + dt * (vx * cos_t - vy * sin_t),
        y + dt * (vx * sin_t + vy * cos_t),
        normalize_angle(theta + dt * omega),
    )


def accumulate(start: Pose2D, steps: Iterable[tuple[BodyTwist, float]]) -> list[Pose2D]:
    """Fold :func:`integrate_pose` over a sequence of (twist, dt) steps.

    Returns one pose per input step; an empty input yields an empty list.
    """
    steps = list(steps)
    if not steps:
        return []
    n = len(steps)
    twists = np.empty((n, 3))
    dts = np.empty(n)
    for i, (twist, dt) in enumerate(steps):
        if not (math.isfinite(dt) and dt > 0.0):
            raise ValueError(f"step {i}: dt must be finite and > 0, got {dt!r}")
        twists[i] = twist
        dts[i] = dt
    out = np.empty((n, 3))
    _kernels.accumulate_poses(start.x, start.y, start.theta, twists, dts, out)
    return [Pose2D(*row) for row in out]
