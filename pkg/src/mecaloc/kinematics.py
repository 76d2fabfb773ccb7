"""Four-mecanum-wheel kinematics: wheel rates <-> body twist, encoder ticks.

Wheel numbering is fixed as 1=front-left, 2=front-right, 3=rear-left,
4=rear-right.  With that ordering the body twist follows from the wheel
rates as

    vx    = (r/4) * ( w1 + w2 + w3 + w4)
    vy    = (r/4) * (-w1 + w2 + w3 - w4)
    omega = (r/4) * (-w1 + w2 - w3 + w4) / (half_wheelbase + half_track)

so that uniform positive wheel speed drives the robot forward (+x), and
positive vy / omega are left / anticlockwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class WheelSpeeds(NamedTuple):
    """Angular rates of the four wheels, rad/s."""

    front_left: float
    front_right: float
    rear_left: float
    rear_right: float


class BodyTwist(NamedTuple):
    """Body-frame velocities: vx forward (m/s), vy left (m/s), omega anticlockwise (rad/s)."""

    vx: float
    vy: float
    omega: float


@dataclass(frozen=True)
class MecanumGeometry:
    """Physical layout of the wheel base.

    Attributes:
        wheel_radius: mecanum wheel radius, meters.
        half_wheelbase: half the front-to-rear wheel distance, meters.
        half_track: half the right-to-left wheel distance, meters.
    """

    wheel_radius: float = 0.046875
    half_wheelbase: float = 0.135
    half_track: float = 0.125

    def __post_init__(self) -> None:
        for name in ("wheel_radius", "half_wheelbase", "half_track"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def lever_arm(self) -> float:
        """Sum half_wheelbase + half_track appearing in the rotation rows."""
        return self.half_wheelbase + self.half_track


@dataclass(frozen=True)
class EncoderTicks:
    """Signed tick counts of the four wheel encoders over one sample interval."""

    counts: tuple[int, int, int, int]
    dt: float
    ppr: int = 1700

    def __post_init__(self) -> None:
        if len(self.counts) != 4:
            raise ValueError("counts must hold exactly four values")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be finite and > 0, got {self.dt!r}")
        if self.ppr <= 0:
            raise ValueError(f"ppr must be > 0, got {self.ppr!r}")


def _require_finite(values, label: str) -> None:
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{label} must be finite, got {tuple(values)!r}")


def body_from_wheel_matrix(geometry: MecanumGeometry) -> np.ndarray:
    """3x4 matrix mapping wheel rates to body twist (includes the r/4 factor)."""
    r4 = geometry.wheel_radius / 4.0
    inv_k = 1.0 / geometry.lever_arm
    return r4 * np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0, -1.0],
            [-inv_k, inv_k, -inv_k, inv_k],
        ]
    )


def wheel_from_body_matrix(geometry: MecanumGeometry) -> np.ndarray:
    """4x3 right-inverse of :func:`body_from_wheel_matrix`."""
    inv_r = 1.0 / geometry.wheel_radius
    k = geometry.lever_arm
    return inv_r * np.array(
        [
            [1.0, -1.0, -k],
            [1.0, 1.0, k],
            [1.0, 1.0, -k],
            [1.0, -1.0, k],
        ]
    )


def forward_kinematics(speeds: WheelSpeeds, geometry: MecanumGeometry) -> BodyTwist:
    """Compute the body twist produced by the given wheel rates.

    Args:
        speeds: wheel angular rates, rad/s.
        geometry: wheel base layout.

    Returns:
        Body twist (vx, vy, omega).
    """
    _require_finite(speeds, "wheel speeds")
    w1, w2, w3, w4 = speeds
    r4 = geometry.wheel_radius / 4.0
    vx = r4 * (w1 + w2 + w3 + w4)
    vy = r4 * (-w1 + w2 + w3 - w4)
    omega = r4 * (-w1 + w2 - w3 + w4) / geometry.lever_arm
    return BodyTwist(vx, vy, omega)


def inverse_kinematics(twist: BodyTwist, geometry: MecanumGeometry) -> WheelSpeeds:
    """Compute wheel rates realizing the given body twist.

    Every planar twist is achievable by a mecanum base, and this is the
    right-inverse of :func:`forward_kinematics`: FK(IK(t)) == t.
    """
    _require_finite(twist, "twist")
    vx, vy, omega = twist
    inv_r = 1.0 / geometry.wheel_radius
    k_omega = geometry.lever_arm * omega
    return WheelSpeeds(
        inv_r * (vx - vy - k_omega),
        inv_r * (vx + vy + k_omega),
        inv_r * (vx + vy - k_omega),
        inv_r * (vx - vy + k_omega),
    )


def ticks_to_wheel_speeds(ticks: EncoderTicks) -> WheelSpeeds:
    """Mean wheel rates over the sample interval: w_i = 2*pi*counts_i / (ppr*dt)."""
    scale = 2.0 * math.pi / (ticks.ppr * ticks.dt)
    c1, c2, c3, c4 = ticks.counts
    return WheelSpeeds(c1 * scale, c2 * scale, c3 * scale, c4 * scale)
