"""Mobile-robot localization toolkit: mecanum odometry, ultrasound beacon
positioning, and EKF fusion, with a seeded square-loop experiment harness.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .ekf import (
    FilterState,
    MeasurementNoise,
    PositionFix,
    ProcessNoise,
    TwistSample,
    predict,
    run_filter,
    update_position,
)
from .kinematics import (
    BodyTwist,
    EncoderTicks,
    MecanumGeometry,
    WheelSpeeds,
    forward_kinematics,
    inverse_kinematics,
    ticks_to_wheel_speeds,
)
from .odometry import Pose2D, accumulate, integrate_pose, normalize_angle

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "BodyTwist",
    "EncoderTicks",
    "FilterState",
    "MeasurementNoise",
    "MecanumGeometry",
    "Pose2D",
    "PositionFix",
    "ProcessNoise",
    "TwistSample",
    "WheelSpeeds",
    "accumulate",
    "forward_kinematics",
    "integrate_pose",
    "inverse_kinematics",
    "normalize_angle",
    "predict",
    "run_filter",
    "ticks_to_wheel_speeds",
    "update_position",
]
