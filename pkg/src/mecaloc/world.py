"""Square-loop experiment world: planned trajectory, slip, noisy sensors.

The commanded trajectory is the four-leg square loop driven at constant
heading: forward (+x), slide right (-y), backward (-x), slide left (+y),
repeated for a number of laps.  Wheel slip and encoder quantization
corrupt what the odometry reports, while the robot's true motion follows
the slipped wheel rates; the true path is integrated on a finer substep
grid so the comparison baseline carries no integration error of its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from . import ips as ips_module
from .ekf import PositionFix, TwistSample
from .kinematics import (
    BodyTwist,
    EncoderTicks,
    MecanumGeometry,
    body_from_wheel_matrix,
    wheel_from_body_matrix,
)
from .odometry import Pose2D

DEFAULT_PPR = 1700
DEFAULT_SAMPLE_RATE_HZ = 50.0
TRUTH_SUBSTEPS = 10

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TrajectoryPlan:
    """Square-loop drive plan: geometry of the loop and command timing."""

    side_length: float = 3.0
    cruise_speed: float = 0.5
    sample_dt: float = 1.0 / DEFAULT_SAMPLE_RATE_HZ
    laps: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.side_length) and self.side_length > 0.0):
            raise ValueError(f"side_length must be > 0, got {self.side_length!r}")
        if not (math.isfinite(self.cruise_speed) and self.cruise_speed > 0.0):
            raise ValueError(f"cruise_speed must be > 0, got {self.cruise_speed!r}")
        if not (math.isfinite(self.sample_dt) and self.sample_dt > 0.0):
            raise ValueError(f"sample_dt must be > 0, got {self.sample_dt!r}")
        if self.laps < 1:
            raise ValueError(f"laps must be >= 1, got {self.laps!r}")
        steps = self.leg_duration / self.sample_dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(
                f"sample_dt {self.sample_dt!r} must divide the leg duration "
                f"{self.leg_duration!r} evenly"
            )

    @property
    def leg_duration(self) -> float:
        return self.side_length / self.cruise_speed

    @property
    def steps_per_leg(self) -> int:
        return round(self.leg_duration / self.sample_dt)

    @property
    def step_count(self) -> int:
        return 4 * self.steps_per_leg * self.laps


@dataclass(frozen=True)
class SlipModel:
    """Per-wheel multiplicative slip plus per-step jitter.

    `mode` selects which side of the discrepancy the encoder sees:
    under_report means the encoder reports the commanded rates while the
    robot actually moves by the slipped rates; over_report means the
    wheel (and encoder) spins by the slipped rates while the robot only
    achieves the commanded motion.
    """

    factors: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    jitter_std: float = 0.0
    mode: str = "under_report"

    def __post_init__(self) -> None:
        if len(self.factors) != 4:
            raise ValueError("factors must hold exactly four values")
        if not all(math.isfinite(f) and f > 0.0 for f in self.factors):
            raise ValueError(f"slip factors must be > 0, got {self.factors!r}")
        if not (math.isfinite(self.jitter_std) and self.jitter_std >= 0.0):
            raise ValueError(f"jitter_std must be >= 0, got {self.jitter_std!r}")
        if self.mode not in ("under_report", "over_report"):
            raise ValueError(f"mode must be under_report or over_report, got {self.mode!r}")


@dataclass(frozen=True)
class OdometrySensor:
    """How reported twists are produced from the commanded motion.

    encoder: the full tick pipeline (slip, jitter, quantization).
    gaussian: reported twist = actual twist + N(0, diag(twist_sigma^2));
        bypasses slip and ticks so the odometry noise is exactly Gaussian
        with a known covariance (matched-noise filter experiments).
    """

    mode: str = "encoder"
    ppr: int = DEFAULT_PPR
    twist_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.mode not in ("encoder", "gaussian"):
            raise ValueError(f"mode must be encoder or gaussian, got {self.mode!r}")
        if self.ppr <= 0:
            raise ValueError(f"ppr must be > 0, got {self.ppr!r}")
        if not all(math.isfinite(s) and s >= 0.0 for s in self.twist_sigma):
            raise ValueError(f"twist_sigma must be >= 0, got {self.twist_sigma!r}")


@dataclass(frozen=True)
class TruthPath:
    """True trajectory on the fine integration grid."""

    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    thetas: np.ndarray

    def pose_at(self, t: float) -> Pose2D:
        return Pose2D(
            float(np.interp(t, self.times, self.xs)),
            float(np.interp(t, self.times, self.ys)),
            float(np.interp(t, self.times, self.thetas)),
        )

    def final_pose(self) -> Pose2D:
        return Pose2D(float(self.xs[-1]), float(self.ys[-1]), float(self.thetas[-1]))


def _planned_arrays(plan: TrajectoryPlan) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (times, commanded twists, ideal poses), each with N+1 rows.

    The twist in row k is commanded over [t_k, t_{k+1}); the final row
    carries a zero twist.  Heading stays 0 throughout.
    """
    v = plan.cruise_speed
    leg_twists = [(v, 0.0, 0.0), (0.0, -v, 0.0), (-v, 0.0, 0.0), (0.0, v, 0.0)]
    n = plan.step_count
    spl = plan.steps_per_leg
    twists = np.zeros((n + 1, 3))
    for leg in range(4 * plan.laps):
        twists[leg * spl : (leg + 1) * spl] = leg_twists[leg % 4]
    times = np.arange(n + 1) * plan.sample_dt
    poses = np.zeros((n + 1, 3))
    poses[1:, 0] = np.cumsum(twists[:-1, 0] * plan.sample_dt)
    poses[1:, 1] = np.cumsum(twists[:-1, 1] * plan.sample_dt)
    return times, twists, poses


def generate_square_trajectory(plan: TrajectoryPlan) -> list[tuple[float, BodyTwist, Pose2D]]:
    """The commanded square loop as (time, commanded twist, ideal pose) rows.

    The ideal pose integrates the commanded twists at the sample step;
    with exact commands the loop closes back on the start pose.
    """
    times, twists, poses = _planned_arrays(plan)
    return [
        (float(t), BodyTwist(*tw), Pose2D(*pose))
        for t, tw, pose in zip(times, twists, poses)
    ]


def _encoder_batch(
    commanded: np.ndarray,
    geometry: MecanumGeometry,
    slip: SlipModel,
    ppr: int,
    dt: float,
    jitter: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized tick pipeline over (n, 3) commanded twists.

    Returns (ticks (n,4) int64, reported twists (n,3), actual twists (n,3)).
    """
    to_wheels = wheel_from_body_matrix(geometry)
    to_body = body_from_wheel_matrix(geometry)
    wheels_cmd = commanded @ to_wheels.T
    factors = np.asarray(slip.factors) + jitter
    if slip.mode == "under_report":
        rotated = wheels_cmd
        effective = wheels_cmd * factors
    else:
        rotated = wheels_cmd * factors
        effective = wheels_cmd
    ticks = np.rint(rotated * (dt * ppr / TWO_PI)).astype(np.int64)
    reported_wheels = ticks * (TWO_PI / (ppr * dt))
    return ticks, reported_wheels @ to_body.T, effective @ to_body.T


def simulate_encoders(
    commanded: BodyTwist,
    geometry: MecanumGeometry,
    slip: SlipModel,
    ppr: int,
    dt: float,
    rng: np.random.Generator,
) -> tuple[EncoderTicks, BodyTwist]:
    """Simulate one encoder sample interval under the slip model.

    Returns the tick counts the encoders would report and the body twist
    the robot actually executed during the interval.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    if ppr <= 0:
        raise ValueError(f"ppr must be > 0, got {ppr!r}")
    jitter = rng.normal(size=(1, 4)) * slip.jitter_std
    ticks, _, actual = _encoder_batch(
        np.asarray(commanded, dtype=float).reshape(1, 3), geometry, slip, ppr, dt, jitter
    )
    counts = tuple(int(c) for c in ticks[0])
    return EncoderTicks(counts, dt, ppr), BodyTwist(*actual[0])


@dataclass(frozen=True)
class ExperimentTrace:
    """Everything one seeded run produced, time-ordered and replayable."""

    plan: TrajectoryPlan
    geometry: MecanumGeometry
    sample_times: np.ndarray
    commanded: np.ndarray
    planned_poses: np.ndarray
    reported_twists: np.ndarray
    actual_twists: np.ndarray
    ticks: Optional[np.ndarray]
    truth: TruthPath
    fixes: list[PositionFix]
    seed: int

    @property
    def twist_samples(self) -> list[TwistSample]:
        """Odometry samples: the twist measured over each elapsed interval."""
        return [
            TwistSample(BodyTwist(*tw), float(t))
            for t, tw in zip(self.sample_times[1:], self.reported_twists)
        ]

    @property
    def events(self) -> list:
        """Merged sensor stream: a zero-twist event at t0, then everything.

        Ties are ordered twist before fix so a fix landing exactly on a
        sample time updates the freshly predicted state.
        """
        genesis = TwistSample(BodyTwist(0.0, 0.0, 0.0), float(self.sample_times[0]))
        tagged = [(s.timestamp, 0, s) for s in self.twist_samples]
        tagged += [(f.timestamp, 1, f) for f in self.fixes]
        tagged.sort(key=lambda item: (item[0], item[1]))
        return [genesis] + [item[2] for item in tagged]


def run_world(
    plan: TrajectoryPlan,
    geometry: MecanumGeometry,
    slip: SlipModel,
    ips_config: Optional[ips_module.IpsConfig],
    seed: int,
    odometry: OdometrySensor = OdometrySensor(),
    substeps: int = TRUTH_SUBSTEPS,
) -> ExperimentTrace:
    """Run one seeded experiment and collect its sensor streams.

    Randomness order: odometry noise first (jitter or Gaussian twist
    noise), then the fix stream's draws.  The trace is a pure function
    of the arguments.
    """
    rng = np.random.default_rng(seed)
    times, commanded, planned = _planned_arrays(plan)
    n = plan.step_count
    dt = plan.sample_dt

    if odometry.mode == "encoder":
        jitter = rng.normal(size=(n, 4)) * slip.jitter_std
        ticks, reported, actual = _encoder_batch(
            commanded[:n], geometry, slip, odometry.ppr, dt, jitter
        )
    else:
        actual = commanded[:n].copy()
        reported = actual + rng.normal(size=(n, 3)) * np.asarray(odometry.twist_sigma)
        ticks = None

    sub_dt = dt / substeps
    sub_twists = np.repeat(actual, substeps, axis=0)
    sub_dts = np.full(n * substeps, sub_dt)
    integrated = np.empty((n * substeps, 3))
    _kernels.accumulate_poses(0.0, 0.0, 0.0, sub_twists, sub_dts, integrated)
    truth = TruthPath(
        times=np.arange(n * substeps + 1) * sub_dt,
        xs=np.concatenate(([0.0], integrated[:, 0])),
        ys=np.concatenate(([0.0], integrated[:, 1])),
        thetas=np.concatenate(([0.0], integrated[:, 2])),
    )

    if ips_config is None:
        fixes: list[PositionFix] = []
    elif ips_config.noise_mode == "xy":
        fixes = ips_module.direct_fix_stream(
            truth, ips_config.rate_hz, ips_config.sigma_xy, ips_config.dropout_prob, rng
        )
    else:
        fixes = ips_module.fix_stream(
            truth,
            ips_config.layout,
            ips_config.rate_hz,
            ips_config.sigma_range,
            ips_config.dropout_prob,
            rng,
            mobile_height=ips_config.mobile_height,
        )

    return ExperimentTrace(
        plan=plan,
        geometry=geometry,
        sample_times=times,
        commanded=commanded,
        planned_poses=planned,
        reported_twists=reported,
        actual_twists=actual,
        ticks=ticks,
        truth=truth,
        fixes=fixes,
        seed=seed,
    )
