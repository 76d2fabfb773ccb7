"""Simulated ultrasound indoor positioning: beacons, ranging, trilateration.

Stationary beacons at known 3-D positions measure slant ranges to the
mobile unit (time of flight is folded into the range directly, range =
TOF * speed of sound).  A damped Gauss-Newton least-squares solve turns
one set of noisy ranges into an (x, y) position fix; the mobile unit's
height above the floor is known and held fixed, so the solve is 2-D.

Range noise is applied to the ranges themselves, which reproduces the
geometry-dependent error structure of real TOF systems.  A direct
coordinate-noise stream is also provided for filter tests that need an
exactly known measurement covariance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ekf import PositionFix
from .odometry import Pose2D

log = logging.getLogger(__name__)

DEFAULT_SPEED_OF_SOUND = 343.0
DEFAULT_MOBILE_HEIGHT = 0.2
DEFAULT_BEACON_HEIGHT = 2.0

GN_STEP_TOL = 1e-9
GN_MAX_ITER = 50


class TrilaterationError(RuntimeError):
    """Gauss-Newton failed to converge within the iteration budget."""

    def __init__(self, message: str, residual_norm: float):
        super().__init__(f"{message} (residual norm {residual_norm:.3e})")
        self.residual_norm = residual_norm


@dataclass(frozen=True, eq=False)
class BeaconLayout:
    """Stationary beacon positions, meters, plus the speed of sound (m/s).

    At least three beacons are required and their ground-plane
    projections must not be collinear, otherwise the 2-D solve is
    degenerate; both conditions are checked at construction.
    """

    positions: np.ndarray
    speed_of_sound: float = DEFAULT_SPEED_OF_SOUND

    def __eq__(self, other) -> bool:
        if not isinstance(other, BeaconLayout):
            return NotImplemented
        return self.speed_of_sound == other.speed_of_sound and np.array_equal(
            self.positions, other.positions
        )

    def __post_init__(self) -> None:
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (n, 3), got shape {pos.shape}")
        if pos.shape[0] < 3:
            raise ValueError(f"need at least 3 beacons, got {pos.shape[0]}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("beacon positions must be finite")
        if np.any(pos[:, 2] < 0.0):
            raise ValueError("beacon heights must be >= 0")
        ground = pos[:, :2] - pos[:, :2].mean(axis=0)
        singular_values = np.linalg.svd(ground, compute_uv=False)
        if singular_values[1] <= 1e-9 * max(singular_values[0], 1.0):
            raise ValueError("beacon ground projections are collinear")
        if not (math.isfinite(self.speed_of_sound) and self.speed_of_sound > 0.0):
            raise ValueError(f"speed_of_sound must be > 0, got {self.speed_of_sound!r}")
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def ground_centroid(self) -> tuple[float, float]:
        cx, cy = self.positions[:, :2].mean(axis=0)
        return float(cx), float(cy)


@dataclass(frozen=True)
class IpsConfig:
    """Positioning-system settings for a simulated run.

    noise_mode selects how fixes are produced: "range" noises the slant
    ranges and trilaterates (geometry-dependent fix errors), "xy" adds
    Gaussian noise straight to the coordinates (exactly known fix
    covariance sigma_xy^2 * I).
    """

    layout: BeaconLayout
    noise_mode: str = "range"
    sigma_range: float = 0.02
    sigma_xy: float = 0.03
    rate_hz: float = 8.0
    dropout_prob: float = 0.0
    mobile_height: float = DEFAULT_MOBILE_HEIGHT

    def __post_init__(self) -> None:
        if self.noise_mode not in ("range", "xy"):
            raise ValueError(f"noise_mode must be range or xy, got {self.noise_mode!r}")
        if self.sigma_range < 0.0 or self.sigma_xy < 0.0:
            raise ValueError("noise sigmas must be >= 0")
        if self.rate_hz <= 0.0:
            raise ValueError(f"rate_hz must be > 0, got {self.rate_hz!r}")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError(f"dropout_prob must be in [0, 1), got {self.dropout_prob!r}")
        if self.mobile_height < 0.0:
            raise ValueError(f"mobile_height must be >= 0, got {self.mobile_height!r}")


def corner_layout(
    x_extent: float = 3.0,
    y_extent: float = -3.0,
    height: float = DEFAULT_BEACON_HEIGHT,
) -> BeaconLayout:
    """Four beacons at the corners of the rectangle spanned from the origin.

    The default matches the experiment arena: the robot covers
    x in [0, 3], y in [-3, 0], with beacons mounted at 2 m.
    """
    return BeaconLayout(
        np.array(
            [
                [0.0, 0.0, height],
                [x_extent, 0.0, height],
                [x_extent, y_extent, height],
                [0.0, y_extent, height],
            ]
        )
    )


@dataclass(frozen=True)
class RangeSet:
    """Slant ranges to every beacon, meters, at one sample time."""

    ranges: np.ndarray
    timestamp: float

    def __post_init__(self) -> None:
        ranges = np.asarray(self.ranges, dtype=float)
        if not np.all(np.isfinite(ranges)) or np.any(ranges <= 0.0):
            raise ValueError("ranges must be finite and > 0")
        object.__setattr__(self, "ranges", ranges)


def simulate_ranges(
    true_position: tuple[float, float],
    mobile_height: float,
    layout: BeaconLayout,
    sigma_range: float,
    rng: np.random.Generator,
    timestamp: float = 0.0,
) -> RangeSet:
    """Measure noisy slant ranges from a known position to every beacon.

    range_i = ||(x, y, mobile_height) - beacon_i|| + e_i with
    e_i ~ N(0, sigma_range^2) drawn from `rng`.
    """
    if sigma_range < 0.0:
        raise ValueError(f"sigma_range must be >= 0, got {sigma_range!r}")
    x, y = true_position
    point = np.array([x, y, mobile_height])
    true_ranges = np.linalg.norm(layout.positions - point, axis=1)
    if sigma_range > 0.0:
        true_ranges = true_ranges + rng.normal(0.0, sigma_range, layout.count)
    return RangeSet(true_ranges, timestamp)


def trilaterate(
    range_set: RangeSet,
    layout: BeaconLayout,
    mobile_height: float,
    initial_guess: tuple[float, float],
    with_stats: bool = False,
):
    """Solve the range least-squares problem for an (x, y) fix.

    Minimizes sum_i (||(x, y, mobile_height) - beacon_i|| - range_i)^2
    by damped Gauss-Newton, declaring convergence when the step norm
    drops below 1e-9, with a 50-iteration budget.

    Args:
        range_set: measured ranges; its timestamp is carried into the fix.
        layout: beacon geometry matching the ranges.
        mobile_height: known height of the mobile unit, held fixed.
        initial_guess: (x, y) starting point for the solve.
        with_stats: also return (iterations, residual_norm).

    Raises:
        TrilaterationError: if the solve does not converge.
    """
    if len(range_set.ranges) != layout.count:
        raise ValueError(
            f"got {len(range_set.ranges)} ranges for {layout.count} beacons"
        )
    positions = np.ascontiguousarray(layout.positions)
    x, y, iterations, converged, residual_norm = _kernels.gauss_newton_solve(
        positions[:, 0].copy(),
        positions[:, 1].copy(),
        positions[:, 2].copy(),
        np.ascontiguousarray(range_set.ranges),
        mobile_height,
        float(initial_guess[0]),
        float(initial_guess[1]),
        GN_STEP_TOL,
        GN_MAX_ITER,
    )
    if not converged:
        raise TrilaterationError(
            f"no convergence after {iterations} iterations", residual_norm
        )
    fix = PositionFix(x, y, range_set.timestamp)
    if with_stats:
        return fix, (iterations, residual_norm)
    return fix


def fix_stream(
    true_trajectory: list[tuple[float, Pose2D]],
    layout: BeaconLayout,
    rate_hz: float,
    sigma_range: float,
    dropout_prob: float,
    rng: np.random.Generator,
    mobile_height: float = DEFAULT_MOBILE_HEIGHT,
) -> list[PositionFix]:
    """Generate periodic trilaterated fixes along a true trajectory.

    Samples the truth every 1/rate_hz seconds (linear interpolation),
    simulates ranges, solves each fix warm-started from the previous one,
    and drops fixes independently with probability dropout_prob.  Solver
    failures are logged and dropped rather than raised.

    Randomness order per stream: dropout uniforms first, then range
    noise, so a changed dropout probability does not shift range noise.
    """
    if rate_hz <= 0.0:
        raise ValueError(f"rate_hz must be > 0, got {rate_hz!r}")
    if not 0.0 <= dropout_prob < 1.0:
        raise ValueError(f"dropout_prob must be in [0, 1), got {dropout_prob!r}")
    times, xs, ys = _trajectory_arrays(true_trajectory)
    sample_times = _fix_times(times[-1] - times[0], rate_hz, times[0])
    n = len(sample_times)
    dropout_draws = rng.uniform(size=n)
    noise = rng.normal(0.0, 1.0, (n, layout.count)) * sigma_range

    fixes: list[PositionFix] = []
    guess = layout.ground_centroid()
    for i, t in enumerate(sample_times):
        true_x = float(np.interp(t, times, xs))
        true_y = float(np.interp(t, times, ys))
        point = np.array([true_x, true_y, mobile_height])
        ranges = np.linalg.norm(layout.positions - point, axis=1) + noise[i]
        if dropout_draws[i] < dropout_prob:
            continue
        try:
            range_set = RangeSet(ranges, t)
            fix = trilaterate(range_set, layout, mobile_height, guess)
        except (TrilaterationError, ValueError) as exc:
            log.warning("dropping fix at t=%.3f: %s", t, exc)
            continue
        fixes.append(fix)
        guess = (fix.x, fix.y)
    return fixes


def direct_fix_stream(
    true_trajectory: list[tuple[float, Pose2D]],
    rate_hz: float,
    sigma_xy: float,
    dropout_prob: float,
    rng: np.random.Generator,
) -> list[PositionFix]:
    """Generate fixes with Gaussian noise added directly to (x, y).

    Bypasses ranging and trilateration so the fix covariance is exactly
    sigma_xy^2 * I; used for filter-consistency experiments.  Randomness
    order matches :func:`fix_stream`.
    """
    if rate_hz <= 0.0:
        raise ValueError(f"rate_hz must be > 0, got {rate_hz!r}")
    if not 0.0 <= dropout_prob < 1.0:
        raise ValueError(f"dropout_prob must be in [0, 1), got {dropout_prob!r}")
    if sigma_xy < 0.0:
        raise ValueError(f"sigma_xy must be >= 0, got {sigma_xy!r}")
    times, xs, ys = _trajectory_arrays(true_trajectory)
    sample_times = _fix_times(times[-1] - times[0], rate_hz, times[0])
    n = len(sample_times)
    dropout_draws = rng.uniform(size=n)
    noise = rng.normal(0.0, 1.0, (n, 2)) * sigma_xy

    fixes = []
    for i, t in enumerate(sample_times):
        if dropout_draws[i] < dropout_prob:
            continue
        fixes.append(
            PositionFix(
                float(np.interp(t, times, xs)) + noise[i, 0],
                float(np.interp(t, times, ys)) + noise[i, 1],
                t,
            )
        )
    return fixes


def _trajectory_arrays(true_trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if hasattr(true_trajectory, "times"):
        # duck-typed trace with packed arrays
        return true_trajectory.times, true_trajectory.xs, true_trajectory.ys
    if len(true_trajectory) == 0:
        raise ValueError("true trajectory is empty")
    times = np.array([t for t, _ in true_trajectory], dtype=float)
    xs = np.array([p.x for _, p in true_trajectory], dtype=float)
    ys = np.array([p.y for _, p in true_trajectory], dtype=float)
    if np.any(np.diff(times) < 0.0):
        raise ValueError("trajectory times must be non-decreasing")
    return times, xs, ys


def _fix_times(duration: float, rate_hz: float, t0: float) -> np.ndarray:
    count = int(math.floor(duration * rate_hz + 1e-9)) + 1
    return t0 + np.arange(count) / rate_hz
