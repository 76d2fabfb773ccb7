"""Extended Kalman Filter over the planar pose (x, y, theta).

The filter fuses two asynchronous sources:

- body-twist samples from wheel odometry drive the prediction step,
- absolute (x, y) position fixes from the beacon positioning system
  drive the update step.

Process model (one Euler step of the dead-reckoning formula, control
u = (vx, vy, omega) held over dt):

    x'     = x + dt*(vx*cos(theta) - vy*sin(theta))
    y'     = y + dt*(vx*sin(theta) + vy*cos(theta))
    theta' = theta + dt*omega

Its state Jacobian F and control Jacobian B are

    F = [[1, 0, -dt*(vx*sin(theta) + vy*cos(theta))],
         [0, 1,  dt*(vx*cos(theta) - vy*sin(theta))],
         [0, 0,  1]]

    B = dt * [[cos(theta), -sin(theta), 0],
              [sin(theta),  cos(theta), 0],
              [0,           0,          1]]

Process noise is modeled in control space as diag(s_vx^2, s_vy^2,
s_omega^2) and mapped into state space through B, so the predicted
covariance is P' = F P F^T + B Q_u B^T.  The measurement is a direct
position observation, H = [[1, 0, 0], [0, 1, 0]], R = s_ips^2 * I, and
the update is the standard innovation / gain / correction sequence with
P' = (I - K H) P re-symmetrized afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from . import _kernels
from .kinematics import BodyTwist
from .odometry import Pose2D, normalize_angle

OBSERVATION_MATRIX = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

#: NIS threshold at the 99.9% point of the 2-DOF chi-square distribution,
#: the default when innovation gating is switched on.
GATE_NIS_99_9 = 13.815510557964274

_SYMMETRY_TOL = 1e-9


class CovarianceError(RuntimeError):
    """Covariance matrix lost symmetry or positive definiteness."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(f"{message} (min eigenvalue {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


class UpdateRejectedError(RuntimeError):
    """Innovation covariance numerically singular; the prior state stands."""


class StreamOrderError(ValueError):
    """Event stream timestamps are not non-decreasing."""

    def __init__(self, index: int, timestamp: float, previous: float):
        super().__init__(
            f"event {index} at t={timestamp!r} precedes t={previous!r}"
        )
        self.index = index


class ProcessNoise(NamedTuple):
    """Control-space noise standard deviations: m/s, m/s, rad/s."""

    sigma_vx: float
    sigma_vy: float
    sigma_omega: float


class MeasurementNoise(NamedTuple):
    """Position-fix noise standard deviation, meters, identical on x and y."""

    sigma_ips: float


class PositionFix(NamedTuple):
    """Absolute (x, y) observation, meters, with its sample time in seconds."""

    x: float
    y: float
    timestamp: float


class TwistSample(NamedTuple):
    """Body twist measured over the interval ending at `timestamp`."""

    twist: BodyTwist
    timestamp: float


Event = Union[TwistSample, PositionFix]


@dataclass
class FilterState:
    """Pose estimate plus its 3x3 covariance (m^2, m^2, rad^2 diagonal)."""

    pose: Pose2D
    covariance: np.ndarray

    def __post_init__(self) -> None:
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got shape {cov.shape}")
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariance must be finite")
        if np.max(np.abs(cov - cov.T)) >= _SYMMETRY_TOL:
            raise ValueError("covariance must be symmetric to within 1e-9")
        self.covariance = cov


def initial_state(
    pose: Pose2D = Pose2D(0.0, 0.0, 0.0),
    p0_diag: Sequence[float] = (0.01, 0.01, 0.01),
) -> FilterState:
    """Build a starting state; default pose at the origin with a small covariance."""
    return FilterState(pose, np.diag(np.asarray(p0_diag, dtype=float)))


def _check_noise(q: ProcessNoise | None = None, r: MeasurementNoise | None = None) -> None:
    if q is not None and not all(math.isfinite(v) and v > 0.0 for v in q):
        raise ValueError(f"process noise sigmas must be finite and > 0, got {q!r}")
    if r is not None and not (math.isfinite(r.sigma_ips) and r.sigma_ips > 0.0):
        raise ValueError(f"sigma_ips must be finite and > 0, got {r.sigma_ips!r}")


def _check_dt(dt: float) -> None:
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")


def process_model(pose: Pose2D, control: BodyTwist, dt: float) -> Pose2D:
    """Propagate the pose through one step of the motion model.

    Same formula as dead reckoning; the filter owns its own copy so the
    prediction step does not depend on the odometry module.
    """
    _check_dt(dt)
    if not all(math.isfinite(v) for v in (*pose, *control)):
        raise ValueError("pose and control must be finite")
    x, y, theta = pose
    vx, vy, omega = control
    c = math.cos(theta)
    s = math.sin(theta)
    return Pose2D(
        x + dt * (vx * c - vy * s),
        y + dt * (vx * s + vy * c),
        normalize_angle(theta + dt * omega),
    )


def process_jacobian(pose: Pose2D, control: BodyTwist, dt: float) -> np.ndarray:
    """Jacobian of the process model with respect to the state."""
    _check_dt(dt)
    vx, vy, _ = control
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return np.array(
        [
            [1.0, 0.0, -dt * (vx * s + vy * c)],
            [0.0, 1.0, dt * (vx * c - vy * s)],
            [0.0, 0.0, 1.0],
        ]
    )


def control_jacobian(pose: Pose2D, dt: float) -> np.ndarray:
    """Jacobian of the process model with respect to the control input.

    Maps control-space noise into state space: a velocity perturbation
    rotates by the heading and scales by dt.
    """
    _check_dt(dt)
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return dt * np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _assert_positive_definite(cov: np.ndarray, where: str) -> None:
    eigenvalues = np.linalg.eigvalsh(cov)
    if eigenvalues[0] <= 0.0:
        raise CovarianceError(
            f"covariance not positive definite after {where}", float(eigenvalues[0])
        )


def predict(state: FilterState, control: BodyTwist, dt: float, q: ProcessNoise) -> FilterState:
    """Prediction step: propagate the pose and inflate the covariance.

    Returns a new state with P' = F P F^T + B diag(q^2) B^T, re-symmetrized.

    Raises:
        CovarianceError: if P' is no longer positive definite.
    """
    _check_noise(q=q)
    pose = process_model(state.pose, control, dt)
    f = process_jacobian(state.pose, control, dt)
    b = control_jacobian(state.pose, dt)
    q_u = np.diag([q.sigma_vx**2, q.sigma_vy**2, q.sigma_omega**2])
    cov = f @ state.covariance @ f.T + b @ q_u @ b.T
    cov = 0.5 * (cov + cov.T)
    _assert_positive_definite(cov, "predict")
    return FilterState(pose, cov)


def update_position(
    state: FilterState, fix: PositionFix, r: MeasurementNoise
) -> tuple[FilterState, np.ndarray, float]:
    """Update step: fold a position fix into the state.

    Computes the innovation y = z - H x, its covariance S = H P H^T + R,
    the gain K = P H^T S^-1, then x' = x + K y and P' = (I - K H) P.

    Returns:
        (posterior state, innovation 2-vector, NIS scalar) where
        NIS = y^T S^-1 y supports consistency monitoring.

    Raises:
        UpdateRejectedError: if S is numerically singular; the caller
            should keep the prior.
        CovarianceError: if the posterior covariance is not positive
            definite.
    """
    _check_noise(r=r)
    if not (math.isfinite(fix.x) and math.isfinite(fix.y)):
        raise ValueError(f"fix must be finite, got {fix!r}")
    h = OBSERVATION_MATRIX
    p = state.covariance
    r_mat = np.diag([r.sigma_ips**2, r.sigma_ips**2])
    s = h @ p @ h.T + r_mat
    s_eigs = np.linalg.eigvalsh(s)
    if s_eigs[0] <= s_eigs[1] * 1e-12:
        raise UpdateRejectedError(
            f"innovation covariance singular (eigenvalues {s_eigs[0]:.3e}, {s_eigs[1]:.3e})"
        )
    innovation = np.array([fix.x - state.pose.x, fix.y - state.pose.y])
    s_inv = np.linalg.inv(s)
    nis = float(innovation @ s_inv @ innovation)
    gain = p @ h.T @ s_inv
    dx, dy, dtheta = gain @ innovation
    pose = Pose2D(
        state.pose.x + dx,
        state.pose.y + dy,
        normalize_angle(state.pose.theta + dtheta),
    )
    cov = (np.eye(3) - gain @ h) @ p
    cov = 0.5 * (cov + cov.T)
    _assert_positive_definite(cov, "update")
    return FilterState(pose, cov), innovation, nis


@dataclass
class FilterTrace(Sequence):
    """One filter result per event, with array access for bulk analysis.

    Behaves as a sequence of (timestamp, FilterState) while exposing the
    packed arrays directly: timestamps (n,), poses (n, 3), covariances
    (n, 3, 3), nis (n, NaN where no update happened) and updated (n,)
    flags marking fixes that were actually applied.
    """

    timestamps: np.ndarray
    poses: np.ndarray
    covariances: np.ndarray
    nis: np.ndarray
    updated: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        t = float(self.timestamps[index])
        state = FilterState(Pose2D(*self.poses[index]), self.covariances[index])
        return t, state


def run_filter(
    initial: FilterState,
    events: Iterable[Event],
    q: ProcessNoise,
    r: MeasurementNoise,
    gate_threshold: float | None = None,
) -> FilterTrace:
    """Run the filter over a time-ordered stream of twist samples and fixes.

    The first event establishes t0.  A twist sample predicts over the
    interval since the previous event using its own measured twist; a
    position fix predicts to its timestamp holding the last twist
    (zero-order hold, zero before any twist arrived), then updates.
    Events sharing a timestamp are processed in stream order with a
    zero-length prediction.

    Args:
        initial: starting state.
        events: TwistSample / PositionFix items sorted by timestamp.
        q, r: filter noise settings.
        gate_threshold: optional NIS gate; fixes whose NIS exceeds it are
            skipped (the prior is kept).  None disables gating.

    Returns:
        FilterTrace with one entry per event.

    Raises:
        StreamOrderError: on a backwards timestamp.
        CovarianceError: if positive definiteness is lost.
    """
    _check_noise(q=q, r=r)
    events = list(events)
    n = len(events)
    ev_t = np.empty(n)
    ev_kind = np.empty(n, dtype=np.int8)
    ev_a = np.empty(n)
    ev_b = np.empty(n)
    ev_c = np.zeros(n)
    for i, event in enumerate(events):
        if isinstance(event, TwistSample):
            ev_kind[i] = _kernels.KIND_TWIST
            ev_t[i] = event.timestamp
            ev_a[i], ev_b[i], ev_c[i] = event.twist
        elif isinstance(event, PositionFix):
            ev_kind[i] = _kernels.KIND_FIX
            ev_t[i] = event.timestamp
            ev_a[i] = event.x
            ev_b[i] = event.y
        else:
            raise TypeError(f"event {i}: expected TwistSample or PositionFix, got {type(event)!r}")
    if not np.all(np.isfinite(ev_t)) or not np.all(np.isfinite(ev_a)) or not np.all(np.isfinite(ev_b)) or not np.all(np.isfinite(ev_c)):
        raise ValueError("events must be finite")

    out_pose = np.empty((n, 3))
    out_cov = np.empty((n, 9))
    out_nis = np.empty(n)
    out_applied = np.empty(n, dtype=np.int8)
    gate = math.inf if gate_threshold is None else float(gate_threshold)
    status, fail = _kernels.run_filter_events(
        initial.pose.x,
        initial.pose.y,
        initial.pose.theta,
        np.ascontiguousarray(initial.covariance, dtype=float),
        ev_t,
        ev_kind,
        ev_a,
        ev_b,
        ev_c,
        q.sigma_vx,
        q.sigma_vy,
        q.sigma_omega,
        r.sigma_ips,
        gate,
        out_pose,
        out_cov,
        out_nis,
        out_applied,
    )
    if status == _kernels.STATUS_OUT_OF_ORDER:
        previous = ev_t[fail - 1] if fail > 0 else ev_t[0]
        raise StreamOrderError(fail, float(ev_t[fail]), float(previous))
    if status == _kernels.STATUS_NOT_POSITIVE_DEFINITE:
        bad = out_cov[fail].reshape(3, 3)
        min_eig = float(np.linalg.eigvalsh(bad)[0])
        raise CovarianceError(f"covariance not positive definite at event {fail}", min_eig)
    return FilterTrace(
        timestamps=ev_t,
        poses=out_pose,
        covariances=out_cov.reshape(n, 3, 3),
        nis=out_nis,
        updated=out_applied.astype(bool),
    )
