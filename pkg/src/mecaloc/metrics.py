"""Trajectory error metrics: distance error series, summaries, NEES.

Distance error is position-only (heading is reported separately), with
the truth linearly interpolated in x and y to the estimate timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ekf import CovarianceError, FilterTrace
from .odometry import normalize_angle


@dataclass(frozen=True)
class ErrorSeries:
    """Per-sample error values against ground truth for one estimator."""

    timestamps: np.ndarray
    errors: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps, dtype=float)
        e = np.asarray(self.errors, dtype=float)
        if t.shape != e.shape:
            raise ValueError(f"length mismatch: {t.shape} timestamps, {e.shape} errors")
        if not np.all(np.isfinite(e)) or np.any(e < 0.0):
            raise ValueError("errors must be finite and >= 0")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "errors", e)

    def __len__(self) -> int:
        return len(self.errors)


class ErrorSummary(NamedTuple):
    max: float
    rmse: float
    final: float


def _as_time_xy(sequence, what: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Extract (t, x, y) arrays from traces, truth paths, or (t, obj) pairs."""
    if hasattr(sequence, "times"):  # TruthPath
        return sequence.times, sequence.xs, sequence.ys
    if isinstance(sequence, FilterTrace):
        return sequence.timestamps, sequence.poses[:, 0], sequence.poses[:, 1]
    pairs = list(sequence)
    if not pairs:
        raise ValueError(f"{what} is empty")
    times = np.empty(len(pairs))
    xs = np.empty(len(pairs))
    ys = np.empty(len(pairs))
    for i, (t, obj) in enumerate(pairs):
        times[i] = t
        pose = getattr(obj, "pose", obj)
        xs[i] = pose.x
        ys[i] = pose.y
    return times, xs, ys


def _check_span(est_times: np.ndarray, truth_times: np.ndarray) -> None:
    slack = 1e-9
    if est_times.min() < truth_times[0] - slack or est_times.max() > truth_times[-1] + slack:
        raise ValueError(
            f"estimate times [{est_times.min()}, {est_times.max()}] fall outside "
            f"the truth span [{truth_times[0]}, {truth_times[-1]}]"
        )


def distance_error_series(estimate, truth, source: str = "") -> ErrorSeries:
    """Euclidean (x, y) error of an estimate against interpolated truth.

    Args:
        estimate: FilterTrace, or sequence of (t, pose-like) pairs.
        truth: TruthPath, or sequence of (t, Pose2D) pairs covering the
            estimate's time span.
        source: estimator label carried on the series.
    """
    est_t, est_x, est_y = _as_time_xy(estimate, "estimate")
    tru_t, tru_x, tru_y = _as_time_xy(truth, "truth")
    _check_span(est_t, tru_t)
    dx = est_x - np.interp(est_t, tru_t, tru_x)
    dy = est_y - np.interp(est_t, tru_t, tru_y)
    return ErrorSeries(est_t, np.hypot(dx, dy), source)


def heading_error_series(estimate, truth, source: str = "") -> ErrorSeries:
    """Absolute wrapped heading error; convenience companion to distance error."""
    if isinstance(estimate, FilterTrace):
        est_t = estimate.timestamps
        est_th = estimate.poses[:, 2]
    else:
        pairs = list(estimate)
        est_t = np.array([t for t, _ in pairs])
        est_th = np.array([getattr(p, "pose", p).theta for _, p in pairs])
    if hasattr(truth, "times"):
        tru_t, tru_th = truth.times, truth.thetas
    else:
        pairs = list(truth)
        tru_t = np.array([t for t, _ in pairs])
        tru_th = np.array([p.theta for _, p in pairs])
    _check_span(est_t, tru_t)
    diff = est_th - np.interp(est_t, tru_t, tru_th)
    wrapped = np.array([abs(normalize_angle(d)) for d in diff])
    return ErrorSeries(est_t, wrapped, source)


def summarize(series: ErrorSeries) -> ErrorSummary:
    """Max, RMSE and final value of an error series."""
    if len(series) == 0:
        raise ValueError("cannot summarize an empty series")
    errors = series.errors
    return ErrorSummary(
        max=float(errors.max()),
        rmse=float(np.sqrt(np.mean(errors**2))),
        final=float(errors[-1]),
    )


def nees_series(states, truth) -> ErrorSeries:
    """Normalized estimation error squared over (x, y) for filter output.

    nees_k = e^T P_xy^-1 e with e the 2-D position error against the
    interpolated truth and P_xy the position block of the covariance.

    Args:
        states: FilterTrace or sequence of (t, FilterState) pairs.
        truth: TruthPath or sequence of (t, Pose2D) pairs.

    Raises:
        CovarianceError: if any position block is singular.
    """
    if isinstance(states, FilterTrace):
        est_t = states.timestamps
        est_xy = states.poses[:, :2]
        covs = states.covariances
    else:
        pairs = list(states)
        est_t = np.array([t for t, _ in pairs])
        est_xy = np.array([[s.pose.x, s.pose.y] for _, s in pairs])
        covs = np.array([s.covariance for _, s in pairs])
    tru_t, tru_x, tru_y = _as_time_xy(truth, "truth")
    _check_span(est_t, tru_t)
    ex = est_xy[:, 0] - np.interp(est_t, tru_t, tru_x)
    ey = est_xy[:, 1] - np.interp(est_t, tru_t, tru_y)
    p00 = covs[:, 0, 0]
    p01 = covs[:, 0, 1]
    p11 = covs[:, 1, 1]
    det = p00 * p11 - p01 * p01
    bad = ~((det > 0.0) & (p00 > 0.0))
    if np.any(bad):
        index = int(np.argmax(bad))
        block = covs[index, :2, :2]
        raise CovarianceError(
            f"position covariance block singular at index {index}",
            float(np.linalg.eigvalsh(block)[0]),
        )
    nees = (ex * (p11 * ex - p01 * ey) + ey * (p00 * ey - p01 * ex)) / det
    return ErrorSeries(est_t, np.maximum(nees, 0.0), "nees")
