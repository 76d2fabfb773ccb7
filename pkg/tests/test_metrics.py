import math

import numpy as np
import pytest

from mecaloc.ekf import CovarianceError, FilterState, PositionFix
from mecaloc.metrics import (
    ErrorSeries,
    distance_error_series,
    heading_error_series,
    nees_series,
    summarize,
)
from mecaloc.odometry import Pose2D


def line_truth(n=11, dt=1.0):
    return [(k * dt, Pose2D(float(k), 0.0, 0.0)) for k in range(n)]


def test_error_series_validation():
    with pytest.raises(ValueError):
        ErrorSeries(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        ErrorSeries(np.array([0.0]), np.array([-0.1]))


def test_identical_estimate_gives_zeros():
    truth = line_truth()
    series = distance_error_series(truth, truth, "odometry")
    assert np.allclose(series.errors, 0.0)


def test_constant_offset_is_three_four_five():
    truth = line_truth()
    est = [(t, Pose2D(p.x + 0.3, p.y + 0.4, 0.0)) for t, p in truth]
    series = distance_error_series(est, truth)
    assert np.allclose(series.errors, 0.5, atol=1e-12)


def test_interpolation_at_midpoint():
    truth = [(0.0, Pose2D(0, 0, 0)), (1.0, Pose2D(1, 0, 0))]
    est = [(0.5, Pose2D(0.5, 0, 0))]
    series = distance_error_series(est, truth)
    assert abs(series.errors[0]) < 1e-12


def test_estimate_outside_truth_span_rejected():
    truth = line_truth()
    with pytest.raises(ValueError):
        distance_error_series([(99.0, Pose2D(0, 0, 0))], truth)


def test_position_fixes_work_as_estimates():
    truth = line_truth()
    est = [(2.0, PositionFix(2.0, 1.0, 2.0))]
    series = distance_error_series(est, truth, "ips")
    assert abs(series.errors[0] - 1.0) < 1e-12
    assert series.source == "ips"


def test_summarize_constant():
    series = ErrorSeries(np.arange(4.0), np.full(4, 0.5))
    s = summarize(series)
    assert s.max == 0.5 and s.rmse == 0.5 and s.final == 0.5


def test_summarize_two_point():
    s = summarize(ErrorSeries(np.array([0.0, 1.0]), np.array([0.0, 1.0])))
    assert s.max == 1.0
    assert abs(s.rmse - math.sqrt(0.5)) < 1e-15
    assert s.final == 1.0


def test_summarize_zeros_and_empty():
    s = summarize(ErrorSeries(np.array([0.0]), np.array([0.0])))
    assert s == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        summarize(ErrorSeries(np.array([]), np.array([])))


def test_rmse_never_exceeds_max():
    rng = np.random.default_rng(21)
    for _ in range(100):
        errors = np.abs(rng.normal(size=50))
        s = summarize(ErrorSeries(np.arange(50.0), errors))
        assert s.rmse <= s.max + 1e-15


def state_at(x, y, p_xy):
    cov = np.eye(3)
    cov[:2, :2] = p_xy
    return FilterState(Pose2D(x, y, 0.0), cov)


def test_nees_zero_error():
    truth = line_truth()
    states = [(2.0, state_at(2.0, 0.0, np.eye(2)))]
    series = nees_series(states, truth)
    assert series.errors[0] == 0.0


def test_nees_unit_cases():
    truth = [(0.0, Pose2D(0, 0, 0)), (1.0, Pose2D(0, 0, 0))]
    states = [(0.0, state_at(1.0, 0.0, np.eye(2)))]
    assert abs(nees_series(states, truth).errors[0] - 1.0) < 1e-12
    states = [(0.0, state_at(0.5, 0.5, np.diag([0.25, 0.25])))]
    assert abs(nees_series(states, truth).errors[0] - 2.0) < 1e-12


def test_nees_singular_block_raises():
    truth = [(0.0, Pose2D(0, 0, 0)), (1.0, Pose2D(0, 0, 0))]
    cov = np.eye(3)
    cov[0, 0] = 0.0
    state = FilterState(Pose2D(0.1, 0.0, 0.0), cov)
    with pytest.raises(CovarianceError):
        nees_series([(0.0, state)], truth)


def test_heading_error_wraps():
    truth = [(0.0, Pose2D(0, 0, 3.1)), (1.0, Pose2D(0, 0, 3.1))]
    est = [(0.5, Pose2D(0, 0, -3.1))]
    series = heading_error_series(est, truth)
    # 3.1 and -3.1 differ by ~0.083 rad across the seam, not 6.2
    assert abs(series.errors[0] - (2 * math.pi - 6.2)) < 1e-12
