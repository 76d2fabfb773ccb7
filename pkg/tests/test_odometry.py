import math

import numpy as np
import pytest

from mecaloc.kinematics import BodyTwist
from mecaloc.odometry import Pose2D, accumulate, integrate_pose, normalize_angle


def test_normalize_angle_range():
    for theta in (-4 * math.pi, -math.pi, -1.0, 0.0, 1.0, math.pi, 7.5, 100.0):
        wrapped = normalize_angle(theta)
        assert -math.pi < wrapped <= math.pi
        # same direction modulo 2*pi
        assert abs(math.sin(wrapped) - math.sin(theta)) < 1e-12
        assert abs(math.cos(wrapped) - math.cos(theta)) < 1e-12


def test_normalize_angle_keeps_pi():
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi


def test_forward_step_at_zero_heading():
    pose = integrate_pose(Pose2D(0, 0, 0), BodyTwist(1, 0, 0), 0.1)
    assert pose == Pose2D(0.1, 0.0, 0.0)


def test_forward_step_rotated_heading():
    pose = integrate_pose(Pose2D(0, 0, math.pi / 2), BodyTwist(1, 0, 0), 0.1)
    assert abs(pose.x) < 1e-15
    assert abs(pose.y - 0.1) < 1e-15
    assert pose.theta == math.pi / 2


def test_general_step_against_scalar_oracle():
    # independent scalar evaluation of the dead-reckoning formula
    x, y, theta = 1.0, 2.0, 0.3
    vx, vy, omega = 0.5, -0.2, 0.1
    dt = 0.05
    expected_x = x + dt * (vx * math.cos(theta) - vy * math.sin(theta))
    expected_y = y + dt * (vx * math.sin(theta) + vy * math.cos(theta))
    expected_theta = theta + dt * omega
    pose = integrate_pose(Pose2D(x, y, theta), BodyTwist(vx, vy, omega), dt)
    assert abs(pose.x - expected_x) < 1e-15
    assert abs(pose.y - expected_y) < 1e-15
    assert abs(pose.theta - expected_theta) < 1e-15


def test_rejects_bad_dt():
    with pytest.raises(ValueError):
        integrate_pose(Pose2D(0, 0, 0), BodyTwist(1, 0, 0), 0.0)
    with pytest.raises(ValueError):
        integrate_pose(Pose2D(0, 0, 0), BodyTwist(1, 0, 0), -0.1)


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        integrate_pose(Pose2D(math.nan, 0, 0), BodyTwist(1, 0, 0), 0.1)


def test_translation_reversibility():
    rng = np.random.default_rng(3)
    for _ in range(200):
        start = Pose2D(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        twist = BodyTwist(*rng.uniform(-2, 2, 2), 0.0)
        dt = rng.uniform(0.01, 1.0)
        there = integrate_pose(start, twist, dt)
        back = integrate_pose(there, BodyTwist(-twist.vx, -twist.vy, 0.0), dt)
        assert abs(back.x - start.x) < 1e-9
        assert abs(back.y - start.y) < 1e-9
        assert abs(back.theta - start.theta) < 1e-9


def test_heading_stays_wrapped_on_long_runs():
    pose = Pose2D(0, 0, 0)
    for _ in range(5000):
        pose = integrate_pose(pose, BodyTwist(0.3, 0.0, 2.7), 0.05)
        assert -math.pi < pose.theta <= math.pi


def test_accumulate_empty():
    assert accumulate(Pose2D(0, 0, 0), []) == []


def test_accumulate_single_equals_integrate():
    step = (BodyTwist(0.4, -0.1, 0.2), 0.07)
    assert accumulate(Pose2D(1, 1, 0.5), [step]) == [integrate_pose(Pose2D(1, 1, 0.5), *step)]


def test_accumulate_matches_fold():
    rng = np.random.default_rng(4)
    steps = [
        (BodyTwist(*rng.uniform(-1, 1, 3)), float(rng.uniform(0.01, 0.2)))
        for _ in range(1000)
    ]
    start = Pose2D(0.0, 0.0, 0.1)
    poses = accumulate(start, steps)
    running = start
    for pose, step in zip(poses, steps):
        running = integrate_pose(running, *step)
        assert abs(pose.x - running.x) < 1e-12
        assert abs(pose.y - running.y) < 1e-12
        assert abs(pose.theta - running.theta) < 1e-12


def test_exact_square_closes():
    # four constant-twist legs tracing a square at fixed heading
    v, dt, side = 0.5, 0.02, 3.0
    steps_per_leg = int(side / v / dt)
    legs = [(v, 0, 0), (0, -v, 0), (-v, 0, 0), (0, v, 0)]
    steps = [(BodyTwist(*leg), dt) for leg in legs for _ in range(steps_per_leg)]
    final = accumulate(Pose2D(0, 0, 0), steps)[-1]
    assert abs(final.x) < 1e-9
    assert abs(final.y) < 1e-9
    assert abs(final.theta) < 1e-9


def test_accumulate_rejects_bad_dt():
    with pytest.raises(ValueError):
        accumulate(Pose2D(0, 0, 0), [(BodyTwist(1, 0, 0), -0.1)])
