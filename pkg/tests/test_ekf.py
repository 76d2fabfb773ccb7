import math

import numpy as np
import pytest

from mecaloc.ekf import (
    CovarianceError,
    FilterState,
    MeasurementNoise,
    PositionFix,
    ProcessNoise,
    StreamOrderError,
    TwistSample,
    UpdateRejectedError,
    control_jacobian,
    initial_state,
    predict,
    process_jacobian,
    process_model,
    run_filter,
    update_position,
)
from mecaloc.kinematics import BodyTwist
from mecaloc.odometry import Pose2D, accumulate, integrate_pose, normalize_angle

Q = ProcessNoise(0.1, 0.1, 0.05)
R = MeasurementNoise(0.5)


def random_pose(rng):
    return Pose2D(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))


def random_twist(rng):
    return BodyTwist(*rng.uniform(-2, 2, 3))


# ---------------------------------------------------------------- process model


def test_process_model_trivial_step():
    assert process_model(Pose2D(0, 0, 0), BodyTwist(1, 0, 0), 0.1) == Pose2D(0.1, 0, 0)


def test_process_model_zero_control_is_identity():
    pose = Pose2D(1.5, -2.0, 0.7)
    assert process_model(pose, BodyTwist(0, 0, 0), 0.2) == pose


def test_process_model_equals_dead_reckoning():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        pose = random_pose(rng)
        twist = random_twist(rng)
        dt = rng.uniform(0.001, 0.5)
        assert process_model(pose, twist, dt) == integrate_pose(pose, twist, dt)


def test_process_model_rejects_bad_dt():
    with pytest.raises(ValueError):
        process_model(Pose2D(0, 0, 0), BodyTwist(0, 0, 0), 0.0)


# ------------------------------------------------------------------- jacobians


from tests_support import fd_control_jacobian, fd_state_jacobian


def test_process_jacobian_identity_at_rest():
    assert np.array_equal(
        process_jacobian(Pose2D(3, 4, 1.2), BodyTwist(0, 0, 0), 0.1), np.eye(3)
    )


def test_process_jacobian_hand_case():
    jac = process_jacobian(Pose2D(0, 0, 0), BodyTwist(1, 0.5, 0), 0.1)
    assert np.allclose(jac[:, 2], [-0.05, 0.1, 1.0], atol=1e-15)


def test_process_jacobian_matches_finite_differences():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(1000):
        pose = random_pose(rng)
        control = random_twist(rng)
        dt = rng.uniform(0.001, 0.5)
        diff = np.abs(process_jacobian(pose, control, dt) - fd_state_jacobian(pose, control, dt))
        worst = max(worst, diff.max())
    assert worst < 1e-6


def test_control_jacobian_at_zero_heading():
    assert np.allclose(control_jacobian(Pose2D(0, 0, 0), 1.0), np.eye(3), atol=1e-15)


def test_control_jacobian_hand_case():
    jac = control_jacobian(Pose2D(0, 0, math.pi / 2), 0.1)
    expected = np.array([[0, -0.1, 0], [0.1, 0, 0], [0, 0, 0.1]])
    assert np.allclose(jac, expected, atol=1e-12)


def test_control_jacobian_matches_finite_differences():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(1000):
        pose = random_pose(rng)
        control = random_twist(rng)
        dt = rng.uniform(0.001, 0.5)
        diff = np.abs(control_jacobian(pose, dt) - fd_control_jacobian(pose, control, dt))
        worst = max(worst, diff.max())
    assert worst < 1e-6


# --------------------------------------------------------------------- predict


def test_predict_is_identity_in_the_small_noise_limit():
    state = FilterState(Pose2D(1, 2, 0.3), np.eye(3))
    out = predict(state, BodyTwist(0, 0, 0), 0.1, ProcessNoise(1e-12, 1e-12, 1e-12))
    assert out.pose == state.pose
    assert np.max(np.abs(out.covariance - state.covariance)) < 1e-12


def test_predict_grows_variance_at_rest():
    state = FilterState(Pose2D(0, 0, 0), 0.01 * np.eye(3))
    out = predict(state, BodyTwist(0, 0, 0), 0.1, Q)
    assert np.trace(out.covariance) > np.trace(state.covariance)


def test_predict_matches_matrix_oracle():
    # independent composition of the covariance propagation
    state = FilterState(Pose2D(0, 0, 0), np.eye(3))
    control = BodyTwist(1, 0, 0)
    dt = 0.1
    noise = ProcessNoise(0.1, 0.1, 0.05)
    f = np.array([[1, 0, 0], [0, 1, 0.1], [0, 0, 1]])
    b = 0.1 * np.eye(3)
    q_u = np.diag([0.01, 0.01, 0.0025])
    expected = f @ np.eye(3) @ f.T + b @ q_u @ b.T
    out = predict(state, control, dt, noise)
    assert np.max(np.abs(out.covariance - expected)) < 1e-12
    assert abs(out.pose.x - 0.1) < 1e-15


def test_predict_random_against_numpy_composition():
    rng = np.random.default_rng(14)
    for _ in range(200):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T + 0.1 * np.eye(3)
        pose = random_pose(rng)
        control = random_twist(rng)
        dt = rng.uniform(0.01, 0.3)
        state = FilterState(pose, cov)
        out = predict(state, control, dt, Q)
        f = process_jacobian(pose, control, dt)
        b = control_jacobian(pose, dt)
        q_u = np.diag([Q.sigma_vx**2, Q.sigma_vy**2, Q.sigma_omega**2])
        expected = f @ cov @ f.T + b @ q_u @ b.T
        assert np.max(np.abs(out.covariance - expected)) < 1e-10


def test_predict_raises_on_indefinite_covariance():
    # symmetric but not positive definite sneaks past construction and
    # must be caught by the prediction-step guard
    state = FilterState(Pose2D(0, 0, 0), np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(CovarianceError) as info:
        predict(state, BodyTwist(1, 0, 0), 0.1, ProcessNoise(1e-6, 1e-6, 1e-6))
    assert info.value.min_eigenvalue < 0


# ---------------------------------------------------------------------- update


def test_update_zero_innovation_leaves_pose():
    state = FilterState(Pose2D(2, -1, 0.4), np.eye(3))
    out, innovation, nis = update_position(state, PositionFix(2, -1, 0.0), R)
    assert np.allclose(innovation, [0, 0])
    assert nis == 0.0
    assert out.pose.x == 2 and out.pose.y == -1 and out.pose.theta == 0.4


def test_update_tight_measurement_dominates():
    # sigma -> 0 limit; 1e-5 keeps the plain-form covariance update
    # representable (posterior variance ~ sigma^2) while the posterior
    # position lands on the measurement well inside 1e-9
    state = FilterState(Pose2D(0, 0, 0), np.eye(3))
    out, _, _ = update_position(state, PositionFix(3, 4, 0.0), MeasurementNoise(1e-5))
    assert abs(out.pose.x - 3) < 1e-9
    assert abs(out.pose.y - 4) < 1e-9


def test_update_hand_worked_case():
    # P = I, z = (1, 1), sigma = 1: S = 2I, gain entries 0.5
    state = FilterState(Pose2D(0, 0, 0), np.eye(3))
    out, innovation, nis = update_position(state, PositionFix(1, 1, 0.0), MeasurementNoise(1.0))
    assert abs(out.pose.x - 0.5) < 1e-12
    assert abs(out.pose.y - 0.5) < 1e-12
    assert out.pose.theta == 0.0
    assert np.max(np.abs(out.covariance - np.diag([0.5, 0.5, 1.0]))) < 1e-12
    assert np.allclose(innovation, [1, 1])
    assert abs(nis - 1.0) < 1e-12


def test_update_never_increases_position_variance():
    rng = np.random.default_rng(15)
    for _ in range(500):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T + 1e-3 * np.eye(3)
        state = FilterState(random_pose(rng), cov)
        fix = PositionFix(*rng.uniform(-5, 5, 2), 0.0)
        out, _, _ = update_position(state, fix, MeasurementNoise(rng.uniform(0.01, 2.0)))
        assert out.covariance[0, 0] <= cov[0, 0] + 1e-12
        assert out.covariance[1, 1] <= cov[1, 1] + 1e-12
        assert -math.pi < out.pose.theta <= math.pi


def test_update_rejects_singular_innovation_covariance():
    cov = np.array([[1.0, 1.0 - 1e-14, 0.0], [1.0 - 1e-14, 1.0, 0.0], [0.0, 0.0, 1.0]])
    state = FilterState(Pose2D(0, 0, 0), cov)
    with pytest.raises(UpdateRejectedError):
        update_position(state, PositionFix(1, 1, 0.0), MeasurementNoise(1e-8))


def test_filter_state_validation():
    with pytest.raises(ValueError):
        FilterState(Pose2D(0, 0, 0), np.eye(2))
    asym = np.eye(3)
    asym[0, 1] = 1e-3
    with pytest.raises(ValueError):
        FilterState(Pose2D(0, 0, 0), asym)


# ------------------------------------------------------------------ run_filter


def test_twist_only_stream_is_dead_reckoning():
    rng = np.random.default_rng(16)
    dt = 0.05
    twists = [BodyTwist(*rng.uniform(-1, 1, 3)) for _ in range(200)]
    events = [TwistSample(BodyTwist(0, 0, 0), 0.0)]
    events += [TwistSample(tw, (k + 1) * dt) for k, tw in enumerate(twists)]
    trace = run_filter(initial_state(), events, Q, R)
    expected = accumulate(Pose2D(0, 0, 0), [(tw, dt) for tw in twists])
    assert len(trace) == len(events)
    for k, pose in enumerate(expected):
        got = trace.poses[k + 1]
        assert abs(got[0] - pose.x) < 1e-9
        assert abs(got[1] - pose.y) < 1e-9
        assert abs(got[2] - pose.theta) < 1e-9


def test_fix_only_stream_contracts_position_variance():
    events = [PositionFix(0.01, -0.02, 0.1 * k) for k in range(50)]
    trace = run_filter(
        initial_state(p0_diag=(1.0, 1.0, 1.0)),
        events,
        ProcessNoise(1e-9, 1e-9, 1e-9),
        MeasurementNoise(0.5),
    )
    p_pos = trace.covariances[:, 0, 0] + trace.covariances[:, 1, 1]
    assert np.all(np.diff(p_pos) <= 1e-12)


def test_mixed_stream_matches_scripted_composition():
    # ten-event trace checked against a hand-driven predict/update script
    q = ProcessNoise(0.05, 0.05, 0.02)
    r = MeasurementNoise(0.3)
    events = [
        TwistSample(BodyTwist(0.0, 0.0, 0.0), 0.0),
        TwistSample(BodyTwist(0.5, 0.0, 0.1), 0.1),
        PositionFix(0.06, 0.01, 0.15),
        TwistSample(BodyTwist(0.4, -0.1, 0.0), 0.2),
        PositionFix(0.10, -0.01, 0.2),
        TwistSample(BodyTwist(0.4, -0.1, 0.05), 0.3),
        TwistSample(BodyTwist(0.5, 0.0, -0.05), 0.4),
        PositionFix(0.21, -0.03, 0.45),
        TwistSample(BodyTwist(0.5, 0.05, 0.0), 0.5),
        PositionFix(0.28, -0.02, 0.5),
    ]
    trace = run_filter(initial_state(), events, q, r)

    state = initial_state()
    last_twist = BodyTwist(0, 0, 0)
    t_prev = events[0].timestamp
    for k, event in enumerate(events):
        dt = event.timestamp - t_prev
        if isinstance(event, TwistSample):
            if dt > 0:
                state = predict(state, event.twist, dt, q)
            last_twist = event.twist
        else:
            if dt > 0:
                state = predict(state, last_twist, dt, q)
            state, _, _ = update_position(state, event, r)
        t_prev = event.timestamp
        assert abs(trace.poses[k][0] - state.pose.x) < 1e-9
        assert abs(trace.poses[k][1] - state.pose.y) < 1e-9
        assert abs(trace.poses[k][2] - state.pose.theta) < 1e-9
        assert np.max(np.abs(trace.covariances[k] - state.covariance)) < 1e-9


def test_equal_timestamps_allowed_in_order():
    events = [
        TwistSample(BodyTwist(1, 0, 0), 0.0),
        TwistSample(BodyTwist(1, 0, 0), 0.1),
        PositionFix(0.1, 0.0, 0.1),
    ]
    trace = run_filter(initial_state(), events, Q, R)
    assert len(trace) == 3


def test_out_of_order_stream_raises_with_index():
    events = [
        TwistSample(BodyTwist(1, 0, 0), 0.0),
        TwistSample(BodyTwist(1, 0, 0), 0.2),
        TwistSample(BodyTwist(1, 0, 0), 0.1),
    ]
    with pytest.raises(StreamOrderError) as info:
        run_filter(initial_state(), events, Q, R)
    assert info.value.index == 2


def test_run_filter_covariance_guard_carries_eigenvalue():
    bad = FilterState(Pose2D(0, 0, 0), np.diag([1.0, 1.0, -1.0]))
    events = [
        TwistSample(BodyTwist(0, 0, 0), 0.0),
        TwistSample(BodyTwist(1, 0, 0), 0.1),
    ]
    with pytest.raises(CovarianceError) as info:
        run_filter(bad, events, ProcessNoise(1e-6, 1e-6, 1e-6), R)
    assert info.value.min_eigenvalue < 0


def test_gate_skips_outlier_fixes():
    events = [
        TwistSample(BodyTwist(0, 0, 0), 0.0),
        PositionFix(50.0, 50.0, 0.1),  # absurd outlier
        PositionFix(0.0, 0.0, 0.2),
    ]
    gated = run_filter(initial_state(), events, Q, R, gate_threshold=13.8155)
    assert not gated.updated[1]
    assert gated.updated[2]
    assert abs(gated.poses[1][0]) < 1e-12  # prior kept
    ungated = run_filter(initial_state(), events, Q, R)
    assert ungated.updated[1]
    assert ungated.poses[1][0] > 1.0


def test_nis_reported_per_update():
    events = [
        TwistSample(BodyTwist(0, 0, 0), 0.0),
        PositionFix(0.5, 0.0, 0.1),
    ]
    trace = run_filter(initial_state(p0_diag=(1, 1, 1)), events, Q, MeasurementNoise(1.0))
    assert math.isnan(trace.nis[0])
    predicted_var = 1.0 + 0.1**2 * Q.sigma_vx**2  # P00 after the zero-twist predict
    expected_nis = 0.5**2 / (predicted_var + 1.0)  # S = P + R on x
    assert abs(trace.nis[1] - expected_nis) < 1e-12


def test_innovation_whiteness_under_matched_noise():
    # simulation noise equal to filter noise: mean NIS across seeded runs
    # must sit inside the 95% chi-square band for 2 degrees of freedom
    from scipy.stats import chi2

    from mecaloc import experiment
    from mecaloc.config import matched_noise_config

    runs = 50
    results = experiment.monte_carlo(matched_noise_config(), runs=runs)
    run_means = []
    for result in results:
        nis = result.filter_trace.nis[result.filter_trace.updated]
        run_means.append(float(np.mean(nis)))
    lo = chi2.ppf(0.025, 2 * runs) / runs
    hi = chi2.ppf(0.975, 2 * runs) / runs
    assert lo < float(np.mean(run_means)) < hi
