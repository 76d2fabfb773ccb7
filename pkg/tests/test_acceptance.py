"""Acceptance suite: one test per criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines; every tolerance and budget is pinned in the assertions below.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chi2

from mecaloc import cli, experiment, metrics, world
from mecaloc.config import default_config, matched_noise_config, render_config
from mecaloc.ekf import (
    FilterState,
    MeasurementNoise,
    PositionFix,
    update_position,
)
from mecaloc.kinematics import (
    BodyTwist,
    MecanumGeometry,
    WheelSpeeds,
    forward_kinematics,
    inverse_kinematics,
)
from mecaloc.ips import corner_layout, simulate_ranges, trilaterate
from mecaloc.odometry import Pose2D, accumulate

GEOMETRY = MecanumGeometry()


def report(number: int, passed: bool, detail: str) -> None:
    print(f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, detail


def test_criterion_01_kinematics_exactness():
    start = time.perf_counter()
    k = GEOMETRY.half_wheelbase + GEOMETRY.half_track
    matrix = (GEOMETRY.wheel_radius / 4.0) * np.array(
        [[1, 1, 1, 1], [-1, 1, 1, -1], [-1 / k, 1 / k, -1 / k, 1 / k]]
    )
    rng = np.random.default_rng(1001)
    worst_fk = 0.0
    worst_roundtrip = 0.0
    for _ in range(1000):
        wheels = rng.uniform(-40, 40, 4)
        got = np.array(forward_kinematics(WheelSpeeds(*wheels), GEOMETRY))
        worst_fk = max(worst_fk, np.max(np.abs(got - matrix @ wheels)))
        twist = BodyTwist(*rng.uniform(-3, 3, 3))
        back = forward_kinematics(inverse_kinematics(twist, GEOMETRY), GEOMETRY)
        worst_roundtrip = max(worst_roundtrip, max(abs(a - b) for a, b in zip(back, twist)))
    elapsed = time.perf_counter() - start
    passed = worst_fk < 1e-12 and worst_roundtrip < 1e-9 and elapsed < 1.0
    report(1, passed, f"fk err {worst_fk:.2e} (<1e-12), roundtrip {worst_roundtrip:.2e} (<1e-9), {elapsed:.2f}s (<1s)")


def test_criterion_02_jacobian_correctness():
    from tests_support import fd_control_jacobian, fd_state_jacobian

    from mecaloc.ekf import control_jacobian, process_jacobian

    start = time.perf_counter()
    rng = np.random.default_rng(1002)
    worst = 0.0
    for _ in range(1000):
        pose = Pose2D(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi))
        control = BodyTwist(*rng.uniform(-2, 2, 3))
        dt = rng.uniform(0.001, 0.5)
        worst = max(
            worst,
            np.max(np.abs(process_jacobian(pose, control, dt) - fd_state_jacobian(pose, control, dt))),
            np.max(np.abs(control_jacobian(pose, dt) - fd_control_jacobian(pose, control, dt))),
        )
    elapsed = time.perf_counter() - start
    passed = worst < 1e-6 and elapsed < 1.0
    report(2, passed, f"max |analytic - finite difference| {worst:.2e} (<1e-6), {elapsed:.2f}s (<1s)")


def test_criterion_03_hand_worked_update():
    state = FilterState(Pose2D(0, 0, 0), np.eye(3))
    out, _, _ = update_position(state, PositionFix(1.0, 1.0, 0.0), MeasurementNoise(1.0))
    pose_err = max(abs(out.pose.x - 0.5), abs(out.pose.y - 0.5), abs(out.pose.theta))
    cov_err = np.max(np.abs(out.covariance - np.diag([0.5, 0.5, 1.0])))
    passed = pose_err < 1e-12 and cov_err < 1e-12
    report(3, passed, f"pose err {pose_err:.2e}, cov err {cov_err:.2e} (both <1e-12)")


def test_criterion_04_covariance_health():
    result = experiment.run_experiment(default_config())
    covs = result.filter_trace.covariances
    asymmetry = float(np.max(np.abs(covs - np.transpose(covs, (0, 2, 1)))))
    min_eig = float(np.min(np.linalg.eigvalsh(covs)))
    passed = asymmetry < 1e-9 and min_eig > 0.0
    report(4, passed, f"{len(covs)} states: asymmetry {asymmetry:.2e} (<1e-9), min eigenvalue {min_eig:.2e} (>0)")


def test_criterion_05_trilateration_oracle():
    start = time.perf_counter()
    layout = corner_layout()
    rng = np.random.default_rng(1005)
    worst_err = 0.0
    worst_iters = 0
    grid = np.linspace(0.05, 2.95, 10)
    for x in grid:
        for y in -grid:
            ranges = simulate_ranges((x, y), 0.2, layout, 0.0, rng)
            fix, (iterations, _) = trilaterate(ranges, layout, 0.2, layout.ground_centroid(), with_stats=True)
            worst_err = max(worst_err, math.hypot(fix.x - x, fix.y - y))
            worst_iters = max(worst_iters, iterations)
    elapsed = time.perf_counter() - start
    passed = worst_err < 1e-6 and worst_iters <= 50 and elapsed < 5.0
    report(5, passed, f"100 grid points: worst err {worst_err:.2e} (<1e-6 m), worst iters {worst_iters} (<=50), {elapsed:.2f}s (<5s)")


def _odometry_final_error(config, laps, seed):
    plan = replace(config.plan, laps=laps)
    trace = world.run_world(plan, config.geometry, config.slip, None, seed, odometry=config.odometry)
    poses = accumulate(
        Pose2D(0, 0, 0),
        [(BodyTwist(*tw), plan.sample_dt) for tw in trace.reported_twists],
    )
    truth = trace.truth.final_pose()
    return math.hypot(poses[-1].x - truth.x, poses[-1].y - truth.y)


def test_criterion_06_drift_accumulates_with_laps():
    config = default_config()
    means = []
    for laps in (1, 2, 3, 4):
        errors = [_odometry_final_error(config, laps, config.seed + s) for s in range(20)]
        means.append(float(np.mean(errors)))
    passed = means[0] < means[1] < means[2] < means[3]
    report(6, passed, "mean final odometry error by lap: " + ", ".join(f"{m:.3f}" for m in means) + " m (strictly increasing)")


def _ips_max_error(config, laps, seed):
    plan = replace(config.plan, laps=laps)
    trace = world.run_world(plan, config.geometry, config.slip, config.ips, seed, odometry=config.odometry)
    series = metrics.distance_error_series(
        [(f.timestamp, f) for f in trace.fixes], trace.truth, "ips"
    )
    return metrics.summarize(series).max


def test_criterion_07_ips_error_is_bounded_in_time():
    config = default_config()
    one = float(np.mean([_ips_max_error(config, 1, config.seed + s) for s in range(20)]))
    four = float(np.mean([_ips_max_error(config, 4, config.seed + s) for s in range(20)]))
    ratio = four / one
    passed = 0.7 <= ratio <= 1.4
    report(7, passed, f"mean max fix error: 1 lap {one:.3f} m, 4 laps {four:.3f} m, ratio {ratio:.3f} (in [0.7, 1.4])")


def test_criterion_08_fusion_beats_both_sources():
    start = time.perf_counter()
    results = experiment.monte_carlo(default_config(), runs=50)
    mean_max = {
        name: float(np.mean([r.summaries[name].max for r in results]))
        for name in ("odometry", "ips", "ekf")
    }
    elapsed = time.perf_counter() - start
    passed = (
        mean_max["ekf"] < mean_max["odometry"]
        and mean_max["ekf"] < mean_max["ips"]
        and mean_max["ips"] > mean_max["odometry"]  # the tuned premise
        and elapsed < 60.0
    )
    report(
        8,
        passed,
        f"mean max over 50 seeds: ekf {mean_max['ekf']:.3f} < odometry {mean_max['odometry']:.3f} < ips {mean_max['ips']:.3f} m, {elapsed:.1f}s (<60s)",
    )


def test_criterion_09_filter_consistency_matched_noise():
    runs = 50
    results = experiment.monte_carlo(matched_noise_config(), runs=runs)
    run_means = []
    for result in results:
        nees = metrics.nees_series(result.filter_trace, result.trace.truth)
        run_means.append(float(np.mean(nees.errors)))
    mean_nees = float(np.mean(run_means))
    lo = chi2.ppf(0.025, 2 * runs) / runs
    hi = chi2.ppf(0.975, 2 * runs) / runs
    passed = lo < mean_nees < hi
    report(9, passed, f"mean position NEES {mean_nees:.3f} over {runs} runs (95% band [{lo:.3f}, {hi:.3f}])")


def test_criterion_10_end_to_end_determinism(tmp_path):
    cfg_path = tmp_path / "acceptance.ini"
    cfg_path.write_text(render_config(default_config()), encoding="utf-8")
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    code1 = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out1)])
    code2 = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out2)])
    names = ("trajectory.csv", "events.csv", "summary.txt", "errors_odometry.csv", "errors_ips.csv", "errors_ekf.csv")
    identical = all((out1 / n).read_bytes() == (out2 / n).read_bytes() for n in names)
    passed = code1 == 0 and code2 == 0 and identical
    report(10, passed, f"two invocations, {len(names)} output files byte-identical: {identical}")
