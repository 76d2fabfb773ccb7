"""End-to-end experiment runs: three estimators over one shared sensor trace.

Per seeded run the world produces a single trace; odometry-only (dead
reckoning over the reported twists), IPS-only (the raw fixes), and the
EKF fusion all consume that same trace, so their error comparison
isolates the algorithms rather than the noise draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ekf, metrics, world
from .config import ExperimentConfig
from .ekf import FilterTrace, PositionFix, TwistSample
from .logio import TrajectoryRecord
from .odometry import Pose2D, accumulate

ESTIMATORS = ("odometry", "ips", "ekf")


@dataclass
class RunResult:
    """Everything produced by one seeded run."""

    seed: int
    trace: world.ExperimentTrace
    events: list
    filter_trace: FilterTrace
    records: list[TrajectoryRecord]
    summaries: dict[str, metrics.ErrorSummary]


def run_experiment(config: ExperimentConfig, seed: int | None = None) -> RunResult:
    """Simulate one run and evaluate the three estimators on it."""
    run_seed = config.seed if seed is None else seed
    trace = world.run_world(
        config.plan,
        config.geometry,
        config.slip,
        config.ips,
        run_seed,
        odometry=config.odometry,
    )
    events = trace.events
    filter_trace = ekf.run_filter(
        ekf.initial_state(Pose2D(0.0, 0.0, 0.0), config.p0_diag),
        events,
        config.process_noise,
        config.measurement_noise,
        gate_threshold=config.gate_threshold,
    )
    records = build_records(trace, events, filter_trace)
    return RunResult(
        seed=run_seed,
        trace=trace,
        events=events,
        filter_trace=filter_trace,
        records=records,
        summaries=summarize_records(records),
    )


def monte_carlo(config: ExperimentConfig, runs: int | None = None) -> list[RunResult]:
    """Run `runs` independent experiments with seeds base_seed + i."""
    count = config.runs if runs is None else runs
    return [run_experiment(config, seed=config.seed + i) for i in range(count)]


def build_records(
    trace: world.ExperimentTrace, events: list, filter_trace: FilterTrace
) -> list[TrajectoryRecord]:
    """One log row per event: truth, held odometry, fix if any, filter state."""
    odom_poses = [Pose2D(0.0, 0.0, 0.0)]
    odom_poses += accumulate(
        odom_poses[0],
        [(tw, float(dt)) for tw, dt in zip(
            map(tuple, trace.reported_twists), np.diff(trace.sample_times)
        )],
    )
    truth = trace.truth
    records = []
    twist_count = 0
    for i, event in enumerate(events):
        t = float(filter_trace.timestamps[i])
        if isinstance(event, TwistSample) and i > 0:
            twist_count += 1
        odom = odom_poses[twist_count]
        gt = truth.pose_at(t)
        if isinstance(event, PositionFix):
            ips_x, ips_y = event.x, event.y
        else:
            ips_x = ips_y = None
        pose = filter_trace.poses[i]
        cov = filter_trace.covariances[i]
        records.append(
            TrajectoryRecord(
                t=t,
                gt_x=gt.x,
                gt_y=gt.y,
                gt_theta=gt.theta,
                odom_x=odom.x,
                odom_y=odom.y,
                odom_theta=odom.theta,
                ips_x=ips_x,
                ips_y=ips_y,
                ekf_x=float(pose[0]),
                ekf_y=float(pose[1]),
                ekf_theta=float(pose[2]),
                p11=float(cov[0, 0]),
                p22=float(cov[1, 1]),
                p33=float(cov[2, 2]),
            )
        )
    return records


def record_error_series(records: list[TrajectoryRecord]) -> dict[str, metrics.ErrorSeries]:
    """Distance error series per estimator group present in the records.

    Truth is the gt columns; odometry and ekf cover every row, ips only
    the rows where a fix landed.
    """
    t = np.array([r.t for r in records])
    gt = np.array([(r.gt_x, r.gt_y) for r in records])
    series = {}
    odom = np.array([(r.odom_x, r.odom_y) for r in records])
    series["odometry"] = metrics.ErrorSeries(
        t, np.hypot(odom[:, 0] - gt[:, 0], odom[:, 1] - gt[:, 1]), "odometry"
    )
    fused = np.array([(r.ekf_x, r.ekf_y) for r in records])
    series["ekf"] = metrics.ErrorSeries(
        t, np.hypot(fused[:, 0] - gt[:, 0], fused[:, 1] - gt[:, 1]), "ekf"
    )
    fix_rows = [r for r in records if r.ips_x is not None]
    if fix_rows:
        ft = np.array([r.t for r in fix_rows])
        fgt = np.array([(r.gt_x, r.gt_y) for r in fix_rows])
        fip = np.array([(r.ips_x, r.ips_y) for r in fix_rows])
        series["ips"] = metrics.ErrorSeries(
            ft, np.hypot(fip[:, 0] - fgt[:, 0], fip[:, 1] - fgt[:, 1]), "ips"
        )
    return series


def summarize_records(records: list[TrajectoryRecord]) -> dict[str, metrics.ErrorSummary]:
    return {
        name: metrics.summarize(series)
        for name, series in record_error_series(records).items()
    }


def summary_table(summaries: dict[str, metrics.ErrorSummary]) -> str:
    """Single-run summary as comma-delimited text."""
    lines = ["estimator,max_m,rmse_m,final_m"]
    for name in ESTIMATORS:
        if name in summaries:
            s = summaries[name]
            lines.append(f"{name},{s.max!r},{s.rmse!r},{s.final!r}")
    return "\n".join(lines) + "\n"


def monte_carlo_table(results: list[RunResult]) -> str:
    """Per-run summary rows plus a mean row per estimator, sorted by run index."""
    lines = ["run,estimator,max_m,rmse_m,final_m"]
    for index, result in enumerate(results):
        for name in ESTIMATORS:
            if name in result.summaries:
                s = result.summaries[name]
                lines.append(f"{index},{name},{s.max!r},{s.rmse!r},{s.final!r}")
    for name in ESTIMATORS:
        rows = [r.summaries[name] for r in results if name in r.summaries]
        if rows:
            mean_max = float(np.mean([s.max for s in rows]))
            mean_rmse = float(np.mean([s.rmse for s in rows]))
            mean_final = float(np.mean([s.final for s in rows]))
            lines.append(f"mean,{name},{mean_max!r},{mean_rmse!r},{mean_final!r}")
    return "\n".join(lines) + "\n"
