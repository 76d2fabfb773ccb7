#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Workload: one 2-lap default experiment (2400 odometry samples, 385 fixes,
24000 truth substeps), exercising the three hot loops through the same
packed-array entry points the library uses.

Run from the repo root after building the extension:

    python benchmarks/bench_backends.py
"""

import math
import time

import numpy as np

from mecaloc._kernels import _reference
from mecaloc.config import default_config
from mecaloc.ekf import PositionFix, TwistSample
from mecaloc import world

try:
    from mecaloc._kernels import _speedups
except ImportError:
    _speedups = None


def build_workload():
    config = default_config()
    trace = world.run_world(
        config.plan, config.geometry, config.slip, config.ips, config.seed,
        odometry=config.odometry,
    )
    events = trace.events
    n = len(events)
    ev_t = np.empty(n)
    ev_kind = np.empty(n, dtype=np.int8)
    ev_a = np.empty(n)
    ev_b = np.empty(n)
    ev_c = np.zeros(n)
    for i, event in enumerate(events):
        ev_t[i] = event.timestamp
        if isinstance(event, TwistSample):
            ev_kind[i] = 0
            ev_a[i], ev_b[i], ev_c[i] = event.twist
        else:
            ev_kind[i] = 1
            ev_a[i], ev_b[i] = event.x, event.y
    substeps = np.repeat(trace.actual_twists, 10, axis=0)
    sub_dts = np.full(len(substeps), config.plan.sample_dt / 10)

    layout = config.ips.layout.positions
    rng = np.random.default_rng(0)
    fixes = []
    for _ in range(400):
        truth = rng.uniform([0.2, -2.8], [2.8, -0.2])
        point = np.array([truth[0], truth[1], 0.2])
        fixes.append(np.ascontiguousarray(
            np.linalg.norm(layout - point, axis=1) + rng.normal(0, 0.35, len(layout))
        ))
    return config, (ev_t, ev_kind, ev_a, ev_b, ev_c), (substeps, sub_dts), (layout, fixes)


def time_best(fn, repeats=5):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_backend(impl, config, ev, substep_data, gn_data):
    ev_t, ev_kind, ev_a, ev_b, ev_c = ev
    n = len(ev_t)
    out_pose = np.empty((n, 3))
    out_cov = np.empty((n, 9))
    out_nis = np.empty(n)
    out_applied = np.empty(n, dtype=np.int8)
    p0 = np.diag([0.01, 0.01, 0.01])
    q = config.process_noise
    r = config.measurement_noise

    def run_filter():
        impl.run_filter_events(
            0.0, 0.0, 0.0, p0, ev_t, ev_kind, ev_a, ev_b, ev_c,
            q.sigma_vx, q.sigma_vy, q.sigma_omega, r.sigma_ips, math.inf,
            out_pose, out_cov, out_nis, out_applied,
        )

    substeps, sub_dts = substep_data
    out_poses = np.empty((len(substeps), 3))

    def run_accumulate():
        impl.accumulate_poses(0.0, 0.0, 0.0, substeps, sub_dts, out_poses)

    layout, fixes = gn_data
    bx = np.ascontiguousarray(layout[:, 0])
    by = np.ascontiguousarray(layout[:, 1])
    bz = np.ascontiguousarray(layout[:, 2])

    def run_trilateration():
        for ranges in fixes:
            impl.gauss_newton_solve(bx, by, bz, ranges, 0.2, 1.5, -1.5, 1e-9, 50)

    return {
        f"filter loop ({n} events)": time_best(run_filter),
        f"dead reckoning ({len(substeps)} steps)": time_best(run_accumulate),
        f"trilateration ({len(fixes)} solves)": time_best(run_trilateration),
    }


def main():
    config, ev, substep_data, gn_data = build_workload()
    results = {"python": bench_backend(_reference, config, ev, substep_data, gn_data)}
    if _speedups is not None:
        results["cython"] = bench_backend(_speedups, config, ev, substep_data, gn_data)
    else:
        print("compiled extension not built; showing fallback only\n")

    width = max(len(k) for k in next(iter(results.values())))
    header = f"{'kernel':<{width}}  " + "".join(f"{name:>12}" for name in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for key in next(iter(results.values())):
        row = f"{key:<{width}}  "
        for name in results:
            row += f"{results[name][key] * 1e3:>10.2f}ms"
        if len(results) == 2:
            row += f"{results['python'][key] / results['cython'][key]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
