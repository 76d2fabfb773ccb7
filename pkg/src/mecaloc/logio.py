"""Plain-text log formats: trajectory records, sensor events, error series.

All files are comma-delimited with a header line and one row per sample.
Floats are written with repr so a read back is bit-exact, which makes
replays reproduce the original filter output byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .ekf import PositionFix, TwistSample
from .kinematics import BodyTwist


class LogParseError(ValueError):
    """A log file row that could not be parsed; carries the line number."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


TRAJECTORY_COLUMNS = (
    "t",
    "gt_x",
    "gt_y",
    "gt_theta",
    "odom_x",
    "odom_y",
    "odom_theta",
    "ips_x",
    "ips_y",
    "ekf_x",
    "ekf_y",
    "ekf_theta",
    "p11",
    "p22",
    "p33",
)

EVENT_COLUMNS = ("t", "kind", "vx", "vy", "omega", "x", "y")

FUSED_COLUMNS = ("t", "ekf_x", "ekf_y", "ekf_theta", "p11", "p22", "p33")


@dataclass(frozen=True)
class TrajectoryRecord:
    """One timestamped log row; ips fields are None when no fix landed at t."""

    t: float
    gt_x: float
    gt_y: float
    gt_theta: float
    odom_x: float
    odom_y: float
    odom_theta: float
    ips_x: Optional[float]
    ips_y: Optional[float]
    ekf_x: float
    ekf_y: float
    ekf_theta: float
    p11: float
    p22: float
    p33: float


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def write_trajectory(path: str, records: Sequence[TrajectoryRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for r in records:
            handle.write(
                ",".join(
                    (
                        _fmt(r.t),
                        _fmt(r.gt_x),
                        _fmt(r.gt_y),
                        _fmt(r.gt_theta),
                        _fmt(r.odom_x),
                        _fmt(r.odom_y),
                        _fmt(r.odom_theta),
                        _fmt(r.ips_x),
                        _fmt(r.ips_y),
                        _fmt(r.ekf_x),
                        _fmt(r.ekf_y),
                        _fmt(r.ekf_theta),
                        _fmt(r.p11),
                        _fmt(r.p22),
                        _fmt(r.p33),
                    )
                )
                + "\n"
            )


def _parse_float(path: str, line: int, column: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise LogParseError(path, line, f"column {column}: not a number: {text!r}") from None


def read_trajectory(path: str) -> list[TrajectoryRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if tuple(header.split(",")) != TRAJECTORY_COLUMNS:
            raise LogParseError(path, 1, f"unexpected header {header!r}")
        for line_no, line in enumerate(handle, start=2):
            fields = line.rstrip("\n").split(",")
            if len(fields) != len(TRAJECTORY_COLUMNS):
                raise LogParseError(
                    path, line_no, f"expected {len(TRAJECTORY_COLUMNS)} fields, got {len(fields)}"
                )
            ips_x = None if fields[7] == "" else _parse_float(path, line_no, "ips_x", fields[7])
            ips_y = None if fields[8] == "" else _parse_float(path, line_no, "ips_y", fields[8])
            if (ips_x is None) != (ips_y is None):
                raise LogParseError(path, line_no, "ips_x and ips_y must be both present or both empty")
            numbers = [
                _parse_float(path, line_no, TRAJECTORY_COLUMNS[i], fields[i])
                for i in (0, 1, 2, 3, 4, 5, 6, 9, 10, 11, 12, 13, 14)
            ]
            records.append(
                TrajectoryRecord(
                    t=numbers[0],
                    gt_x=numbers[1],
                    gt_y=numbers[2],
                    gt_theta=numbers[3],
                    odom_x=numbers[4],
                    odom_y=numbers[5],
                    odom_theta=numbers[6],
                    ips_x=ips_x,
                    ips_y=ips_y,
                    ekf_x=numbers[7],
                    ekf_y=numbers[8],
                    ekf_theta=numbers[9],
                    p11=numbers[10],
                    p22=numbers[11],
                    p33=numbers[12],
                )
            )
    return records


def write_events(path: str, events: Sequence) -> None:
    """Write the sensor event stream (the replay file)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(EVENT_COLUMNS) + "\n")
        for event in events:
            if isinstance(event, TwistSample):
                handle.write(
                    f"{_fmt(event.timestamp)},twist,{_fmt(event.twist.vx)},"
                    f"{_fmt(event.twist.vy)},{_fmt(event.twist.omega)},,\n"
                )
            elif isinstance(event, PositionFix):
                handle.write(
                    f"{_fmt(event.timestamp)},fix,,,,{_fmt(event.x)},{_fmt(event.y)}\n"
                )
            else:
                raise TypeError(f"cannot log event of type {type(event)!r}")


def read_events(path: str) -> list:
    events = []
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if tuple(header.split(",")) != EVENT_COLUMNS:
            raise LogParseError(path, 1, f"unexpected header {header!r}")
        for line_no, line in enumerate(handle, start=2):
            fields = line.rstrip("\n").split(",")
            if len(fields) != len(EVENT_COLUMNS):
                raise LogParseError(
                    path, line_no, f"expected {len(EVENT_COLUMNS)} fields, got {len(fields)}"
                )
            t = _parse_float(path, line_no, "t", fields[0])
            kind = fields[1]
            if kind == "twist":
                events.append(
                    TwistSample(
                        BodyTwist(
                            _parse_float(path, line_no, "vx", fields[2]),
                            _parse_float(path, line_no, "vy", fields[3]),
                            _parse_float(path, line_no, "omega", fields[4]),
                        ),
                        t,
                    )
                )
            elif kind == "fix":
                events.append(
                    PositionFix(
                        _parse_float(path, line_no, "x", fields[5]),
                        _parse_float(path, line_no, "y", fields[6]),
                        t,
                    )
                )
            else:
                raise LogParseError(path, line_no, f"unknown event kind {kind!r}")
    return events


def write_error_series(path: str, series) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("t,error_m\n")
        for t, e in zip(series.timestamps, series.errors):
            handle.write(f"{_fmt(float(t))},{_fmt(float(e))}\n")


def write_fused(path: str, timestamps, poses, covariances) -> None:
    """Write replayed filter output: the estimator column group plus time."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(FUSED_COLUMNS) + "\n")
        for i in range(len(timestamps)):
            handle.write(
                ",".join(
                    (
                        _fmt(float(timestamps[i])),
                        _fmt(float(poses[i, 0])),
                        _fmt(float(poses[i, 1])),
                        _fmt(float(poses[i, 2])),
                        _fmt(float(covariances[i, 0, 0])),
                        _fmt(float(covariances[i, 1, 1])),
                        _fmt(float(covariances[i, 2, 2])),
                    )
                )
                + "\n"
            )
