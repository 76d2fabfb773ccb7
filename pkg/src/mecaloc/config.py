"""Experiment configuration: a flat, sectioned key=value text file.

Keys carry explicit units in their names (wheel_radius_m, rate_hz, ...).
Every key is optional and falls back to the library default; unknown
sections or keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass

import numpy as np

from .ekf import GATE_NIS_99_9, MeasurementNoise, ProcessNoise
from .ips import BeaconLayout, IpsConfig, corner_layout
from .kinematics import MecanumGeometry
from .world import OdometrySensor, SlipModel, TrajectoryPlan


class ConfigError(ValueError):
    """Configuration file problem, pointing at the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a seeded run needs, with the hardware constants as defaults."""

    geometry: MecanumGeometry
    plan: TrajectoryPlan
    slip: SlipModel
    odometry: OdometrySensor
    ips: IpsConfig
    process_noise: ProcessNoise
    measurement_noise: MeasurementNoise
    p0_diag: tuple[float, float, float]
    gate_enabled: bool
    gate_nis: float
    seed: int
    runs: int

    def __post_init__(self) -> None:
        if len(self.p0_diag) != 3 or not all(v > 0.0 for v in self.p0_diag):
            raise ValueError(f"p0_diag must be three positive values, got {self.p0_diag!r}")
        if not (math.isfinite(self.gate_nis) and self.gate_nis > 0.0):
            raise ValueError(f"gate_nis must be > 0, got {self.gate_nis!r}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs!r}")

    @property
    def gate_threshold(self) -> float | None:
        return self.gate_nis if self.gate_enabled else None


def default_config() -> ExperimentConfig:
    """The square-loop experiment configuration used by the acceptance runs."""
    return ExperimentConfig(
        geometry=MecanumGeometry(),
        plan=TrajectoryPlan(side_length=3.0, cruise_speed=0.5, sample_dt=0.02, laps=2),
        slip=SlipModel(factors=(1.02, 1.02, 1.0, 1.0), jitter_std=0.005, mode="under_report"),
        odometry=OdometrySensor(mode="encoder", ppr=1700),
        ips=IpsConfig(
            layout=corner_layout(3.0, -3.0, 2.0),
            noise_mode="range",
            sigma_range=0.35,
            sigma_xy=0.05,
            rate_hz=8.0,
            dropout_prob=0.0,
            mobile_height=0.2,
        ),
        process_noise=ProcessNoise(0.05, 0.05, 0.05),
        measurement_noise=MeasurementNoise(0.4),
        p0_diag=(0.01, 0.01, 0.01),
        gate_enabled=False,
        gate_nis=GATE_NIS_99_9,
        seed=20240901,
        runs=1,
    )


def matched_noise_config() -> ExperimentConfig:
    """Simulation noise equal to filter noise, for consistency experiments.

    Gaussian twist noise instead of the tick pipeline, coordinate-noise
    fixes instead of trilateration, no slip, and a fix rate that divides
    the odometry rate so fixes land exactly on sample boundaries.
    """
    sigma_v = 0.02
    sigma_omega = 0.01
    sigma_xy = 0.05
    return ExperimentConfig(
        geometry=MecanumGeometry(),
        plan=TrajectoryPlan(side_length=3.0, cruise_speed=0.5, sample_dt=0.02, laps=1),
        slip=SlipModel(),
        odometry=OdometrySensor(mode="gaussian", twist_sigma=(sigma_v, sigma_v, sigma_omega)),
        ips=IpsConfig(
            layout=corner_layout(3.0, -3.0, 2.0),
            noise_mode="xy",
            sigma_xy=sigma_xy,
            rate_hz=10.0,
        ),
        process_noise=ProcessNoise(sigma_v, sigma_v, sigma_omega),
        measurement_noise=MeasurementNoise(sigma_xy),
        p0_diag=(0.01, 0.01, 0.01),
        gate_enabled=False,
        gate_nis=GATE_NIS_99_9,
        seed=20240901,
        runs=50,
    )


def _parse_floats(text: str, count: int | None = None):
    values = tuple(float(v) for v in text.split())
    if count is not None and len(values) != count:
        raise ValueError(f"expected {count} values, got {len(values)}")
    return values


def _parse_beacons(text: str) -> np.ndarray:
    rows = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        rows.append(_parse_floats(part, 3))
    return np.array(rows)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_SCHEMA = {
    "geometry": {
        "wheel_radius_m": float,
        "half_wheelbase_m": float,
        "half_track_m": float,
    },
    "plan": {
        "side_length_m": float,
        "cruise_speed_mps": float,
        "sample_dt_s": float,
        "laps": int,
    },
    "odometry": {
        "mode": str,
        "encoder_ppr": int,
        "slip_mode": str,
        "slip_factors": lambda s: _parse_floats(s, 4),
        "slip_jitter_std": float,
        "twist_sigma_vx_mps": float,
        "twist_sigma_vy_mps": float,
        "twist_sigma_omega_radps": float,
    },
    "ips": {
        "beacons_m": _parse_beacons,
        "speed_of_sound_mps": float,
        "mobile_height_m": float,
        "noise_mode": str,
        "sigma_range_m": float,
        "sigma_xy_m": float,
        "rate_hz": float,
        "dropout_prob": float,
    },
    "filter": {
        "sigma_vx_mps": float,
        "sigma_vy_mps": float,
        "sigma_omega_radps": float,
        "sigma_ips_m": float,
        "p0_diag": lambda s: _parse_floats(s, 3),
        "gate_enabled": _parse_bool,
        "gate_nis": float,
    },
    "run": {
        "seed": int,
        "runs": int,
    },
}


def parse_config(text: str, origin: str = "<string>") -> ExperimentConfig:
    """Parse configuration text; see :func:`load_config`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{origin}: unknown key [{section}] {key}")
            try:
                values[section][key] = _SCHEMA[section][key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{origin}: [{section}] {key}: {exc}") from exc

    base = default_config()

    def get(section: str, key: str, fallback):
        return values.get(section, {}).get(key, fallback)

    def build(section: str, factory):
        try:
            return factory()
        except ValueError as exc:
            raise ConfigError(f"{origin}: [{section}] {exc}") from exc

    geometry = build(
        "geometry",
        lambda: MecanumGeometry(
            wheel_radius=get("geometry", "wheel_radius_m", base.geometry.wheel_radius),
            half_wheelbase=get("geometry", "half_wheelbase_m", base.geometry.half_wheelbase),
            half_track=get("geometry", "half_track_m", base.geometry.half_track),
        ),
    )
    plan = build(
        "plan",
        lambda: TrajectoryPlan(
            side_length=get("plan", "side_length_m", base.plan.side_length),
            cruise_speed=get("plan", "cruise_speed_mps", base.plan.cruise_speed),
            sample_dt=get("plan", "sample_dt_s", base.plan.sample_dt),
            laps=get("plan", "laps", base.plan.laps),
        ),
    )
    slip = build(
        "odometry",
        lambda: SlipModel(
            factors=tuple(get("odometry", "slip_factors", base.slip.factors)),
            jitter_std=get("odometry", "slip_jitter_std", base.slip.jitter_std),
            mode=get("odometry", "slip_mode", base.slip.mode),
        ),
    )
    odometry = build(
        "odometry",
        lambda: OdometrySensor(
            mode=get("odometry", "mode", base.odometry.mode),
            ppr=get("odometry", "encoder_ppr", base.odometry.ppr),
            twist_sigma=(
                get("odometry", "twist_sigma_vx_mps", base.odometry.twist_sigma[0]),
                get("odometry", "twist_sigma_vy_mps", base.odometry.twist_sigma[1]),
                get("odometry", "twist_sigma_omega_radps", base.odometry.twist_sigma[2]),
            ),
        ),
    )
    beacons = get("ips", "beacons_m", base.ips.layout.positions)
    ips = build(
        "ips",
        lambda: IpsConfig(
            layout=BeaconLayout(
                positions=beacons,
                speed_of_sound=get("ips", "speed_of_sound_mps", base.ips.layout.speed_of_sound),
            ),
            noise_mode=get("ips", "noise_mode", base.ips.noise_mode),
            sigma_range=get("ips", "sigma_range_m", base.ips.sigma_range),
            sigma_xy=get("ips", "sigma_xy_m", base.ips.sigma_xy),
            rate_hz=get("ips", "rate_hz", base.ips.rate_hz),
            dropout_prob=get("ips", "dropout_prob", base.ips.dropout_prob),
            mobile_height=get("ips", "mobile_height_m", base.ips.mobile_height),
        ),
    )
    process_noise = build(
        "filter",
        lambda: ProcessNoise(
            get("filter", "sigma_vx_mps", base.process_noise.sigma_vx),
            get("filter", "sigma_vy_mps", base.process_noise.sigma_vy),
            get("filter", "sigma_omega_radps", base.process_noise.sigma_omega),
        ),
    )
    measurement_noise = build(
        "filter",
        lambda: MeasurementNoise(get("filter", "sigma_ips_m", base.measurement_noise.sigma_ips)),
    )
    return build(
        "run",
        lambda: ExperimentConfig(
            geometry=geometry,
            plan=plan,
            slip=slip,
            odometry=odometry,
            ips=ips,
            process_noise=process_noise,
            measurement_noise=measurement_noise,
            p0_diag=tuple(get("filter", "p0_diag", base.p0_diag)),
            gate_enabled=get("filter", "gate_enabled", base.gate_enabled),
            gate_nis=get("filter", "gate_nis", base.gate_nis),
            seed=get("run", "seed", base.seed),
            runs=get("run", "runs", base.runs),
        ),
    )


def load_config(path: str) -> ExperimentConfig:
    """Load and validate a configuration file.

    Raises:
        ConfigError: naming the offending section/key on any problem.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text, origin=path)


def render_config(config: ExperimentConfig) -> str:
    """Render a configuration back to file text (full key set, explicit units)."""
    beacons = "; ".join(
        " ".join(repr(float(v)) for v in row) for row in config.ips.layout.positions
    )
    out = io.StringIO()
    out.write("[geometry]\n")
    out.write(f"wheel_radius_m = {config.geometry.wheel_radius!r}\n")
    out.write(f"half_wheelbase_m = {config.geometry.half_wheelbase!r}\n")
    out.write(f"half_track_m = {config.geometry.half_track!r}\n")
    out.write("\n[plan]\n")
    out.write(f"side_length_m = {config.plan.side_length!r}\n")
    out.write(f"cruise_speed_mps = {config.plan.cruise_speed!r}\n")
    out.write(f"sample_dt_s = {config.plan.sample_dt!r}\n")
    out.write(f"laps = {config.plan.laps}\n")
    out.write("\n[odometry]\n")
    out.write(f"mode = {config.odometry.mode}\n")
    out.write(f"encoder_ppr = {config.odometry.ppr}\n")
    out.write(f"slip_mode = {config.slip.mode}\n")
    out.write(f"slip_factors = {' '.join(repr(float(f)) for f in config.slip.factors)}\n")
    out.write(f"slip_jitter_std = {config.slip.jitter_std!r}\n")
    out.write(f"twist_sigma_vx_mps = {config.odometry.twist_sigma[0]!r}\n")
    out.write(f"twist_sigma_vy_mps = {config.odometry.twist_sigma[1]!r}\n")
    out.write(f"twist_sigma_omega_radps = {config.odometry.twist_sigma[2]!r}\n")
    out.write("\n[ips]\n")
    out.write(f"beacons_m = {beacons}\n")
    out.write(f"speed_of_sound_mps = {config.ips.layout.speed_of_sound!r}\n")
    out.write(f"mobile_height_m = {config.ips.mobile_height!r}\n")
    out.write(f"noise_mode = {config.ips.noise_mode}\n")
    out.write(f"sigma_range_m = {config.ips.sigma_range!r}\n")
    out.write(f"sigma_xy_m = {config.ips.sigma_xy!r}\n")
    out.write(f"rate_hz = {config.ips.rate_hz!r}\n")
    out.write(f"dropout_prob = {config.ips.dropout_prob!r}\n")
    out.write("\n[filter]\n")
    out.write(f"sigma_vx_mps = {config.process_noise.sigma_vx!r}\n")
    out.write(f"sigma_vy_mps = {config.process_noise.sigma_vy!r}\n")
    out.write(f"sigma_omega_radps = {config.process_noise.sigma_omega!r}\n")
    out.write(f"sigma_ips_m = {config.measurement_noise.sigma_ips!r}\n")
    out.write(f"p0_diag = {' '.join(repr(float(v)) for v in config.p0_diag)}\n")
    out.write(f"gate_enabled = {'true' if config.gate_enabled else 'false'}\n")
    out.write(f"gate_nis = {config.gate_nis!r}\n")
    out.write("\n[run]\n")
    out.write(f"seed = {config.seed}\n")
    out.write(f"runs = {config.runs}\n")
    return out.getvalue()
