"""Scenario files: TOML documents that override the built-in defaults field by field.

Layout::

    [building]               # any BuildingParams field
    [profiles.T_out]         # offset, amplitude, lo, hi, period, phase
    [profiles.RH_out]        # (likewise N_occ, Q_internal)
    [simulation]             # dt, duration, warmup, T_air0, T_wall0, RH0, CO2_0, seed
    [controller]             # mode, floor_rule
    [controller.pid]         # kp, ki, kd
    [controller.economizer]  # deadband_j_per_kg
    [ppo]                    # any PpoConfig field
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ahubench.control import ControllerConfig, FloorRule, Mode
from ahubench.errors import ConfigError
from ahubench.plant import BuildingParams, Profile, Profiles
from ahubench.rl.config import PpoConfig


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 1.0
    duration: float = 86400.0
    warmup: float = 3600.0
    T_air0: float = 25.0
    T_wall0: float = 25.0
    RH0: float = 50.0
    CO2_0: float = 400.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if abs(self.duration / self.dt - round(self.duration / self.dt)) > 1e-9:
            raise ConfigError(f"duration ({self.duration}) must be a multiple of dt ({self.dt})")
        if not 0 <= self.warmup < self.duration:
            raise ConfigError("warmup must lie in [0, duration)")
        if not 0 <= self.RH0 <= 100:
            raise ConfigError("RH0 must lie in [0, 100]")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass(frozen=True)
class Scenario:
    building: BuildingParams = field(default_factory=BuildingParams)
    profiles: Profiles = field(default_factory=Profiles)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def __post_init__(self) -> None:
        if self.simulation.CO2_0 < self.building.CO2_out:
            raise ConfigError("initial CO2 must be >= outdoor CO2")

    def with_overrides(self, *, mode: Mode | str | None = None, dt: float | None = None,
                       seed: int | None = None, timesteps: int | None = None,
                       control_interval: float | None = None) -> Scenario:
        sc = self
        if mode is not None:
            sc = replace(sc, controller=replace(sc.controller, mode=Mode.parse(mode)))
        if dt is not None:
            sc = replace(sc, simulation=replace(sc.simulation, dt=dt))
        if seed is not None:
            sc = replace(sc, simulation=replace(sc.simulation, seed=seed),
                         ppo=replace(sc.ppo, seed=seed))
        if timesteps is not None:
            sc = replace(sc, ppo=replace(sc.ppo, total_timesteps=timesteps))
        if control_interval is not None:
            sc = replace(sc, ppo=replace(sc.ppo, control_interval_s=control_interval))
        return sc

    def to_dict(self) -> dict[str, Any]:
        c = self.controller
        return {
            "building": self.building.to_dict(),
            "profiles": {f.name: dataclasses.asdict(getattr(self.profiles, f.name))
                         for f in fields(self.profiles)},
            "simulation": dataclasses.asdict(self.simulation),
            "controller": {
                "mode": c.mode.value,
                "floor_rule": c.floor_rule.value,
                "pid": {"kp": c.kp, "ki": c.ki, "kd": c.kd},
                "economizer": {"deadband_j_per_kg": c.deadband_j_per_kg},
            },
            "ppo": {k: list(v) if isinstance(v, tuple) else v
                    for k, v in dataclasses.asdict(self.ppo).items()},
        }

    def hash(self, *, exclude_controller: bool = False) -> str:
        d = self.to_dict()
        if exclude_controller:
            d.pop("controller")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _build(cls, table: dict[str, Any], where: str, base=None):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    try:
        return replace(base, **table) if base is not None else cls(**table)
    except TypeError as exc:
        raise ConfigError(f"invalid [{where}]: {exc}") from None


def _table(doc: dict[str, Any], key: str, where: str) -> dict[str, Any]:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{where}] must be a table")
    return dict(value)


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    allowed = {"building", "profiles", "simulation", "controller", "ppo"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")

    building = _build(BuildingParams, _table(doc, "building", "building"), "building")

    prof_doc = _table(doc, "profiles", "profiles")
    default_profiles = Profiles()
    prof_names = {f.name for f in fields(Profiles)}
    bad = sorted(set(prof_doc) - prof_names)
    if bad:
        raise ConfigError(f"unknown profile(s): {', '.join(bad)}")
    profiles = Profiles(**{
        name: _build(Profile, _table(prof_doc, name, f"profiles.{name}"), f"profiles.{name}",
                     base=getattr(default_profiles, name))
        for name in prof_names
    })

    simulation = _build(SimulationConfig, _table(doc, "simulation", "simulation"), "simulation")

    ctrl_doc = _table(doc, "controller", "controller")
    pid = _table(ctrl_doc, "pid", "controller.pid")
    econ = _table(ctrl_doc, "economizer", "controller.economizer")
    ctrl_doc.pop("pid", None)
    ctrl_doc.pop("economizer", None)
    for extra, where, allowed_keys in ((ctrl_doc, "controller", {"mode", "floor_rule"}),
                                       (pid, "controller.pid", {"kp", "ki", "kd"}),
                                       (econ, "controller.economizer", {"deadband_j_per_kg"})):
        unknown = sorted(set(extra) - allowed_keys)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    controller = ControllerConfig(
        mode=Mode.parse(ctrl_doc.get("mode", Mode.PID)),
        floor_rule=ctrl_doc.get("floor_rule", FloorRule.ALPHA_SCALED),
        **pid, **econ,
    )

    ppo = _build(PpoConfig, _table(doc, "ppo", "ppo"), "ppo")
    return Scenario(building, profiles, simulation, controller, ppo)


def load_scenario(path: str | Path | None) -> Scenario:
    """Parse a scenario file; ``None`` yields the built-in nominal scenario."""
    if path is None:
        return Scenario()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)


NOMINAL = Scenario()
