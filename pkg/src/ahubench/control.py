"""Controllers and the ventilation logic that turns a fan signal into airflow.

Two baselines compute a fan signal from the zone temperature: a hysteresis
thermostat and a clipped PID loop.  The learned modes receive their signal
from a policy and route it through :func:`resolve_command`, which enforces a
CO2 ventilation floor and, in ``PPO_ECON``, lets an enthalpy economizer pick
the outdoor-air fraction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from ahubench.errors import ConfigError
from ahubench.plant import PPM, BuildingParams, Exogenous, ZoneState
from ahubench.psychro import MoistAirPoint, moist_air_enthalpy


class Mode(str, enum.Enum):
    ONOFF = "onoff"
    PID = "pid"
    PPO_FIXED = "ppo"
    PPO_ECON = "ppo-econ"

    @classmethod
    def parse(cls, value: str | Mode) -> Mode:
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"ppo-fixed": "ppo", "on-off": "onoff"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown controller mode {value!r} (expected one of {choices})") from None

    @property
    def is_rl(self) -> bool:
        return self in (Mode.PPO_FIXED, Mode.PPO_ECON)


class FloorRule(str, enum.Enum):
    # Floor on total flow is V_required / alpha, so fresh flow meets V_required.
    ALPHA_SCALED = "alpha-scaled"
    # Floor on total flow is V_required itself, as if the override flow were all outdoor air.
    ALL_FRESH = "all-fresh"


@dataclass(frozen=True)
class ControllerConfig:
    mode: Mode = Mode.PID
    kp: float = 0.5
    ki: float = 0.001
    kd: float = 0.1
    deadband_j_per_kg: float = 2000.0
    floor_rule: FloorRule = FloorRule.ALPHA_SCALED

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        try:
            object.__setattr__(self, "floor_rule", FloorRule(self.floor_rule))
        except ValueError:
            raise ConfigError(f"unknown floor_rule {self.floor_rule!r}") from None
        for name in ("kp", "ki", "kd", "deadband_j_per_kg"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class ControlCommand:
    V_total: float
    V_fresh: float
    alpha: float
    T_supply_eff: float
    ventilation_shortfall: bool = False


# --- thermostat --------------------------------------------------------------

@dataclass(frozen=True)
class ThermostatState:
    fan_on: bool = False


def thermostat_update(st: ThermostatState, T_air: float, p: BuildingParams,
                      differential: float = 2.0) -> tuple[ThermostatState, float]:
    half = differential / 2.0
    if T_air > p.T_set + half:
        st = ThermostatState(True)
    elif T_air < p.T_set - half:
        st = ThermostatState(False)
    return st, 1.0 if st.fan_on else 0.0


# --- PID ---------------------------------------------------------------------

@dataclass(frozen=True)
class PidState:
    Kp: float = 0.5
    Ki: float = 0.001
    Kd: float = 0.1
    integral: float = 0.0
    prev_error: float = 0.0

    @classmethod
    def from_config(cls, cfg: ControllerConfig) -> PidState:
        return cls(cfg.kp, cfg.ki, cfg.kd)


def clip01(x: float) -> float:
    return min(1.0, max(0.0, x))


def pid_update(st: PidState, T_air: float, dt: float, p: BuildingParams) -> tuple[PidState, float]:
    """Positional PID on ``e = T_air - T_set`` with derivative on error.

    The cooling sign convention makes a warm zone produce a positive signal.
    Output is clipped to [0, 1]; the integral is not otherwise limited.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    e = T_air - p.T_set
    integral = st.integral + e * dt
    derivative = (e - st.prev_error) / dt
    raw = st.Kp * e + st.Ki * integral + st.Kd * derivative
    return PidState(st.Kp, st.Ki, st.Kd, integral, e), clip01(raw)


# --- ventilation -------------------------------------------------------------

def dcv_min_fresh_flow(N_occ: float, p: BuildingParams) -> float:
    """Outdoor airflow (m³/s) whose steady state holds CO2 at the limit."""
    if p.CO2_limit <= p.CO2_out:
        raise ConfigError("CO2_limit must exceed CO2_out")
    if N_occ < 0:
        raise ValueError(f"occupancy must be >= 0, got {N_occ}")
    return p.G_CO2_per_person * N_occ / ((p.CO2_limit - p.CO2_out) / PPM)


class FlowSplit(NamedTuple):
    V_total: float
    V_agent: float
    shortfall: bool


def hierarchical_flow(u: float, N_occ: float, alpha: float, p: BuildingParams,
                      floor_rule: FloorRule = FloorRule.ALPHA_SCALED) -> FlowSplit:
    """Agent airflow request, raised to the ventilation floor when needed."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"fresh-air fraction must lie in (0, 1], got {alpha}")
    V_agent = u * p.V_max
    V_required = dcv_min_fresh_flow(N_occ, p)
    floor = V_required / alpha if floor_rule is FloorRule.ALPHA_SCALED else V_required
    V_total = max(V_agent, floor)
    if V_total > p.V_max:
        return FlowSplit(p.V_max, V_agent, True)
    return FlowSplit(V_total, V_agent, False)


@dataclass(frozen=True)
class EconomizerState:
    free_cooling_active: bool = False


def free_cooling_decision(active: bool, h_in: float, h_out: float, deadband: float) -> bool:
    """Hysteresis on the indoor/outdoor enthalpy gap, ``deadband`` wide in total."""
    half = deadband / 2.0
    if h_out < h_in - half:
        return True
    if h_out > h_in + half:
        return False
    return active


def economizer_update(st: EconomizerState, h_in: float, h_out: float,
                      deadband: float = 2000.0) -> EconomizerState:
    active = free_cooling_decision(st.free_cooling_active, h_in, h_out, deadband)
    return st if active == st.free_cooling_active else EconomizerState(active)


def economizer_fresh_fraction(st: EconomizerState, indoor: MoistAirPoint, outdoor: MoistAirPoint,
                              V_total: float, V_required: float,
                              deadband: float = 2000.0) -> tuple[EconomizerState, float]:
    """Outdoor-air fraction: all outdoor air while free cooling, else only what occupants need."""
    st = economizer_update(st, indoor.enthalpy, outdoor.enthalpy, deadband)
    if st.free_cooling_active:
        return st, 1.0
    if V_total <= 0:
        return st, 0.0
    return st, min(1.0, V_required / V_total)


def adjusted_supply_temp(T_air: float, V_agent: float, V_total: float, p: BuildingParams) -> float:
    """Supply temperature at which ``V_total`` delivers the cooling the agent asked for."""
    if V_total <= 0:
        return T_air
    return T_air - V_agent * (T_air - p.T_supply_nominal) / V_total


def resolve_flows(mode: Mode, u: float, T_air: float, w: float, T_out: float, W_out: float,
                  N_occ: float, p: BuildingParams, cfg: ControllerConfig,
                  econ_active: bool = False) -> tuple[float, float, float, float, bool, bool]:
    """Scalar core of :func:`resolve_command`.

    Returns ``(V_total, V_fresh, alpha, T_supply_eff, shortfall, econ_active)``.
    """
    shortfall = False
    if mode is Mode.ONOFF or mode is Mode.PID:
        V_total = u * p.V_max
        alpha = p.alpha_fixed
        T_sup = p.T_supply_nominal
    elif mode is Mode.PPO_FIXED:
        alpha = p.alpha_fixed
        V_total, V_agent, shortfall = hierarchical_flow(u, N_occ, alpha, p, cfg.floor_rule)
        T_sup = adjusted_supply_temp(T_air, V_agent, V_total, p)
    elif mode is Mode.PPO_ECON:
        V_agent = u * p.V_max
        V_required = dcv_min_fresh_flow(N_occ, p)
        V_total = V_agent if V_agent > V_required else V_required
        econ_active = free_cooling_decision(econ_active, moist_air_enthalpy(T_air, w),
                                            moist_air_enthalpy(T_out, W_out), cfg.deadband_j_per_kg)
        if econ_active:
            alpha = 1.0
        else:
            # minimum intake; V_total already covers V_required / alpha
            alpha = min(1.0, V_required / V_total) if V_total > 0 else 0.0
        if V_total > p.V_max:
            V_total, alpha, shortfall = p.V_max, 1.0, True
        T_sup = adjusted_supply_temp(T_air, V_agent, V_total, p)
    else:
        raise ConfigError(f"unsupported mode {mode!r}")
    if V_total <= 0:
        return 0.0, 0.0, 0.0, T_sup, shortfall, econ_active
    return V_total, alpha * V_total, alpha, T_sup, shortfall, econ_active


def resolve_command(mode: Mode, u: float, s: ZoneState, x: Exogenous, p: BuildingParams,
                    cfg: ControllerConfig | None = None, econ: EconomizerState | None = None,
                    W_out: float | None = None) -> tuple[ControlCommand, EconomizerState | None]:
    """Turn a fan signal ``u`` in [0, 1] into airflow, outdoor fraction and supply temperature.

    Baselines get a fixed outdoor fraction and no ventilation floor.  The
    learned modes are floored at the CO2 ventilation minimum, with the supply
    temperature raised so the zone still receives only the requested cooling.
    Returns the command and the economizer state (``None`` outside ``PPO_ECON``).
    """
    mode = Mode.parse(mode)
    cfg = cfg or ControllerConfig(mode=mode)
    if W_out is None:
        W_out = x.W_out(p.P_atm) if mode is Mode.PPO_ECON else 0.0
    active = econ.free_cooling_active if econ is not None else False
    V_total, V_fresh, alpha, T_sup, shortfall, active = resolve_flows(
        mode, u, s.T_air, s.w, x.T_out, W_out, x.N_occ, p, cfg, active)
    cmd = ControlCommand(V_total, V_fresh, alpha, T_sup, shortfall)
    return cmd, (EconomizerState(active) if mode is Mode.PPO_ECON else None)


def enthalpy_gap(T_air: float, w: float, T_out: float, W_out: float) -> float:
    """Indoor minus outdoor specific enthalpy (J/kg dry air)."""
    return moist_air_enthalpy(T_air, w) - moist_air_enthalpy(T_out, W_out)
