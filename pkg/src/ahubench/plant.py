"""Single-zone building plant: 2R-2C envelope, moisture and CO2 balances.

State variables are integrated with explicit Euler.  Everything here is a
pure function of its arguments; the episode loop in :mod:`ahubench.harness`
calls :func:`advance` directly on scalars to avoid allocating a
:class:`ZoneState` per second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import TYPE_CHECKING

import numpy as np

from ahubench import psychro
from ahubench.errors import ConfigError, NumericalError

if TYPE_CHECKING:
    from ahubench.control import ControlCommand

DAY_S = 86400.0
J_PER_KWH = 3.6e6
# CO2 generation is a volumetric rate of pure gas; concentrations are in ppm.
PPM = 1e6
FURNISHING_FACTOR = 10.0


@dataclass(frozen=True)
class BuildingParams:
    c_p: float = 1005.0
    rho_air: float = 1.2
    V_house: float = 1200.0
    M_air_eff: float | None = None
    h_fg: float = 2.501e6
    C_wall: float = 1e7
    R_out: float = 0.02
    R_in: float = 0.05
    T_supply_nominal: float = 12.0
    W_supply: float = 0.007
    V_max: float = 8.0
    alpha_fixed: float = 0.5
    CO2_out: float = 400.0
    CO2_limit: float = 1000.0
    G_CO2_per_person: float = 1e-5
    m_moist_per_person: float = 2e-5
    P_atm: float = psychro.P_ATM
    T_set: float = 22.0

    def __post_init__(self) -> None:
        expected = self.V_house * self.rho_air * FURNISHING_FACTOR
        if self.M_air_eff is None:
            object.__setattr__(self, "M_air_eff", expected)
        elif not math.isclose(self.M_air_eff, expected, rel_tol=1e-9):
            raise ConfigError(
                f"M_air_eff={self.M_air_eff} must equal V_house*rho_air*10={expected}"
            )
        for name in ("c_p", "rho_air", "V_house", "h_fg", "C_wall", "R_out", "R_in",
                     "V_max", "P_atm"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {value}")
        for name in ("G_CO2_per_person", "m_moist_per_person", "W_supply", "CO2_out"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 <= self.alpha_fixed <= 1.0:
            raise ConfigError(f"alpha_fixed must lie in [0, 1], got {self.alpha_fixed}")
        if self.CO2_limit <= self.CO2_out:
            raise ConfigError(
                f"CO2_limit ({self.CO2_limit} ppm) must exceed CO2_out ({self.CO2_out} ppm)"
            )

    @property
    def air_heat_capacity(self) -> float:
        """Effective zone heat capacity in J/K."""
        return self.M_air_eff * self.c_p

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ZoneState:
    T_air: float
    T_wall: float
    w: float
    CO2: float
    energy_J: float = 0.0


@dataclass(frozen=True)
class Exogenous:
    T_out: float
    RH_out: float
    N_occ: float
    Q_internal: float

    def W_out(self, P_atm: float = psychro.P_ATM) -> float:
        return psychro.humidity_ratio(self.T_out, self.RH_out, P_atm)


@dataclass(frozen=True)
class CoilLoad:
    Q_sensible: float
    Q_latent: float

    @property
    def Q_coil(self) -> float:
        return self.Q_sensible + self.Q_latent


@dataclass(frozen=True)
class Profile:
    """``clip(offset + amplitude * sin(2*pi*(t + phase)/period), lo, hi)``."""

    offset: float
    amplitude: float
    lo: float
    hi: float
    period: float = DAY_S
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise ConfigError("profile period must be > 0")
        if self.lo > self.hi:
            raise ConfigError(f"profile clamp bounds inverted: [{self.lo}, {self.hi}]")

    def at(self, t: float) -> float:
        raw = self.offset + self.amplitude * math.sin(2.0 * math.pi * (t + self.phase) / self.period)
        return min(self.hi, max(self.lo, raw))

    def series(self, t: np.ndarray) -> np.ndarray:
        raw = self.offset + self.amplitude * np.sin(2.0 * np.pi * (t + self.phase) / self.period)
        return np.clip(raw, self.lo, self.hi)


@dataclass(frozen=True)
class Profiles:
    T_out: Profile = field(default_factory=lambda: Profile(25.0, 5.0, 20.0, 30.0))
    RH_out: Profile = field(default_factory=lambda: Profile(30.0, 30.0, 30.0, 60.0))
    N_occ: Profile = field(default_factory=lambda: Profile(70.0, 80.0, 70.0, 150.0))
    Q_internal: Profile = field(default_factory=lambda: Profile(25000.0, 45000.0, 25000.0, 70000.0))

    def __post_init__(self) -> None:
        if self.RH_out.lo < 0 or self.RH_out.hi > 100:
            raise ConfigError("RH_out clamp bounds must lie within [0, 100] %")
        if self.N_occ.lo < 0:
            raise ConfigError("occupancy clamp lower bound must be >= 0")

    def shifted(self, dt: float) -> Profiles:
        """All profiles advanced in phase by ``dt`` seconds."""
        return Profiles(*(replace(getattr(self, f.name), phase=getattr(self, f.name).phase + dt)
                          for f in fields(self)))


NOMINAL_PROFILES = Profiles()


def exogenous_at(t: float, profiles: Profiles = NOMINAL_PROFILES) -> Exogenous:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return Exogenous(
        T_out=profiles.T_out.at(t),
        RH_out=profiles.RH_out.at(t),
        N_occ=profiles.N_occ.at(t),
        Q_internal=profiles.Q_internal.at(t),
    )


@dataclass(frozen=True)
class ExogenousSeries:
    """Boundary conditions pre-evaluated on a uniform time grid."""

    t: np.ndarray
    T_out: np.ndarray
    RH_out: np.ndarray
    N_occ: np.ndarray
    Q_internal: np.ndarray
    W_out: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def exogenous_series(n_steps: int, dt: float, profiles: Profiles = NOMINAL_PROFILES,
                     P_atm: float = psychro.P_ATM) -> ExogenousSeries:
    t = np.arange(n_steps, dtype=float) * dt
    T_out = profiles.T_out.series(t)
    RH_out = profiles.RH_out.series(t)
    W_out = psychro.humidity_ratio_array(T_out, RH_out, P_atm)
    return ExogenousSeries(t, T_out, RH_out, profiles.N_occ.series(t),
                           profiles.Q_internal.series(t), W_out)


def wall_derivative(s: ZoneState, T_out: float, p: BuildingParams) -> float:
    return ((T_out - s.T_wall) / p.R_out + (s.T_air - s.T_wall) / p.R_in) / p.C_wall


def air_derivative(s: ZoneState, Q_internal: float, Q_cooling: float, p: BuildingParams) -> float:
    return ((s.T_wall - s.T_air) / p.R_in + Q_internal - Q_cooling) / p.air_heat_capacity


def humidity_derivative(s: ZoneState, N_occ: float, V_total: float, p: BuildingParams) -> float:
    return (p.m_moist_per_person * N_occ + p.rho_air * V_total * (p.W_supply - s.w)) / p.M_air_eff


def co2_derivative(s: ZoneState, N_occ: float, V_fresh: float, p: BuildingParams) -> float:
    return (p.G_CO2_per_person * N_occ * PPM + V_fresh * (p.CO2_out - s.CO2)) / p.V_house


def zone_cooling(V_total: float, T_air: float, T_supply_eff: float, p: BuildingParams) -> float:
    """Sensible cooling delivered to the zone air (W); never negative."""
    return V_total * p.rho_air * p.c_p * max(0.0, T_air - T_supply_eff)


def coil_load(V_total: float, alpha: float, s: ZoneState, x: Exogenous, T_supply_eff: float,
              p: BuildingParams, W_out: float | None = None) -> CoilLoad:
    """Cooling-coil duty for the mixed return/outdoor stream."""
    if W_out is None:
        W_out = x.W_out(p.P_atm)
    W_mixed = (1.0 - alpha) * s.w + alpha * W_out
    T_mixed = (1.0 - alpha) * s.T_air + alpha * x.T_out
    mass_flow = V_total * p.rho_air
    return CoilLoad(
        Q_sensible=mass_flow * p.c_p * max(0.0, T_mixed - T_supply_eff),
        Q_latent=mass_flow * p.h_fg * max(0.0, W_mixed - p.W_supply),
    )


def advance(T_air: float, T_wall: float, w: float, CO2: float,
            T_out: float, W_out: float, N_occ: float, Q_internal: float,
            V_total: float, V_fresh: float, alpha: float, T_supply_eff: float,
            dt: float, p: BuildingParams) -> tuple[float, float, float, float, float, float]:
    """One explicit-Euler step on bare floats.

    Returns ``(T_air, T_wall, w, CO2, Q_sensible, Q_latent)``; the loads are
    those applied over ``[t, t + dt)`` and evaluated at the start state.
    """
    mass_flow = V_total * p.rho_air
    q_zone = mass_flow * p.c_p * max(0.0, T_air - T_supply_eff)
    T_mixed = (1.0 - alpha) * T_air + alpha * T_out
    W_mixed = (1.0 - alpha) * w + alpha * W_out
    q_sens = mass_flow * p.c_p * max(0.0, T_mixed - T_supply_eff)
    q_lat = mass_flow * p.h_fg * max(0.0, W_mixed - p.W_supply)

    dT_wall = ((T_out - T_wall) / p.R_out + (T_air - T_wall) / p.R_in) / p.C_wall
    dT_air = ((T_wall - T_air) / p.R_in + Q_internal - q_zone) / (p.M_air_eff * p.c_p)
    dw = (p.m_moist_per_person * N_occ + p.rho_air * V_total * (p.W_supply - w)) / p.M_air_eff
    dCO2 = (p.G_CO2_per_person * N_occ * PPM + V_fresh * (p.CO2_out - CO2)) / p.V_house

    T_air_new = T_air + dt * dT_air
    CO2_new = CO2 + dt * dCO2
    if CO2_new < p.CO2_out:
        CO2_new = p.CO2_out
    return T_air_new, T_wall + dt * dT_wall, w + dt * dw, CO2_new, q_sens, q_lat


def check_finite(T_air: float, T_wall: float, w: float, CO2: float, t: float) -> None:
    if not (math.isfinite(T_air) and math.isfinite(T_wall)
            and math.isfinite(w) and math.isfinite(CO2)):
        raise NumericalError(
            f"non-finite state at t={t:g} s: T_air={T_air}, T_wall={T_wall}, w={w}, CO2={CO2}"
        )


def step(s: ZoneState, cmd: ControlCommand, x: Exogenous, dt: float, p: BuildingParams,
         t: float = 0.0) -> ZoneState:
    """Advance the zone by ``dt`` seconds under command ``cmd`` and boundary ``x``.

    ``t`` is only used in the diagnostic raised on a non-finite result.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    T_air, T_wall, w, CO2, q_sens, q_lat = advance(
        s.T_air, s.T_wall, s.w, s.CO2, x.T_out, x.W_out(p.P_atm), x.N_occ, x.Q_internal,
        cmd.V_total, cmd.V_fresh, cmd.alpha, cmd.T_supply_eff, dt, p)
    check_finite(T_air, T_wall, w, CO2, t + dt)
    return ZoneState(T_air, T_wall, w, CO2, s.energy_J + (q_sens + q_lat) * dt)


def total_energy_kwh(s: ZoneState) -> float:
    return s.energy_J / J_PER_KWH


def initial_state(T_air: float = 25.0, T_wall: float = 25.0, RH: float = 50.0,
                  CO2: float = 400.0, p: BuildingParams | None = None) -> ZoneState:
    P_atm = p.P_atm if p is not None else psychro.P_ATM
    return ZoneState(T_air, T_wall, psychro.humidity_ratio(T_air, RH, P_atm), CO2, 0.0)
