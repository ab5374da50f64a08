"""Moist-air property functions.

Temperatures are in °C, pressures in Pa, relative humidity in percent and
humidity ratios in kg water per kg dry air.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ahubench.errors import DomainError

P_ATM = 101325.0
CP_DRY_AIR = 1005.0
CP_VAPOR = 1860.0
H_FG = 2.501e6
EPSILON = 0.622

T_MIN = -40.0
T_MAX = 60.0


@dataclass(frozen=True)
class MoistAirPoint:
    temperature: float
    humidity_ratio: float

    def __post_init__(self) -> None:
        if self.humidity_ratio < 0:
            raise DomainError(f"humidity ratio must be >= 0, got {self.humidity_ratio}")

    @property
    def enthalpy(self) -> float:
        return moist_air_enthalpy(self.temperature, self.humidity_ratio)


def saturation_pressure(T: float) -> float:
    """Saturation vapour pressure over liquid water (Buck), valid on [-40, 60] °C."""
    if not (T_MIN <= T <= T_MAX):
        raise DomainError(f"temperature {T} °C outside valid range [{T_MIN}, {T_MAX}]")
    return 611.21 * math.exp((18.678 - T / 234.5) * T / (T + 257.14))


def humidity_ratio(T: float, RH: float, P_atm: float = P_ATM) -> float:
    if not (0.0 <= RH <= 100.0):
        raise DomainError(f"relative humidity {RH} % outside [0, 100]")
    p_v = RH / 100.0 * saturation_pressure(T)
    denom = P_atm - p_v
    if denom <= 0:
        raise DomainError(f"vapour pressure {p_v} Pa >= total pressure {P_atm} Pa")
    return EPSILON * p_v / denom


def relative_humidity(T: float, w: float, P_atm: float = P_ATM) -> float:
    """Inverse of :func:`humidity_ratio`; may exceed 100 for supersaturated input."""
    if w < 0:
        raise DomainError(f"humidity ratio must be >= 0, got {w}")
    p_v = w * P_atm / (EPSILON + w)
    return 100.0 * p_v / saturation_pressure(T)


def moist_air_enthalpy(T: float, w: float) -> float:
    """Specific enthalpy in J per kg dry air, referenced to 0 °C dry air and liquid water."""
    if w < 0:
        raise DomainError(f"humidity ratio must be >= 0, got {w}")
    return CP_DRY_AIR * T + w * (H_FG + CP_VAPOR * T)


def saturation_pressure_array(T: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if np.any((T < T_MIN) | (T > T_MAX)):
        raise DomainError(f"temperature outside valid range [{T_MIN}, {T_MAX}] °C")
    return 611.21 * np.exp((18.678 - T / 234.5) * T / (T + 257.14))


def humidity_ratio_array(T: np.ndarray, RH: np.ndarray, P_atm: float = P_ATM) -> np.ndarray:
    RH = np.asarray(RH, dtype=float)
    if np.any((RH < 0) | (RH > 100)):
        raise DomainError("relative humidity outside [0, 100] %")
    p_v = RH / 100.0 * saturation_pressure_array(T)
    if np.any(p_v >= P_atm):
        raise DomainError(f"vapour pressure reaches total pressure {P_atm} Pa")
    return EPSILON * p_v / (P_atm - p_v)


def relative_humidity_array(T: np.ndarray, w: np.ndarray, P_atm: float = P_ATM) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    p_v = w * P_atm / (EPSILON + w)
    return 100.0 * p_v / saturation_pressure_array(T)


def moist_air_enthalpy_array(T: np.ndarray, w: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    return CP_DRY_AIR * T + np.asarray(w, dtype=float) * (H_FG + CP_VAPOR * T)
