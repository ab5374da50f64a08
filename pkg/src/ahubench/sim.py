"""Closed-loop zone simulator shared by the episode runner and the RL environment."""

from __future__ import annotations

import math

import numpy as np

from ahubench import plant
from ahubench.control import Mode, PidState, ThermostatState, pid_update, resolve_flows, thermostat_update
from ahubench.errors import NumericalError
from ahubench.scenario import Scenario

RECORDED = ("t", "T_air", "T_wall", "w", "CO2", "T_out", "RH_out", "N_occ", "Q_internal",
            "V_total", "V_fresh", "alpha", "T_supply_eff", "Q_sensible", "Q_latent")


class ZoneSimulator:
    """Integrates the plant one physics step at a time under a single control mode.

    Baseline modes compute their own fan signal every step.  Learned modes
    take the signal ``u`` from the caller and hold it for the steps requested.
    Boundary conditions are pre-evaluated for the whole horizon.
    """

    def __init__(self, scenario: Scenario, mode: Mode | str | None = None, *,
                 phase: float = 0.0, record: bool = False):
        self.scenario = scenario
        self.p = scenario.building
        self.cfg = scenario.controller
        self.mode = Mode.parse(mode) if mode is not None else self.cfg.mode
        self.dt = scenario.simulation.dt
        self.n_steps = scenario.simulation.n_steps
        profiles = scenario.profiles.shifted(phase) if phase else scenario.profiles
        exo = plant.exogenous_series(self.n_steps, self.dt, profiles, self.p.P_atm)
        self.exo = exo
        self._T_out = exo.T_out.tolist()
        self._RH_out = exo.RH_out.tolist()
        self._N = exo.N_occ.tolist()
        self._Q = exo.Q_internal.tolist()
        self._W_out = exo.W_out.tolist()
        self.record = record
        self.reset()

    def reset(self) -> None:
        sim = self.scenario.simulation
        s0 = plant.initial_state(sim.T_air0, sim.T_wall0, sim.RH0, sim.CO2_0, self.p)
        self.T_air, self.T_wall, self.w, self.CO2 = s0.T_air, s0.T_wall, s0.w, s0.CO2
        self.energy_J = 0.0
        self.i = 0
        self.thermostat = ThermostatState()
        self.pid = PidState.from_config(self.cfg)
        self.econ_active = False
        self.shortfall_steps = 0
        self.rows: list[tuple[float, ...]] = []

    @property
    def t(self) -> float:
        return self.i * self.dt

    @property
    def done(self) -> bool:
        return self.i >= self.n_steps

    @property
    def state(self) -> plant.ZoneState:
        return plant.ZoneState(self.T_air, self.T_wall, self.w, self.CO2, self.energy_J)

    def run(self, n: int | None = None, u: float | None = None) -> float:
        """Advance up to ``n`` steps (default: to the end); return the summed post-step reward.

        ``u`` is required for learned modes and ignored by the baselines.
        """
        mode = self.mode
        baseline = not mode.is_rl
        if not baseline and u is None:
            raise ValueError(f"mode {mode.value} needs an external fan signal u")
        p, cfg, dt = self.p, self.cfg, self.dt
        T_set = p.T_set
        stop = self.n_steps if n is None else min(self.n_steps, self.i + n)
        T_air, T_wall, w, CO2 = self.T_air, self.T_wall, self.w, self.CO2
        energy, econ = self.energy_J, self.econ_active
        thermo, pid = self.thermostat, self.pid
        T_out_s, W_out_s, N_s, Q_s = self._T_out, self._W_out, self._N, self._Q
        rows = self.rows if self.record else None
        RH_s = self._RH_out
        reward_sum = 0.0
        shortfalls = 0
        i = self.i
        while i < stop:
            if mode is Mode.ONOFF:
                thermo, u = thermostat_update(thermo, T_air, p)
            elif mode is Mode.PID:
                pid, u = pid_update(pid, T_air, dt, p)
            T_out, W_out, N, Q = T_out_s[i], W_out_s[i], N_s[i], Q_s[i]
            V_total, V_fresh, alpha, T_sup, short, econ = resolve_flows(
                mode, u, T_air, w, T_out, W_out, N, p, cfg, econ)
            shortfalls += short
            T_air1, T_wall1, w1, CO2_1, q_sens, q_lat = plant.advance(
                T_air, T_wall, w, CO2, T_out, W_out, N, Q, V_total, V_fresh, alpha, T_sup, dt, p)
            if rows is not None:
                rows.append((i * dt, T_air, T_wall, w, CO2, T_out, RH_s[i], N, Q,
                             V_total, V_fresh, alpha, T_sup, q_sens, q_lat))
            if not math.isfinite(T_air1 + T_wall1 + w1 + CO2_1):
                self.i = i
                raise NumericalError(
                    f"non-finite state at t={(i + 1) * dt:g} s in mode {mode.value}: "
                    f"T_air={T_air1}, T_wall={T_wall1}, w={w1}, CO2={CO2_1}")
            T_air, T_wall, w, CO2 = T_air1, T_wall1, w1, CO2_1
            energy += (q_sens + q_lat) * dt
            err = T_air - T_set
            reward_sum -= err * err
            i += 1
        self.T_air, self.T_wall, self.w, self.CO2 = T_air, T_wall, w, CO2
        self.energy_J, self.econ_active = energy, econ
        self.thermostat, self.pid = thermo, pid
        self.shortfall_steps += shortfalls
        self.i = i
        return reward_sum

    def recorded_arrays(self) -> dict[str, np.ndarray]:
        table = np.array(self.rows, dtype=float).reshape(-1, len(RECORDED))
        return {k: table[:, j].copy() for j, k in enumerate(RECORDED)}
