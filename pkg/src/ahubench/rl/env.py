"""Gym-style wrapper exposing the zone to a temperature-tracking agent."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ahubench.control import Mode
from ahubench.errors import ConfigError
from ahubench.plant import BuildingParams, ZoneState
from ahubench.scenario import Scenario
from ahubench.sim import ZoneSimulator


class Observation(NamedTuple):
    T_air: float
    error: float

    def as_array(self) -> np.ndarray:
        return np.array([self.T_air, self.error])


def observe(s: ZoneState | float, p: BuildingParams) -> Observation:
    """``[T_air, T_set - T_air]``."""
    T_air = s.T_air if isinstance(s, ZoneState) else float(s)
    return Observation(T_air, p.T_set - T_air)


def reward(T_air: float, p: BuildingParams) -> float:
    err = T_air - p.T_set
    return -(err * err)


class AhuEnv:
    """One episode spans the scenario duration; each agent step holds ``u`` for one control interval.

    The interval reward is the mean of the per-physics-step rewards, so its
    scale does not depend on the interval length.
    """

    def __init__(self, scenario: Scenario, mode: Mode | str = Mode.PPO_FIXED,
                 control_interval: float | None = None, randomize_phase: bool | None = None,
                 rng: np.random.Generator | None = None):
        self.scenario = scenario
        self.mode = Mode.parse(mode)
        if not self.mode.is_rl:
            raise ConfigError(f"the RL environment needs a learned mode, got {self.mode.value}")
        interval = scenario.ppo.control_interval_s if control_interval is None else control_interval
        dt = scenario.simulation.dt
        self.substeps = int(round(interval / dt))
        if self.substeps < 1 or abs(self.substeps * dt - interval) > 1e-9:
            raise ConfigError(f"control interval {interval} s must be a positive multiple of dt {dt} s")
        self.randomize_phase = (scenario.ppo.randomize_phase if randomize_phase is None
                                else randomize_phase)
        self.rng = rng
        self.sim = ZoneSimulator(scenario, self.mode)

    @property
    def p(self) -> BuildingParams:
        return self.scenario.building

    @property
    def episode_length(self) -> int:
        return -(-self.sim.n_steps // self.substeps)

    def reset(self) -> Observation:
        if self.randomize_phase:
            if self.rng is None:
                raise ConfigError("phase randomisation needs an rng")
            period = self.scenario.profiles.T_out.period
            phase = float(self.rng.uniform(0.0, period))
            self.sim = ZoneSimulator(self.scenario, self.mode, phase=phase)
        else:
            self.sim.reset()
        return observe(self.sim.T_air, self.p)

    def step(self, u: float) -> tuple[Observation, float, bool]:
        """Apply fan signal ``u`` (clipped to [0, 1]) for one interval."""
        if self.sim.done:
            raise RuntimeError("episode finished; call reset()")
        u = min(1.0, max(0.0, float(u)))
        start = self.sim.i
        total = self.sim.run(self.substeps, u)
        r = total / (self.sim.i - start)
        return observe(self.sim.T_air, self.p), r, self.sim.done
