"""Episode runner, trajectory I/O, metrics and multi-controller comparison."""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ahubench import psychro
from ahubench.control import Mode, free_cooling_decision
from ahubench.errors import ConfigError
from ahubench.plant import J_PER_KWH, BuildingParams, ZoneState
from ahubench.rl.env import observe
from ahubench.rl.policy import Policy
from ahubench.scenario import NOMINAL, Scenario
from ahubench.sim import ZoneSimulator

TRAJECTORY_FIELDS = ("t", "T_air", "T_wall", "w", "RH_in", "CO2", "T_out", "RH_out", "N_occ",
                     "Q_internal", "V_total", "V_fresh", "alpha", "T_supply_eff", "Q_sensible",
                     "Q_latent", "Q_coil", "reward")
BASELINES = (Mode.ONOFF, Mode.PID)
COMFORT_BAND = 0.5


@dataclass
class Trajectory:
    """Per-physics-step record.  Row ``i`` holds the state at ``t_i`` and the
    command and coil loads applied over ``[t_i, t_i + dt)``."""

    columns: dict[str, np.ndarray]
    dt: float
    final_state: ZoneState | None = None

    def __post_init__(self) -> None:
        missing = [k for k in TRAJECTORY_FIELDS if k not in self.columns]
        if missing:
            raise ValueError(f"trajectory is missing column(s): {', '.join(missing)}")

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def to_csv(self, path: str | Path) -> None:
        cols = [self.columns[k].tolist() for k in TRAJECTORY_FIELDS]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(TRAJECTORY_FIELDS) + "\n")
            fh.writelines(",".join(map(repr, row)) + "\n" for row in zip(*cols))

    @classmethod
    def from_csv(cls, path: str | Path) -> Trajectory:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TRAJECTORY_FIELDS:
                raise ValueError(f"{path}: unexpected trajectory header {header}")
            rows = [[float(v) for v in row] for row in reader]
        table = np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_FIELDS))
        columns = {k: table[:, j].copy() for j, k in enumerate(TRAJECTORY_FIELDS)}
        t = columns["t"]
        dt = float(t[1] - t[0]) if len(t) > 1 else 1.0
        return cls(columns, dt)


@dataclass(frozen=True)
class EpisodeMetrics:
    total_kwh: float
    temp_rmse_post_warmup: float
    max_co2: float
    pct_time_co2_over_limit: float
    thermostat_cycles: int
    comfort_band_occupancy: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(traj: Trajectory, p: BuildingParams, warmup: float = 3600.0) -> EpisodeMetrics:
    """Energy covers the whole run; temperature and CO2 statistics skip the first ``warmup`` seconds.

    ``thermostat_cycles`` counts off-to-on fan transitions over the whole run.
    """
    post = traj["t"] >= warmup
    if not post.any():
        raise ValueError("warm-up window covers the whole trajectory")
    T = traj["T_air"][post]
    co2 = traj["CO2"][post]
    running = traj["V_total"] > 0
    starts = int(np.count_nonzero(running[1:] & ~running[:-1]))
    return EpisodeMetrics(
        total_kwh=float(np.sum(traj["Q_coil"]) * traj.dt / J_PER_KWH),
        temp_rmse_post_warmup=float(np.sqrt(np.mean((T - p.T_set) ** 2))),
        max_co2=float(co2.max()),
        pct_time_co2_over_limit=float(100.0 * np.mean(co2 > p.CO2_limit)),
        thermostat_cycles=starts,
        comfort_band_occupancy=float(100.0 * np.mean(np.abs(T - p.T_set) <= COMFORT_BAND)),
    )


def economizer_activity(traj: Trajectory, deadband: float = 2000.0,
                        P_atm: float = psychro.P_ATM) -> np.ndarray:
    """Replay the free-cooling hysteresis from recorded states; True where it was active."""
    W_out = psychro.humidity_ratio_array(traj["T_out"], traj["RH_out"], P_atm)
    h_in = psychro.moist_air_enthalpy_array(traj["T_air"], traj["w"])
    h_out = psychro.moist_air_enthalpy_array(traj["T_out"], W_out)
    active = np.zeros(len(traj), dtype=bool)
    state = False
    for i, (hi, ho) in enumerate(zip(h_in.tolist(), h_out.tolist())):
        state = free_cooling_decision(state, hi, ho, deadband)
        active[i] = state
    return active


def _indoor_rh(T: np.ndarray, w: np.ndarray, P_atm: float) -> np.ndarray:
    """Relative humidity in percent; NaN where the zone left the psychrometric range."""
    rh = np.full(len(T), np.nan)
    ok = (T >= psychro.T_MIN) & (T <= psychro.T_MAX)
    rh[ok] = psychro.relative_humidity_array(T[ok], w[ok], P_atm)
    return rh


def _policy_interval(policy: Policy, scenario: Scenario) -> float:
    return float(policy.metadata.get("control_interval_s", scenario.ppo.control_interval_s))


def run_episode(mode: Mode | str, policy: Policy | None = None, scenario: Scenario = NOMINAL,
                control_interval: float | None = None) -> tuple[Trajectory, EpisodeMetrics]:
    """Simulate one episode of ``scenario`` under ``mode``.

    Learned modes query ``policy`` deterministically once per control
    interval (the policy's own training interval unless overridden) and hold
    the action in between.
    """
    mode = Mode.parse(mode)
    if mode.is_rl and policy is None:
        raise ConfigError(f"mode {mode.value} needs a trained policy")
    if not mode.is_rl and policy is not None:
        raise ConfigError(f"mode {mode.value} does not take a policy")
    sim = ZoneSimulator(scenario, mode, record=True)
    if mode.is_rl:
        interval = control_interval or _policy_interval(policy, scenario)
        k = int(round(interval / sim.dt))
        if k < 1 or abs(k * sim.dt - interval) > 1e-9:
            raise ConfigError(f"control interval {interval} s must be a positive multiple of dt")
        p = scenario.building
        while not sim.done:
            obs = observe(sim.T_air, p)
            sim.run(k, policy.predict(np.array(obs)).u)
    else:
        sim.run()

    cols = sim.recorded_arrays()
    p = scenario.building
    cols["RH_in"] = _indoor_rh(cols["T_air"], cols["w"], p.P_atm)
    cols["Q_coil"] = cols["Q_sensible"] + cols["Q_latent"]
    cols["reward"] = -((cols["T_air"] - p.T_set) ** 2)
    traj = Trajectory({k: cols[k] for k in TRAJECTORY_FIELDS}, sim.dt, sim.state)
    return traj, compute_metrics(traj, p, scenario.simulation.warmup)


def savings_pct(reference_kwh: float, kwh: float) -> float:
    return 100.0 * (reference_kwh - kwh) / reference_kwh


@dataclass
class ComparisonReport:
    scenario_hash: str
    per_mode: dict[str, EpisodeMetrics]
    savings_pct_vs_best_baseline: dict[str, float] = field(default_factory=dict)
    pairwise_savings_pct: dict[str, dict[str, float]] = field(default_factory=dict)
    best_baseline: str | None = None

    def to_dict(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "best_baseline": self.best_baseline,
            "per_mode": {m: v.to_dict() for m, v in self.per_mode.items()},
            "savings_pct_vs_best_baseline": self.savings_pct_vs_best_baseline,
            "pairwise_savings_pct": self.pairwise_savings_pct,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def table(self) -> str:
        head = ("mode", "kWh", "RMSE °C", "max CO2", "%>limit", "cycles", "%band", "save %")
        lines = [head]
        for m, r in self.per_mode.items():
            save = self.savings_pct_vs_best_baseline.get(m)
            lines.append((m, f"{r.total_kwh:.1f}", f"{r.temp_rmse_post_warmup:.3f}",
                          f"{r.max_co2:.1f}", f"{r.pct_time_co2_over_limit:.2f}",
                          str(r.thermostat_cycles), f"{r.comfort_band_occupancy:.1f}",
                          "-" if save is None else f"{save:+.2f}"))
        widths = [max(len(row[j]) for row in lines) for j in range(len(head))]
        out = []
        for n, row in enumerate(lines):
            out.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w)
                                 for j, (c, w) in enumerate(zip(row, widths))))
            if n == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out) + "\n"


def compare(modes: Iterable[Mode | str], policies: Mapping[Mode, Policy] | None = None,
            scenario: Scenario = NOMINAL) -> ComparisonReport:
    """Run every mode on the same scenario and tabulate energy savings.

    Savings are relative to the lowest-energy baseline (on/off or PID) present.
    """
    policies = {Mode.parse(k): v for k, v in (policies or {}).items()}
    per_mode: dict[str, EpisodeMetrics] = {}
    for mode in map(Mode.parse, modes):
        _, metrics = run_episode(mode, policies.get(mode) if mode.is_rl else None, scenario)
        per_mode[mode.value] = metrics

    report = ComparisonReport(scenario.hash(), per_mode)
    baselines = {m.value: per_mode[m.value].total_kwh for m in BASELINES if m.value in per_mode}
    if baselines:
        best = min(baselines, key=baselines.get)
        report.best_baseline = best
        report.savings_pct_vs_best_baseline = {
            m: savings_pct(baselines[best], r.total_kwh) for m, r in per_mode.items()}
    report.pairwise_savings_pct = {
        ref: {m: savings_pct(per_mode[ref].total_kwh, r.total_kwh)
              for m, r in per_mode.items() if m != ref}
        for ref in per_mode}
    return report


def mean_std(values: Iterable[float]) -> tuple[float, float]:
    """Sample mean and standard deviation (0 for a single value)."""
    vals = list(values)
    if not vals:
        raise ValueError("mean_std of an empty sequence")
    return statistics.fmean(vals), (statistics.stdev(vals) if len(vals) > 1 else 0.0)

