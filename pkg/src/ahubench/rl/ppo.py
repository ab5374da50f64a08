"""Clipped-surrogate PPO with GAE, written against :class:`~ahubench.rl.network.MLP`.

Everything runs in float64 numpy on one thread, and all randomness flows
from a single ``numpy.random.Generator`` seeded from the config, so a
given (scenario, config) pair always produces the same policy bit for bit.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ahubench.control import Mode
from ahubench.errors import TrainingError
from ahubench.rl.config import PpoConfig
from ahubench.rl.env import AhuEnv
from ahubench.rl.policy import LOG_2PI, Policy, clip_action, creation_stamp
from ahubench.scenario import Scenario

log = logging.getLogger(__name__)

PROGRESS_FIELDS = ("update_index", "timesteps", "mean_episode_reward", "policy_loss",
                   "value_loss", "entropy")


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, last_value: float,
                gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalised advantage estimates and value targets.

    ``dones[t]`` is 1 when the episode ended after step ``t``; ``last_value``
    bootstraps the step following the final one.
    """
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        next_value = last_value if t == n - 1 else values[t + 1]
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + values


@dataclass
class LossInfo:
    loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def ppo_loss_and_grads(pol: Policy, obs: np.ndarray, raw: np.ndarray, old_logp: np.ndarray,
                       adv: np.ndarray, returns: np.ndarray, clip_ratio: float,
                       value_coef: float, entropy_coef: float,
                       normalize_advantages: bool = True) -> tuple[LossInfo, list[np.ndarray]]:
    """Loss ``-E[min(rA, clip(r)A)] + c_v E[(R - V)^2] - c_e H`` and its gradient.

    Gradients are returned in :meth:`Policy.params` order.
    """
    B = len(raw)
    if normalize_advantages and B > 1:
        adv = (adv - adv.mean()) / (adv.std(ddof=1) + 1e-8)

    mu_out, actor_acts = pol.actor.forward_cached(obs)
    mu = mu_out[:, 0]
    v_out, critic_acts = pol.critic.forward_cached(obs)
    v = v_out[:, 0]

    log_std = pol.log_std[0]
    sigma = math.exp(log_std)
    z = (raw - mu) / sigma
    logp = -0.5 * z * z - log_std - 0.5 * LOG_2PI
    log_ratio = logp - old_logp
    ratio = np.exp(log_ratio)
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * adv
    policy_loss = -float(np.mean(np.minimum(surr1, surr2)))
    value_err = v - returns
    value_loss = float(np.mean(value_err * value_err))
    entropy = log_std + 0.5 + 0.5 * LOG_2PI
    loss = policy_loss + value_coef * value_loss - entropy_coef * entropy

    # min() selects the unclipped branch wherever surr1 <= surr2; elsewhere the
    # clipped branch is active and flat in the ratio.
    g_ratio = np.where(surr1 <= surr2, -adv / B, 0.0)
    g_logp = g_ratio * ratio
    g_mu = g_logp * z / sigma
    g_log_std = float(np.sum(g_logp * (z * z - 1.0))) - entropy_coef
    g_v = value_coef * 2.0 * value_err / B

    grads = (pol.actor.backward(actor_acts, g_mu[:, None])
             + [np.array([g_log_std])]
             + pol.critic.backward(critic_acts, g_v[:, None]))
    info = LossInfo(
        loss=float(loss), policy_loss=policy_loss, value_loss=value_loss, entropy=float(entropy),
        approx_kl=float(np.mean((ratio - 1.0) - log_ratio)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > clip_ratio)),
    )
    return info, grads


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``; return the original norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    coef = max_norm / (total + 1e-6)
    if coef < 1.0:
        for g in grads:
            g *= coef
    return total


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, eps: float = 1e-8,
                 betas: tuple[float, float] = (0.9, 0.999)):
        self.params = params
        self.lr = lr
        self.eps = eps
        self.b1, self.b2 = betas
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class UpdateStats:
    update_index: int
    timesteps: int
    mean_episode_reward: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float = 0.0
    clip_fraction: float = 0.0

    def row(self) -> list:
        return [getattr(self, k) for k in PROGRESS_FIELDS]


@dataclass
class EpisodeRecord:
    timesteps: int
    total_reward: float
    length: int

    @property
    def mean_reward(self) -> float:
        return self.total_reward / self.length


@dataclass
class PPOTrainer:
    scenario: Scenario
    cfg: PpoConfig
    mode: Mode = Mode.PPO_FIXED
    updates: list[UpdateStats] = field(default_factory=list)
    episodes: list[EpisodeRecord] = field(default_factory=list)
    reward_window: int = 10

    def train(self, on_update: Callable[[UpdateStats], None] | None = None) -> Policy:
        cfg = self.cfg
        self.mode = Mode.parse(self.mode)
        rng = np.random.default_rng(cfg.seed)
        pol = Policy.init(rng, cfg.hidden_sizes, cfg.init_log_std)
        env = AhuEnv(self.scenario, self.mode, control_interval=cfg.control_interval_s,
                     randomize_phase=cfg.randomize_phase, rng=rng)
        opt = Adam(pol.params(), cfg.learning_rate, cfg.adam_eps)

        n = cfg.rollout_length
        obs_buf = np.zeros((n, 2))
        raw_buf = np.zeros(n)
        logp_buf = np.zeros(n)
        val_buf = np.zeros(n)
        rew_buf = np.zeros(n)
        done_buf = np.zeros(n)

        obs = env.reset().as_array()
        ep_total, ep_len = 0.0, 0
        timesteps = 0
        update_index = 0
        while timesteps < cfg.total_timesteps:
            sigma = math.exp(pol.log_std[0])
            for k in range(n):
                x = obs[None, :]
                mu = pol.actor.forward(x)[0, 0]
                value = pol.critic.forward(x)[0, 0]
                raw = mu + sigma * rng.standard_normal()
                z = (raw - mu) / sigma
                next_obs, r, done = env.step(clip_action(raw))
                ep_total += r
                ep_len += 1
                timesteps += 1
                next_arr = next_obs.as_array()
                if done:
                    # time-limit truncation: bootstrap from the final state
                    r = r + cfg.gamma * pol.critic.forward(next_arr[None, :])[0, 0]
                    self.episodes.append(EpisodeRecord(timesteps, ep_total, ep_len))
                    ep_total, ep_len = 0.0, 0
                    next_arr = env.reset().as_array()
                obs_buf[k] = obs
                raw_buf[k] = raw
                logp_buf[k] = -0.5 * z * z - pol.log_std[0] - 0.5 * LOG_2PI
                val_buf[k] = value
                rew_buf[k] = r
                done_buf[k] = float(done)
                obs = next_arr

            last_value = pol.critic.forward(obs[None, :])[0, 0]
            adv, returns = compute_gae(rew_buf, val_buf, done_buf, last_value,
                                       cfg.gamma, cfg.gae_lambda)

            snapshot = pol.copy()
            infos = []
            # divergence is detected explicitly below, so silence numpy's overflow chatter
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                self._update(pol, opt, rng, snapshot, timesteps, update_index, infos,
                             obs_buf, raw_buf, logp_buf, adv, returns)
            if not pol.is_finite():
                snapshot.metadata = self._metadata(timesteps - n)
                raise TrainingError(f"non-finite parameters after update {update_index}",
                                    last_good=snapshot)

            recent = self.episodes[-self.reward_window:]
            stats = UpdateStats(
                update_index=update_index,
                timesteps=timesteps,
                mean_episode_reward=(float(np.mean([e.total_reward for e in recent]))
                                     if recent else float("nan")),
                policy_loss=float(np.mean([i.policy_loss for i in infos])),
                value_loss=float(np.mean([i.value_loss for i in infos])),
                entropy=float(np.mean([i.entropy for i in infos])),
                approx_kl=float(np.mean([i.approx_kl for i in infos])),
                clip_fraction=float(np.mean([i.clip_fraction for i in infos])),
            )
            self.updates.append(stats)
            log.info("update %d  steps %d  ep_reward %.2f  pg %.4f  vf %.3f  std %.3f",
                     update_index, timesteps, stats.mean_episode_reward, stats.policy_loss,
                     stats.value_loss, math.exp(pol.log_std[0]))
            if on_update is not None:
                on_update(stats)
            update_index += 1

        pol.metadata = self._metadata(timesteps)
        return pol

    def _update(self, pol: Policy, opt: Adam, rng: np.random.Generator, snapshot: Policy,
                timesteps: int, update_index: int, infos: list[LossInfo], obs_buf: np.ndarray,
                raw_buf: np.ndarray, logp_buf: np.ndarray, adv: np.ndarray,
                returns: np.ndarray) -> None:
        cfg = self.cfg
        n = cfg.rollout_length
        for _ in range(cfg.epochs_per_update):
            perm = rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                idx = perm[start:start + cfg.minibatch_size]
                info, grads = ppo_loss_and_grads(
                    pol, obs_buf[idx], raw_buf[idx], logp_buf[idx], adv[idx], returns[idx],
                    cfg.clip_ratio, cfg.value_coef, cfg.entropy_coef)
                if not (math.isfinite(info.loss) and all(np.all(np.isfinite(g)) for g in grads)):
                    snapshot.metadata = self._metadata(timesteps - n)
                    raise TrainingError(
                        f"non-finite loss at update {update_index}", last_good=snapshot)
                clip_grad_norm(grads, cfg.max_grad_norm)
                opt.step(grads)
                infos.append(info)

    def _metadata(self, timesteps: int) -> dict:
        cfg = self.cfg
        return {
            "seed": cfg.seed,
            "timesteps": timesteps,
            "created": creation_stamp(),
            "mode": self.mode.value,
            "control_interval_s": cfg.control_interval_s,
            "scenario_hash": self.scenario.hash(exclude_controller=True),
        }

    def write_progress(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(PROGRESS_FIELDS)
            for s in self.updates:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in s.row()])


def ppo_train(scenario: Scenario, cfg: PpoConfig | None = None,
              mode: Mode | str = Mode.PPO_FIXED) -> Policy:
    return PPOTrainer(scenario, cfg or scenario.ppo, Mode.parse(mode)).train()
