import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ahubench.control import Mode
from ahubench.errors import ConfigError, PolicyFormatError, TrainingError
from ahubench.rl.config import PpoConfig
from ahubench.rl.env import AhuEnv, observe, reward
from ahubench.rl.network import MLP, orthogonal
from ahubench.rl.policy import Policy, clip_action, policy_load, policy_save
from ahubench.rl.ppo import Adam, PPOTrainer, clip_grad_norm, compute_gae, ppo_loss_and_grads
from ahubench.scenario import NOMINAL, Scenario, SimulationConfig

P = NOMINAL.building


def short_scenario(hours=2, **ppo):
    cfg = dict(total_timesteps=256, rollout_length=64, minibatch_size=16, epochs_per_update=2,
               hidden_sizes=(8, 8), seed=3)
    cfg.update(ppo)
    return replace(NOMINAL, simulation=SimulationConfig(duration=hours * 3600.0, warmup=600.0),
                   ppo=PpoConfig(**cfg))


class TestNetwork:
    def test_orthogonal_columns(self):
        W = orthogonal(np.random.default_rng(0), 8, 4, 2.0)
        np.testing.assert_allclose(W.T @ W, 4.0 * np.eye(4), atol=1e-12)

    def test_orthogonal_rows_when_wide(self):
        W = orthogonal(np.random.default_rng(0), 2, 64, 1.0)
        np.testing.assert_allclose(W @ W.T, np.eye(2), atol=1e-12)

    def test_zero_weight_actor_outputs_zero(self):
        pol = Policy.init(np.random.default_rng(0), (4, 4))
        for W in pol.actor.weights:
            W[...] = 0.0
        for b in pol.actor.biases:
            b[...] = 0.0
        obs = np.random.default_rng(1).normal(size=(10, 2))
        assert np.all(pol.mean(obs) == 0.0)
        assert pol.predict(obs[0]).u == 0.0

    def test_forward_cached_agrees(self):
        net = MLP.init(np.random.default_rng(0), [2, 5, 3, 1], out_gain=1.0)
        x = np.random.default_rng(1).normal(size=(7, 2))
        out, acts = net.forward_cached(x)
        np.testing.assert_array_equal(out, net.forward(x))
        assert len(acts) == 3


class TestActionClipping:
    @pytest.mark.parametrize("raw, u", [(1.7, 1.0), (-0.5, 0.0), (0.3, 0.3)])
    def test_values(self, raw, u):
        assert clip_action(raw) == u

    @given(st.floats(-1e6, 1e6))
    def test_idempotent(self, a):
        assert clip_action(clip_action(a)) == clip_action(a)


class TestObservationAndReward:
    @pytest.mark.parametrize("T, err", [(22.0, 0.0), (25.0, -3.0), (19.0, 3.0)])
    def test_observation(self, T, err):
        assert tuple(observe(T, P)) == (T, err)

    @pytest.mark.parametrize("T, r", [(22.0, 0.0), (24.0, -4.0), (19.0, -9.0)])
    def test_reward(self, T, r):
        assert reward(T, P) == r

    @given(st.floats(0, 40), st.floats(0, 40), st.floats(0, 0.02))
    def test_reward_depends_only_on_temperature(self, T, Tw, w):
        from ahubench.plant import ZoneState
        a = ZoneState(T, Tw, w, 500.0)
        b = ZoneState(T, 0.0, 0.0, 900.0)
        assert reward(a.T_air, P) == reward(b.T_air, P)
        assert observe(a, P) == observe(b, P)


class TestEnv:
    def test_interval_reward_is_mean_and_improves_when_cooling(self):
        env = AhuEnv(short_scenario())
        obs = env.reset()
        assert obs.T_air == 25.0
        _, r1, done = env.step(1.0)
        assert r1 <= 0 and not done
        assert -9.0 < r1
        _, r2, _ = env.step(1.0)
        assert r2 > r1

    def test_episode_length_and_done(self):
        env = AhuEnv(short_scenario(hours=1))
        env.reset()
        assert env.episode_length == 60
        dones = [env.step(0.5)[2] for _ in range(60)]
        assert dones[-1] and not any(dones[:-1])
        with pytest.raises(RuntimeError):
            env.step(0.5)

    def test_action_is_clipped(self):
        a = AhuEnv(short_scenario(hours=1))
        b = AhuEnv(short_scenario(hours=1))
        a.reset()
        b.reset()
        assert a.step(7.0) == b.step(1.0)

    def test_baseline_mode_rejected(self):
        with pytest.raises(ConfigError):
            AhuEnv(NOMINAL, Mode.PID)

    def test_interval_must_divide(self):
        with pytest.raises(ConfigError):
            AhuEnv(NOMINAL, control_interval=2.5 if NOMINAL.simulation.dt == 1.0 else 0.3)

    def test_temperature_path_same_in_both_learned_modes(self):
        ends = []
        for mode in (Mode.PPO_FIXED, Mode.PPO_ECON):
            env = AhuEnv(short_scenario(), mode)
            env.reset()
            obs = [env.step(u)[0].T_air for u in np.linspace(0, 1, 50)]
            ends.append(obs)
        np.testing.assert_allclose(ends[0], ends[1], rtol=0, atol=1e-9)


class TestGae:
    rewards = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
    values = np.array([0.3, 0.1, -0.4, 0.8, 0.2])
    gamma = 0.9

    def test_lambda_zero_is_td_error(self):
        dones = np.array([0, 0, 0, 0, 1.0])
        adv, ret = compute_gae(self.rewards, self.values, dones, 99.0, self.gamma, 0.0)
        nxt = np.append(self.values[1:], 0.0)
        np.testing.assert_allclose(adv, self.rewards + self.gamma * nxt - self.values, rtol=1e-14)
        np.testing.assert_allclose(ret, adv + self.values)

    def test_lambda_one_is_discounted_return(self):
        dones = np.array([0, 0, 0, 0, 1.0])
        adv, _ = compute_gae(self.rewards, self.values, dones, 99.0, self.gamma, 1.0)
        G = np.zeros(5)
        running = 0.0
        for t in range(4, -1, -1):
            running = self.rewards[t] + self.gamma * running
            G[t] = running
        np.testing.assert_allclose(adv, G - self.values, rtol=1e-13)

    def test_bootstrap_without_terminal(self):
        adv, _ = compute_gae(np.zeros(1), np.zeros(1), np.zeros(1), 2.0, 0.5, 0.95)
        assert adv[0] == 1.0

    def test_episode_boundary_blocks_propagation(self):
        dones = np.array([0, 1.0, 0, 0, 0])
        adv, _ = compute_gae(self.rewards, self.values, dones, 0.0, self.gamma, 0.95)
        first, _ = compute_gae(self.rewards[:2], self.values[:2], dones[:2], 123.0, self.gamma, 0.95)
        np.testing.assert_allclose(adv[:2], first)


def tiny_batch(seed=0, spread=0.05):
    rng = np.random.default_rng(seed)
    pol = Policy.init(rng, (4, 4), init_log_std=-0.3)
    for p in pol.params():
        p += 0.3 * rng.standard_normal(p.shape)
    obs = rng.normal(size=(8, 2)) * np.array([2.0, 1.0]) + np.array([22.0, 0.0])
    raw = pol.mean(obs) + 0.5 * rng.standard_normal(8)
    logp = pol.log_prob(obs, raw)
    old_logp = logp + spread * rng.standard_normal(8)
    adv = rng.standard_normal(8)
    ret = rng.standard_normal(8)
    return pol, obs, raw, old_logp, adv, ret


def numeric_grads(pol, batch_args, h=1e-6, **kw):
    out = []
    for p in pol.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = ppo_loss_and_grads(pol, *batch_args, **kw)[0].loss
            p[idx] = orig - h
            down = ppo_loss_and_grads(pol, *batch_args, **kw)[0].loss
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


class TestPpoLoss:
    @pytest.mark.parametrize("seed, spread", [(0, 0.05), (1, 0.6), (2, 0.3)])
    def test_gradient_matches_finite_differences(self, seed, spread):
        pol, *batch = tiny_batch(seed, spread)
        kw = dict(clip_ratio=0.2, value_coef=0.5, entropy_coef=0.01)
        _, analytic = ppo_loss_and_grads(pol, *batch, **kw)
        numeric = numeric_grads(pol, batch, **kw)
        a = np.concatenate([g.ravel() for g in analytic])
        n = np.concatenate([g.ravel() for g in numeric])
        rel = np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n))
        assert rel <= 1e-4

    def test_inside_clip_range_matches_unclipped(self):
        pol, obs, raw, old, adv, ret = tiny_batch(4, spread=0.02)
        ratio = np.exp(pol.log_prob(obs, raw) - old)
        assert np.all(np.abs(ratio - 1) < 0.2)
        _, clipped = ppo_loss_and_grads(pol, obs, raw, old, adv, ret, 0.2, 0.0, 0.0)
        _, plain = ppo_loss_and_grads(pol, obs, raw, old, adv, ret, 1e9, 0.0, 0.0)
        for a, b in zip(clipped, plain):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_clipped_samples_give_no_policy_gradient(self):
        pol, obs, raw, _, _, ret = tiny_batch(5)
        old = pol.log_prob(obs, raw) - 1.0  # ratio = e > 1.2
        adv = np.abs(np.random.default_rng(0).normal(size=8)) + 0.1
        _, grads = ppo_loss_and_grads(pol, obs, raw, old, adv, ret, 0.2, 0.0, 0.0,
                                      normalize_advantages=False)
        n_actor = len(pol.actor.params()) + 1
        assert all(np.all(g == 0) for g in grads[:n_actor])

    def test_grad_norm_clip(self):
        grads = [np.array([3.0]), np.array([4.0])]
        norm = clip_grad_norm(grads, 0.5)
        assert norm == 5.0
        assert math.hypot(grads[0][0], grads[1][0]) == pytest.approx(0.5, rel=1e-5)

    def test_adam_moves_against_gradient(self):
        p = np.array([1.0, -1.0])
        opt = Adam([p], lr=0.1)
        opt.step([np.array([2.0, -3.0])])
        np.testing.assert_allclose(p, [0.9, -0.9], rtol=1e-6)


class TestPolicyFile:
    def test_round_trip_bitwise(self, tmp_path):
        pol = Policy.init(np.random.default_rng(7), (16, 16), metadata={"seed": 7})
        path = tmp_path / "p.json"
        policy_save(pol, path)
        back = policy_load(path)
        obs = np.random.default_rng(8).normal(size=(100, 2)) * 3 + [22, 0]
        for o in obs:
            assert back.predict(o) == pol.predict(o)
        assert back.metadata == {"seed": 7}

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "p.json"
        policy_save(Policy.init(np.random.default_rng(0), (4,)), path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(PolicyFormatError):
            policy_load(path)

    def test_wrong_version(self, tmp_path):
        doc = Policy.init(np.random.default_rng(0), (4,)).to_dict()
        doc["format_version"] = 99
        path = tmp_path / "p.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(PolicyFormatError, match="format_version 99"):
            policy_load(path)

    def test_bad_shapes(self):
        doc = Policy.init(np.random.default_rng(0), (4,)).to_dict()
        doc["actor"]["weights"][0] = [[0.0]]
        with pytest.raises(PolicyFormatError):
            Policy.from_dict(doc)

    def test_non_finite(self):
        doc = Policy.init(np.random.default_rng(0), (4,)).to_dict()
        doc["log_std"] = [float("nan")]
        with pytest.raises(PolicyFormatError):
            Policy.from_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PolicyFormatError):
            policy_load(tmp_path / "absent.json")

    def test_save_failure_leaves_old_file(self, tmp_path, monkeypatch):
        path = tmp_path / "p.json"
        first = Policy.init(np.random.default_rng(0), (4,))
        policy_save(first, path)
        before = path.read_bytes()

        def boom(*a, **k):
            raise OSError("disk full")
        monkeypatch.setattr("ahubench.rl.policy.os.replace", boom)
        with pytest.raises(OSError):
            policy_save(Policy.init(np.random.default_rng(1), (4,)), path)
        assert path.read_bytes() == before
        assert [p.name for p in tmp_path.iterdir()] == ["p.json"]

    def test_created_from_source_date_epoch(self, monkeypatch):
        from ahubench.rl.policy import creation_stamp
        monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
        assert creation_stamp() is None
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        assert creation_stamp() == "1970-01-01T00:00:00+00:00"


class TestTrainer:
    def test_same_seed_same_policy(self):
        sc = short_scenario()
        a = PPOTrainer(sc, sc.ppo).train()
        b = PPOTrainer(sc, sc.ppo).train()
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_different_seed_differs(self):
        sc = short_scenario()
        a = PPOTrainer(sc, sc.ppo).train()
        b = PPOTrainer(sc, replace(sc.ppo, seed=4)).train()
        assert a.to_dict() != b.to_dict()

    def test_metadata_and_progress(self, tmp_path):
        sc = short_scenario()
        trainer = PPOTrainer(sc, sc.ppo, Mode.PPO_ECON)
        seen = []
        pol = trainer.train(on_update=seen.append)
        assert pol.metadata["mode"] == "ppo-econ"
        assert pol.metadata["seed"] == 3
        assert pol.metadata["timesteps"] >= 256
        assert pol.metadata["scenario_hash"] == sc.hash(exclude_controller=True)
        assert len(seen) == 4 and [s.update_index for s in seen] == [0, 1, 2, 3]
        trainer.write_progress(tmp_path / "prog.csv")
        lines = (tmp_path / "prog.csv").read_text().splitlines()
        assert lines[0].startswith("update_index,timesteps")
        assert len(lines) == 5

    def test_episodes_recorded(self):
        sc = short_scenario(hours=1)
        trainer = PPOTrainer(sc, sc.ppo)
        trainer.train()
        assert trainer.episodes and all(e.length == 60 for e in trainer.episodes)

    def test_divergence_reports_last_good_policy(self):
        sc = short_scenario(learning_rate=1e300, max_grad_norm=1e300)
        with pytest.raises(TrainingError) as info:
            PPOTrainer(sc, sc.ppo).train()
        assert info.value.last_good is not None
        assert info.value.last_good.is_finite()

    def test_short_training_beats_random_init(self):
        sc = short_scenario(hours=6, total_timesteps=12 * 360, rollout_length=360,
                            minibatch_size=60, epochs_per_update=10, learning_rate=1e-3)
        trained = PPOTrainer(sc, sc.ppo).train()
        untrained = Policy.init(np.random.default_rng(sc.ppo.seed), sc.ppo.hidden_sizes)

        def episode_return(pol):
            env = AhuEnv(sc)
            obs, total, done = env.reset(), 0.0, False
            while not done:
                obs, r, done = env.step(pol.predict(obs.as_array()).u)
                total += r
            return total
        assert episode_return(trained) > episode_return(untrained)


def test_ppo_config_validation():
    with pytest.raises(ConfigError):
        PpoConfig(rollout_length=100, minibatch_size=64)
    with pytest.raises(ConfigError):
        PpoConfig(gamma=0.0)
    with pytest.raises(ConfigError):
        PpoConfig(hidden_sizes=())
    assert isinstance(Scenario().ppo, PpoConfig)
