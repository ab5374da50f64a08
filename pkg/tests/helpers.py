import numpy as np

from ahubench.rl.policy import Policy


def constant_policy(u: float, mode: str = "ppo", interval: float = 60.0) -> Policy:
    """Policy whose deterministic action is ``u`` for every observation."""
    pol = Policy.init(np.random.default_rng(0), (4,))
    for W in pol.actor.weights:
        W[...] = 0.0
    pol.actor.biases[-1][...] = u
    pol.metadata = {"mode": mode, "control_interval_s": interval, "seed": 0}
    return pol
