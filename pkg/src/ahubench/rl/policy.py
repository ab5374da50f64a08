"""Gaussian actor-critic policy and its JSON file format."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from ahubench.errors import PolicyFormatError
from ahubench.rl.network import MLP

FORMAT_VERSION = 1
OBS_DIM = 2
ACT_DIM = 1
LOG_2PI = math.log(2.0 * math.pi)


class Action(NamedTuple):
    raw: float
    u: float


def clip_action(a: float) -> float:
    return min(1.0, max(0.0, a))


@dataclass
class Policy:
    actor: MLP
    critic: MLP
    log_std: np.ndarray = field(default_factory=lambda: np.zeros(ACT_DIM))
    metadata: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def init(cls, rng: np.random.Generator, hidden_sizes=(64, 64), init_log_std: float = 0.0,
             metadata: dict[str, Any] | None = None) -> Policy:
        sizes = [OBS_DIM, *hidden_sizes]
        actor = MLP.init(rng, sizes + [ACT_DIM], out_gain=0.01)
        critic = MLP.init(rng, sizes + [1], out_gain=1.0)
        return cls(actor, critic, np.full(ACT_DIM, float(init_log_std)), dict(metadata or {}))

    def params(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order: actor, log_std, critic."""
        return self.actor.params() + [self.log_std] + self.critic.params()

    def copy(self) -> Policy:
        return Policy(self.actor.copy(), self.critic.copy(), self.log_std.copy(), dict(self.metadata))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.params())

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return self.actor.forward(np.atleast_2d(np.asarray(obs, dtype=float)))[:, 0]

    def value(self, obs: np.ndarray) -> np.ndarray:
        return self.critic.forward(np.atleast_2d(np.asarray(obs, dtype=float)))[:, 0]

    def predict(self, obs, deterministic: bool = True,
                rng: np.random.Generator | None = None) -> Action:
        if not np.all(np.isfinite(obs)):
            raise ValueError(f"observation must be finite, got {obs}")
        raw = float(self.mean(obs)[0])
        if not deterministic:
            if rng is None:
                raise ValueError("stochastic prediction needs an rng")
            raw += float(np.exp(self.log_std[0])) * float(rng.standard_normal())
        return Action(raw, clip_action(raw))

    def log_prob(self, obs: np.ndarray, raw: np.ndarray) -> np.ndarray:
        mu = self.mean(obs)
        z = (np.asarray(raw, dtype=float) - mu) / np.exp(self.log_std[0])
        return -0.5 * z * z - self.log_std[0] - 0.5 * LOG_2PI

    # --- serialisation --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "metadata": self.metadata,
            "actor": _mlp_to_dict(self.actor),
            "log_std": self.log_std.tolist(),
            "critic": _mlp_to_dict(self.critic),
        }

    @classmethod
    def from_dict(cls, doc: Any) -> Policy:
        if not isinstance(doc, dict):
            raise PolicyFormatError("policy document must be a JSON object")
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise PolicyFormatError(
                f"unsupported policy format_version {version!r} (this build reads {FORMAT_VERSION})")
        try:
            actor = _mlp_from_dict(doc["actor"], "actor", ACT_DIM)
            critic = _mlp_from_dict(doc["critic"], "critic", 1)
            log_std = np.asarray(doc["log_std"], dtype=float)
            metadata = doc.get("metadata", {})
        except KeyError as exc:
            raise PolicyFormatError(f"policy file is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise PolicyFormatError(f"malformed policy arrays: {exc}") from None
        if log_std.shape != (ACT_DIM,):
            raise PolicyFormatError(f"log_std must have shape ({ACT_DIM},), got {log_std.shape}")
        if not isinstance(metadata, dict):
            raise PolicyFormatError("metadata must be an object")
        pol = cls(actor, critic, log_std, metadata)
        if not pol.is_finite():
            raise PolicyFormatError("policy contains non-finite weights")
        return pol


def _mlp_to_dict(net: MLP) -> dict[str, Any]:
    return {
        "layer_dims": net.sizes,
        "weights": [W.tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def _mlp_from_dict(doc: dict[str, Any], name: str, out_dim: int) -> MLP:
    dims = [int(d) for d in doc["layer_dims"]]
    weights = [np.asarray(W, dtype=float) for W in doc["weights"]]
    biases = [np.asarray(b, dtype=float) for b in doc["biases"]]
    if len(dims) < 2 or dims[0] != OBS_DIM or dims[-1] != out_dim:
        raise PolicyFormatError(f"{name}: layer_dims {dims} incompatible with obs dim {OBS_DIM} "
                                f"and output dim {out_dim}")
    if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
        raise PolicyFormatError(f"{name}: expected {len(dims) - 1} weight/bias pairs")
    for k, (W, b) in enumerate(zip(weights, biases)):
        if W.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
            raise PolicyFormatError(
                f"{name}: layer {k} has shapes {W.shape}/{b.shape}, expected "
                f"({dims[k]}, {dims[k + 1]})/({dims[k + 1]},)")
    return MLP(weights, biases)


def creation_stamp() -> str | None:
    """UTC timestamp taken from ``SOURCE_DATE_EPOCH`` when set; ``None`` otherwise.

    Wall-clock time is deliberately not used so that identical training runs
    write identical files.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def policy_save(pol: Policy, path: str | Path) -> None:
    """Write atomically: a crash never leaves a half-written policy at ``path``."""
    path = Path(path)
    text = json.dumps(pol.to_dict(), indent=1, sort_keys=True) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def policy_load(path: str | Path) -> Policy:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise PolicyFormatError(f"policy file not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyFormatError(f"{path}: not valid JSON ({exc})") from None
    return Policy.from_dict(doc)
