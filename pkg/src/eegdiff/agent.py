"""Actor-critic agent that chooses the three loss weights of the generator.

The actor maps a state (mean features of a generated batch) to weights in
(0, 1) through a sigmoid; exploration adds Gaussian noise and clamps to
``[ACTION_FLOOR, 1]``. The critic scores (state, action) pairs. Targets
follow the usual deterministic policy-gradient recipe with slowly tracking
target copies of both networks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
import torch

from eegdiff import features as fx
from eegdiff.nets import (
    NetConfig,
    ParameterStore,
    as_tensor,
    class_net_forward,
    gradient_step,
    init_mlp,
    mlp_forward,
    soft_update,
    wavelet_net_forward,
)

ACTION_FLOOR = 0.01
ACTION_DIM = 3


@dataclass(frozen=True)
class LossWeights:
    w_d: float
    w_tf: float
    w_c: float

    def __post_init__(self):
        for name in ("w_d", "w_tf", "w_c"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or not ACTION_FLOOR - 1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name}={v} outside [{ACTION_FLOOR}, 1]")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.w_d, self.w_tf, self.w_c])

    @classmethod
    def from_array(cls, a) -> "LossWeights":
        a = np.asarray(a, dtype=np.float64).reshape(-1)
        if a.size != ACTION_DIM:
            raise ValueError(f"need {ACTION_DIM} weights, got {a.size}")
        return cls(*map(float, a))


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: LossWeights
    reward: float
    next_state: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.state, dtype=np.float64).reshape(-1)
        s2 = np.asarray(self.next_state, dtype=np.float64).reshape(-1)
        if s.shape != s2.shape:
            raise ValueError("state and next_state lengths differ")
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")
        object.__setattr__(self, "state", s)
        object.__setattr__(self, "next_state", s2)
        object.__setattr__(self, "reward", float(self.reward))


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._records: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._records)

    def push(self, tr: Transition) -> None:
        if len(self._records) < self.capacity:
            self._records.append(tr)
        else:
            self._records[self._next] = tr
        self._next = (self._next + 1) % self.capacity

    def records(self) -> list[Transition]:
        """Contents from oldest to newest."""
        if len(self._records) < self.capacity:
            return list(self._records)
        return self._records[self._next:] + self._records[:self._next]

    def sample(self, batch_size: int, seed) -> list[Transition]:
        """Uniform draw without replacement; ``seed`` may be an int or a Generator."""
        if batch_size > len(self._records):
            raise ValueError(f"cannot draw {batch_size} records from a buffer holding {len(self._records)}")
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self._records), size=batch_size, replace=False)
        return [self._records[i] for i in idx]

    # flat array form, used by checkpoints
    def to_arrays(self) -> dict[str, np.ndarray]:
        recs = self.records()
        if not recs:
            return {"meta": np.array([self.capacity, 0, 0], dtype=np.float64)}
        return {
            "meta": np.array([self.capacity, len(recs), recs[0].state.size], dtype=np.float64),
            "states": np.stack([r.state for r in recs]),
            "actions": np.stack([r.action.as_array() for r in recs]),
            "rewards": np.array([r.reward for r in recs]),
            "next_states": np.stack([r.next_state for r in recs]),
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "ReplayBuffer":
        capacity, n, _ = (int(v) for v in arrays["meta"])
        buf = cls(capacity)
        for i in range(n):
            buf.push(Transition(arrays["states"][i], LossWeights.from_array(arrays["actions"][i]),
                                float(arrays["rewards"][i]), arrays["next_states"][i]))
        return buf


# ---------------------------------------------------------------- reward


@dataclass(frozen=True)
class RewardBreakdown:
    js_statistical: float
    js_informational: float
    js_nonlinear: float
    spectral_discrepancy: float
    total: float

    @classmethod
    def combine(cls, js_stat, js_info, js_nonlin, spectral) -> "RewardBreakdown":
        total = -((js_stat + js_info + js_nonlin) / 3.0 + spectral) / 2.0 + 0.0  # no -0.0
        return cls(float(js_stat), float(js_info), float(js_nonlin), float(spectral), float(total))

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class RewardReference:
    """Cached features of the reference batch, so each reward call only analyses the generated side."""

    features: np.ndarray  # (epochs * channels, 11)
    band_means: np.ndarray  # (4,)
    fs_hz: float

    @classmethod
    def from_batch(cls, batch, fs_hz: float) -> "RewardReference":
        batch = _as_batch(batch)
        return cls(fx.feature_matrix(batch), _band_means(batch, fs_hz), float(fs_hz))


def _as_batch(batch) -> np.ndarray:
    if hasattr(batch, "data") and callable(batch.data):
        batch = batch.data()
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ValueError("expected a non-empty (epochs, channels, samples) batch")
    if np.any(np.all(arr == 0, axis=-1)):
        raise ValueError("degenerate batch: some channel is identically zero")
    return arr


def _band_means(batch: np.ndarray, fs_hz: float) -> np.ndarray:
    return fx.band_proportion_array(batch, fs_hz).reshape(-1, len(fx.BANDS)).mean(axis=0)


def compute_reward(gen_batch, ref_batch, fs_hz: float = 250.0, bins: int = 32) -> RewardBreakdown:
    """Score how closely a generated batch matches the reference in time and frequency.

    ``ref_batch`` may be a precomputed ``RewardReference``.
    """
    gen = _as_batch(gen_batch)
    ref = ref_batch if isinstance(ref_batch, RewardReference) else RewardReference.from_batch(ref_batch, fs_hz)
    if ref.fs_hz != fs_hz:
        raise ValueError("reference was computed at a different sampling rate")
    gen_feats = fx.feature_matrix(gen)
    col = {name: i for i, name in enumerate(fx.FEATURE_NAMES)}
    group_scores = []
    for names in fx.FEATURE_GROUPS.values():
        js = []
        for name in names:
            p, q = fx.pooled_histograms(gen_feats[:, col[name]], ref.features[:, col[name]], bins)
            js.append(fx.js_divergence(p, q))
        group_scores.append(float(np.mean(js)))
    # total variation between the two band-proportion profiles, in [0, 1]
    spectral = 0.5 * float(np.sum(np.abs(_band_means(gen, fs_hz) - ref.band_means)))
    return RewardBreakdown.combine(*group_scores, spectral)


# ----------------------------------------------------------------- state


def build_state(gen_batch, wavelet_params: ParameterStore, class_params: ParameterStore,
                cfg: NetConfig) -> np.ndarray:
    """Batch-mean wavelet features followed by batch-mean classifier features."""
    x = np.asarray(gen_batch, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.shape[0] == 0:
        raise ValueError("cannot build a state from an empty batch")
    with torch.no_grad():
        wf, _ = wavelet_net_forward(wavelet_params, cfg, x, training=False)
        cf, _ = class_net_forward(class_params, cfg, x, training=False)
    return np.concatenate([wf.mean(dim=0).numpy(), cf.mean(dim=0).numpy()])


def epoch_features(x, wavelet_params: ParameterStore, class_params: ParameterStore, cfg: NetConfig,
                   batch: int = 256) -> np.ndarray:
    """Per-epoch wavelet and classifier features, one row per epoch."""
    x = np.asarray(x, dtype=np.float64)
    rows = []
    with torch.no_grad():
        for i in range(0, len(x), batch):
            wf, _ = wavelet_net_forward(wavelet_params, cfg, x[i:i + batch], training=False)
            cf, _ = class_net_forward(class_params, cfg, x[i:i + batch], training=False)
            rows.append(torch.cat([wf, cf], dim=1).numpy())
    return np.concatenate(rows)


@dataclass(frozen=True)
class StateScaler:
    """Standardize states against real-data features, then clip.

    Generated batches early in training can sit hundreds of spreads away
    from the data; unclipped, a single such state is enough to blow up the
    critic.
    """

    mean: tuple
    scale: tuple
    clip: float = 5.0

    @classmethod
    def fit(cls, feats, clip: float = 5.0) -> "StateScaler":
        f = np.asarray(feats, dtype=np.float64)
        sd = f.std(axis=0)
        floor = max(1e-3 * float(sd.max()), 1e-12)
        return cls(tuple(float(v) for v in f.mean(axis=0)),
                   tuple(float(v) for v in np.maximum(sd, floor)), float(clip))

    @classmethod
    def identity(cls, dim: int) -> "StateScaler":
        return cls((0.0,) * dim, (1.0,) * dim, float("inf"))

    def apply(self, state) -> np.ndarray:
        z = (np.asarray(state, dtype=np.float64) - np.array(self.mean)) / np.array(self.scale)
        return np.clip(z, -self.clip, self.clip)

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "scale": list(self.scale), "clip": self.clip}


# ---------------------------------------------------------- actor/critic


def init_actor(state_dim: int, hidden: int = 64, seed: int = 0) -> ParameterStore:
    return init_mlp(state_dim, ACTION_DIM, hidden, seed)


def init_critic(state_dim: int, hidden: int = 64, seed: int = 0) -> ParameterStore:
    return init_mlp(state_dim + ACTION_DIM, 1, hidden, seed)


def actor_forward(params: ParameterStore, states) -> torch.Tensor:
    return torch.sigmoid(mlp_forward(params, states))


def critic_forward(params: ParameterStore, states, actions) -> torch.Tensor:
    x = torch.cat([as_tensor(states), as_tensor(actions)], dim=-1)
    return mlp_forward(params, x)[..., 0]


def select_action(actor_params: ParameterStore, state, noise_std: float, seed) -> LossWeights:
    """Sigmoid actor output plus Gaussian exploration noise, clamped to [ACTION_FLOOR, 1]."""
    with torch.no_grad():
        a = actor_forward(actor_params, np.asarray(state, dtype=np.float64)[None])[0].numpy()
    if noise_std > 0:
        a = a + noise_std * np.random.default_rng(seed).standard_normal(ACTION_DIM)
    return LossWeights.from_array(np.clip(a, ACTION_FLOOR, 1.0))


def _stack(transitions):
    states = np.stack([t.state for t in transitions])
    actions = np.stack([t.action.as_array() for t in transitions])
    rewards = np.array([t.reward for t in transitions])
    next_states = np.stack([t.next_state for t in transitions])
    return states, actions, rewards, next_states


def td_target(critic_target: ParameterStore, actor_target: ParameterStore, next_states, rewards,
              discount: float) -> np.ndarray:
    """y = R + discount * V_t(S', T_t(S'))."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if discount == 0:
        return rewards.copy()
    next_states = np.asarray(next_states, dtype=np.float64)
    with torch.no_grad():
        v = critic_forward(critic_target, next_states, actor_forward(actor_target, next_states)).numpy()
    return rewards + discount * v


def critic_loss(critic_params: ParameterStore, states, actions, targets) -> torch.Tensor:
    v = critic_forward(critic_params, states, actions)
    diff = as_tensor(targets) - v
    return 0.5 * torch.mean(diff * diff)


def critic_update(critic_params: ParameterStore, states, actions, targets, lr: float) -> float:
    """One descent step on (1/2M) sum (y - V(S, A))^2; returns the loss before the step."""
    if len(states) == 0:
        raise ValueError("empty critic batch")
    loss = critic_loss(critic_params, states, actions, targets)
    if not torch.isfinite(loss):
        raise FloatingPointError("critic loss is not finite")
    gradient_step(critic_params, loss, lr)
    return float(loss.detach())


def actor_objective(actor_params: ParameterStore, critic, states) -> torch.Tensor:
    """Mean critic value of the actor's own actions.

    ``critic`` is a critic ``ParameterStore`` or any differentiable
    ``f(states, actions) -> values``.
    """
    states = as_tensor(states)
    actions = actor_forward(actor_params, states)
    if isinstance(critic, ParameterStore):
        return critic_forward(critic, states, actions).mean()
    return critic(states, actions).mean()


def actor_update(actor_params: ParameterStore, critic, states, lr: float) -> float:
    """One ascent step on mean V(S, T(S)) with the critic held fixed; returns J before the step."""
    if len(states) == 0:
        raise ValueError("empty actor batch")
    j = actor_objective(actor_params, critic, states)
    if not torch.isfinite(j):
        raise FloatingPointError("actor objective is not finite")
    gradient_step(actor_params, -j, lr)
    return float(j.detach())


# ---------------------------------------------------------------- bundle


@dataclass(frozen=True)
class AgentConfig:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    discount: float = 0.9
    sigma: float = 0.005
    noise_std: float = 0.05
    noise_decay: float = 0.995
    buffer_capacity: int = 10_000
    minibatch: int = 32
    updates_per_epoch: int = 1
    hidden: int = 64

    def __post_init__(self):
        for name in ("actor_lr", "critic_lr", "buffer_capacity", "minibatch", "updates_per_epoch", "hidden"):
            if not getattr(self, name) > 0:
                raise ValueError(f"AgentConfig.{name} must be positive")
        if not 0 <= self.discount <= 1 or not 0 <= self.sigma <= 1:
            raise ValueError("discount and sigma must lie in [0, 1]")
        if self.noise_std < 0 or not 0 < self.noise_decay <= 1:
            raise ValueError("noise_std must be >= 0 and noise_decay in (0, 1]")


class WeightAgent:
    """Actor, critic, their target copies and the replay buffer."""

    def __init__(self, state_dim: int, config: AgentConfig = AgentConfig(), seed: int = 0):
        self.config = config
        self.state_dim = state_dim
        seeds = np.random.SeedSequence(seed).generate_state(2)
        self.actor = init_actor(state_dim, config.hidden, int(seeds[0]))
        self.critic = init_critic(state_dim, config.hidden, int(seeds[1]))
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.buffer = ReplayBuffer(config.buffer_capacity)

    def stores(self) -> dict[str, ParameterStore]:
        return {"actor": self.actor, "actor_target": self.actor_target,
                "critic": self.critic, "critic_target": self.critic_target}

    def noise_std(self, epoch: int) -> float:
        return self.config.noise_std * self.config.noise_decay ** epoch

    def act(self, state, epoch: int, rng) -> LossWeights:
        return select_action(self.actor, state, self.noise_std(epoch), rng)

    def observe(self, tr: Transition) -> None:
        self.buffer.push(tr)

    def update(self, rng) -> dict | None:
        """Minibatch updates of critic then actor, then soft target updates.

        Returns ``None`` (and changes nothing) while the buffer holds fewer
        than ``minibatch`` records.
        """
        cfg = self.config
        if len(self.buffer) < cfg.minibatch:
            return None
        c_losses, a_values = [], []
        for _ in range(cfg.updates_per_epoch):
            s, a, r, s2 = _stack(self.buffer.sample(cfg.minibatch, rng))
            y = td_target(self.critic_target, self.actor_target, s2, r, cfg.discount)
            c_losses.append(critic_update(self.critic, s, a, y, cfg.critic_lr))
            a_values.append(actor_update(self.actor, self.critic, s, cfg.actor_lr))
            soft_update(self.critic, self.critic_target, cfg.sigma)
            soft_update(self.actor, self.actor_target, cfg.sigma)
        return {"critic_loss": float(np.mean(c_losses)), "actor_value": float(np.mean(a_values))}


def write_reward_trace(path, records) -> None:
    """JSON-lines trace, one object per iteration."""
    keys = ("iter", "w_d", "w_tf", "w_c", "js_stat", "js_info", "js_nonlin", "spectral", "total")
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({k: rec[k] for k in keys}) + "\n")
