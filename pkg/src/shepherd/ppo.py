"""Proximal Policy Optimization with a Gaussian policy, from scratch.

Actor and critic are independent dense networks (four hidden layers of 64
ReLU units). The actor outputs a tanh-bounded mean scaled to the velocity
limit, plus a free learned log-standard-deviation vector; actions are sampled
during training and the deterministic mean is used for evaluation. Updates
maximize the clipped importance-ratio surrogate with generalized advantage
estimation, minibatch shuffling and global gradient-norm clipping.

Checkpoint format (text): a header line ``SHEPHERD-PPO v1``, then one line
per tensor: name, rank, the shape dims, then the row-major values written
with full round-trip precision.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import PpoHyperparams
from .nets import Adam, DenseNet, clip_grads_

LOG_2PI = math.log(2.0 * math.pi)

CHECKPOINT_HEADER = "SHEPHERD-PPO v1"


class CheckpointError(RuntimeError):
    """Raised for malformed, mis-versioned or dimensionally wrong checkpoints."""


class NonFiniteLossError(RuntimeError):
    """Raised when an update produces a non-finite loss."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the actor-critic pair."""

    input_dim: int
    actor_output_dim: int
    hidden_layers: int = 4
    hidden_width: int = 64
    critic_output_dim: int = 1

    def actor_sizes(self):
        return [self.input_dim, *([self.hidden_width] * self.hidden_layers), self.actor_output_dim]

    def critic_sizes(self):
        return [self.input_dim, *([self.hidden_width] * self.hidden_layers), self.critic_output_dim]


class GaussianPolicy:
    """Actor-critic pair with a diagonal Gaussian action distribution."""

    def __init__(self, spec: NetworkSpec, v_max: float, rng: np.random.Generator):
        self.spec = spec
        self.v_max = float(v_max)
        # near-zero initial mean head keeps early exploration centered
        self.actor = DenseNet(spec.actor_sizes(), rng, out_gain=0.01)
        self.critic = DenseNet(spec.critic_sizes(), rng, out_gain=1.0)
        self.log_std = np.zeros(spec.actor_output_dim)

    def actor_forward(self, obs):
        """Mean action (tanh-bounded into (-v_max, v_max)) and log-std."""
        z, _ = self.actor.forward(obs)
        return self.v_max * np.tanh(z), self.log_std.copy()

    def value(self, obs):
        v, _ = self.critic.forward(obs)
        return float(v[0]) if np.ndim(v) == 1 else v[:, 0]

    def parameters(self):
        return [*self.actor.parameters(), *self.critic.parameters(), self.log_std]

    def named_tensors(self):
        out = []
        for prefix, net in (("actor", self.actor), ("critic", self.critic)):
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                out.append((f"{prefix}.w{i}", w))
                out.append((f"{prefix}.b{i}", b))
        out.append(("log_std", self.log_std))
        return out


def gaussian_log_prob(mean, log_std, action):
    """Diagonal Gaussian log density, summed over action dimensions."""
    z = (np.asarray(action) - mean) / np.exp(log_std)
    per_dim = -0.5 * z**2 - log_std - 0.5 * LOG_2PI
    return per_dim.sum(axis=-1)


def sample_action(mean, log_std, mode="stochastic", rng: np.random.Generator = None):
    """Draw an action and its log probability (recorded before any clipping)."""
    if mode == "deterministic":
        action = np.array(mean, dtype=float)
    elif mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic sampling needs an rng")
        action = mean + np.exp(log_std) * rng.standard_normal(np.shape(mean))
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return action, float(gaussian_log_prob(mean, log_std, action))


class RolloutBuffer:
    """Fixed-length on-policy transition store plus GAE results."""

    def __init__(self, length: int, obs_dim: int, act_dim: int):
        self.length = length
        self.observations = np.zeros((length, obs_dim))
        self.actions = np.zeros((length, act_dim))
        self.log_probs = np.zeros(length)
        self.rewards = np.zeros(length)
        self.values = np.zeros(length)
        self.dones = np.zeros(length, dtype=bool)
        self.advantages = None
        self.returns = None
        self.ptr = 0

    def add(self, obs, action, log_prob, reward, value, done):
        if self.ptr >= self.length:
            raise IndexError("rollout buffer full")
        i = self.ptr
        self.observations[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = done
        self.ptr += 1

    @property
    def full(self) -> bool:
        return self.ptr == self.length

    def reset(self):
        self.ptr = 0
        self.advantages = None
        self.returns = None


def compute_gae(buffer: RolloutBuffer, hp: PpoHyperparams, bootstrap_value: float):
    """Fill the buffer's advantages and return targets.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
    A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
    ret_t   = A_t + V_t
    """
    n = buffer.ptr
    adv = np.zeros(n)
    last_adv = 0.0
    next_value = bootstrap_value
    for t in range(n - 1, -1, -1):
        not_done = 1.0 - float(buffer.dones[t])
        delta = buffer.rewards[t] + hp.discount_gamma * next_value * not_done - buffer.values[t]
        last_adv = delta + hp.discount_gamma * hp.gae_lambda * not_done * last_adv
        adv[t] = last_adv
        next_value = buffer.values[t]
    buffer.advantages = adv
    buffer.returns = adv + buffer.values[:n]
    return buffer


def ppo_update(
    policy: GaussianPolicy,
    optimizer: Adam,
    buffer: RolloutBuffer,
    hp: PpoHyperparams,
    rng: np.random.Generator,
) -> dict:
    """Run the clipped-surrogate epochs over shuffled minibatches.

    Advantages are normalized once over the whole update batch. Returns mean
    ratio, clip fraction and value loss averaged over all minibatches.
    """
    n = buffer.ptr
    if buffer.advantages is None:
        raise RuntimeError("call compute_gae before ppo_update")
    adv = buffer.advantages[:n]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    obs = buffer.observations[:n]
    actions = buffer.actions[:n]
    old_log_probs = buffer.log_probs[:n]
    returns = buffer.returns[:n]

    stats = {"ratio": [], "clip_fraction": [], "value_loss": [], "policy_loss": [], "entropy": []}
    eps = hp.clip_epsilon
    for _ in range(hp.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, hp.minibatch_size):
            idx = order[start : start + hp.minibatch_size]
            b = idx.size
            obs_b = obs[idx]
            act_b = actions[idx]
            adv_b = adv[idx]
            ret_b = returns[idx]

            z, actor_cache = policy.actor.forward(obs_b)
            tanh_z = np.tanh(z)
            mean = policy.v_max * tanh_z
            sigma = np.exp(policy.log_std)
            norm = (act_b - mean) / sigma
            log_probs = (-0.5 * norm**2 - policy.log_std - 0.5 * LOG_2PI).sum(axis=1)
            ratio = np.exp(log_probs - old_log_probs[idx])
            surr1 = ratio * adv_b
            surr2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv_b
            policy_loss = -np.minimum(surr1, surr2).mean()

            v, critic_cache = policy.critic.forward(obs_b)
            v = v[:, 0]
            value_loss = np.mean((v - ret_b) ** 2)
            entropy = float(np.sum(policy.log_std + 0.5 * (LOG_2PI + 1.0)))
            loss = policy_loss + hp.value_coef * value_loss - hp.entropy_coef * entropy
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"non-finite loss (policy={policy_loss}, value={value_loss}) "
                    f"on minibatch indices {idx[:8].tolist()}..."
                )

            # gradient of the surrogate flows only where the unclipped branch
            # is the active minimum
            take_unclipped = surr1 <= surr2
            d_logp = np.where(take_unclipped, ratio * adv_b, 0.0) * (-1.0 / b)
            d_mean = d_logp[:, None] * (norm / sigma)
            d_z = d_mean * policy.v_max * (1.0 - tanh_z**2)
            _, actor_grads = policy.actor.backward(actor_cache, d_z)
            d_log_std = (d_logp[:, None] * (norm**2 - 1.0)).sum(axis=0)
            d_log_std -= hp.entropy_coef  # dH/dlog_std = 1 per dimension

            d_v = hp.value_coef * 2.0 * (v - ret_b) / b
            _, critic_grads = policy.critic.backward(critic_cache, d_v[:, None])

            grads = []
            for dw, db in actor_grads:
                grads.extend((dw, db))
            for dw, db in critic_grads:
                grads.extend((dw, db))
            grads.append(d_log_std)
            clip_grads_(grads, hp.max_grad_norm)
            optimizer.step(grads)

            stats["ratio"].append(float(ratio.mean()))
            stats["clip_fraction"].append(float(np.mean(np.abs(ratio - 1.0) > eps)))
            stats["value_loss"].append(float(value_loss))
            stats["policy_loss"].append(float(policy_loss))
            stats["entropy"].append(entropy)
    return {k: float(np.mean(v)) for k, v in stats.items()}


@dataclass
class TrainingHistory:
    episode_rewards: list = field(default_factory=list)
    episode_steps: list = field(default_factory=list)
    smoothed_rewards: list = field(default_factory=list)
    clip_fractions: list = field(default_factory=list)
    value_losses: list = field(default_factory=list)
    wall_seconds: float = 0.0


def smooth(series, window=20):
    if not series:
        return []
    out = []
    for i in range(len(series)):
        lo = max(0, i - window + 1)
        out.append(float(np.mean(series[lo : i + 1])))
    return out


def train(
    env_factory,
    hp: PpoHyperparams,
    output_dir=None,
    seed: int = 0,
    v_max: float = 3.0,
    save_every: int = 100,
    log_every: int = 0,
) -> tuple:
    """Alternate rollout collection and updates until the step budget is spent.

    Writes ``policy.ckpt`` and ``training_log.csv`` under ``output_dir`` when
    given (plus periodic checkpoint snapshots). Returns (policy, history).
    """
    t0 = time.time()
    rng = np.random.default_rng(seed)
    env = env_factory()
    spec = NetworkSpec(env.observation_dim, env.action_dim)
    policy = GaussianPolicy(spec, v_max, rng)
    optimizer = Adam(policy.parameters(), lr=hp.learning_rate)
    buffer = RolloutBuffer(hp.rollout_length, env.observation_dim, env.action_dim)

    history = TrainingHistory()
    obs = env.reset(seed=seed)
    ep_reward = 0.0
    total_steps = 0
    latest = {"clip_fraction": 0.0, "value_loss": 0.0}
    n_updates = 0

    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)

    while total_steps < hp.total_env_steps:
        buffer.reset()
        while not buffer.full:
            mean, log_std = policy.actor_forward(obs)
            action, log_prob = sample_action(mean, log_std, "stochastic", rng)
            value = policy.value(obs)
            result = env.step(action)
            buffer.add(obs, action, log_prob, result.reward, value, result.done)
            ep_reward += result.reward
            total_steps += 1
            if result.done:
                history.episode_rewards.append(ep_reward)
                history.episode_steps.append(total_steps)
                history.clip_fractions.append(latest["clip_fraction"])
                history.value_losses.append(latest["value_loss"])
                ep_reward = 0.0
                obs = env.reset()
            else:
                obs = result.observation
        bootstrap = 0.0 if buffer.dones[buffer.ptr - 1] else policy.value(obs)
        compute_gae(buffer, hp, bootstrap)
        diag = ppo_update(policy, optimizer, buffer, hp, rng)
        latest = diag
        n_updates += 1
        if log_every and n_updates % log_every == 0:
            recent = history.episode_rewards[-20:]
            avg = float(np.mean(recent)) if recent else float("nan")
            print(
                f"update {n_updates:4d}  steps {total_steps:8d}  "
                f"reward(20ep) {avg:9.2f}  clip {diag['clip_fraction']:.3f}  "
                f"vloss {diag['value_loss']:.3f}",
                flush=True,
            )
        if output_dir is not None and save_every and n_updates % save_every == 0:
            save_checkpoint(policy, f"{output_dir}/policy.ckpt")

    history.smoothed_rewards = smooth(history.episode_rewards, 20)
    history.wall_seconds = time.time() - t0
    if output_dir is not None:
        save_checkpoint(policy, f"{output_dir}/policy.ckpt")
        write_training_log(history, f"{output_dir}/training_log.csv")
    return policy, history


def write_training_log(history: TrainingHistory, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "episode_index",
                "env_steps",
                "episodic_reward",
                "smoothed_reward",
                "mean_clip_fraction",
                "value_loss",
            ]
        )
        for i, reward in enumerate(history.episode_rewards):
            writer.writerow(
                [
                    i,
                    history.episode_steps[i],
                    repr(reward),
                    repr(history.smoothed_rewards[i]),
                    repr(history.clip_fractions[i]),
                    repr(history.value_losses[i]),
                ]
            )


def save_checkpoint(policy: GaussianPolicy, path):
    """Write the policy tensors in the plain-text checkpoint format."""
    lines = [CHECKPOINT_HEADER]
    for name, arr in policy.named_tensors():
        shape = arr.shape if arr.ndim else (1,)
        tokens = [name, str(len(shape)), *map(str, shape)]
        tokens.extend(repr(float(v)) for v in np.asarray(arr).ravel())
        lines.append(" ".join(tokens))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise CheckpointError(f"could not write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> dict:
    """Read a checkpoint back into a name -> array mapping."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise CheckpointError(
            f"bad checkpoint header in {path}: expected {CHECKPOINT_HEADER!r}"
        )
    tensors = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tokens = line.split()
        name = tokens[0]
        try:
            rank = int(tokens[1])
            shape = tuple(int(t) for t in tokens[2 : 2 + rank])
            values = np.array([float(t) for t in tokens[2 + rank :]])
        except (ValueError, IndexError) as exc:
            raise CheckpointError(f"malformed tensor line {lineno} in {path}") from exc
        expected = int(np.prod(shape)) if shape else 1
        if values.size != expected:
            raise CheckpointError(
                f"tensor {name!r} in {path}: shape {shape} wants {expected} "
                f"values, found {values.size}"
            )
        tensors[name] = values.reshape(shape)
    return tensors


def policy_from_weights(weights: dict, v_max: float) -> GaussianPolicy:
    """Rebuild a policy from checkpoint tensors, validating the layer chain."""

    def layer_chain(prefix):
        mats, vecs = [], []
        i = 0
        while f"{prefix}.w{i}" in weights:
            mats.append(weights[f"{prefix}.w{i}"])
            if f"{prefix}.b{i}" not in weights:
                raise CheckpointError(f"missing bias {prefix}.b{i}")
            vecs.append(weights[f"{prefix}.b{i}"])
            i += 1
        if not mats:
            raise CheckpointError(f"no layers found for {prefix!r}")
        for j, (w, b) in enumerate(zip(mats, vecs)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise CheckpointError(f"{prefix} layer {j} has inconsistent shapes")
            if j > 0 and mats[j - 1].shape[1] != w.shape[0]:
                raise CheckpointError(
                    f"{prefix} layer {j}: input dim {w.shape[0]} does not chain "
                    f"from previous output {mats[j - 1].shape[1]}"
                )
        return mats, vecs

    actor_w, actor_b = layer_chain("actor")
    critic_w, critic_b = layer_chain("critic")
    if "log_std" not in weights:
        raise CheckpointError("missing log_std tensor")
    log_std = np.atleast_1d(weights["log_std"])
    if log_std.shape[0] != actor_w[-1].shape[1]:
        raise CheckpointError("log_std size does not match the actor output")
    if actor_w[0].shape[0] != critic_w[0].shape[0]:
        raise CheckpointError("actor and critic disagree on the input dimension")

    spec = NetworkSpec(
        input_dim=actor_w[0].shape[0],
        actor_output_dim=actor_w[-1].shape[1],
        hidden_layers=len(actor_w) - 1,
        hidden_width=actor_w[0].shape[1] if len(actor_w) > 1 else 0,
        critic_output_dim=critic_w[-1].shape[1],
    )
    policy = GaussianPolicy(spec, v_max, np.random.default_rng(0))
    policy.actor.weights = [w.copy() for w in actor_w]
    policy.actor.biases = [b.copy() for b in actor_b]
    policy.actor.sizes = [w.shape[0] for w in actor_w] + [actor_w[-1].shape[1]]
    policy.critic.weights = [w.copy() for w in critic_w]
    policy.critic.biases = [b.copy() for b in critic_b]
    policy.critic.sizes = [w.shape[0] for w in critic_w] + [critic_w[-1].shape[1]]
    policy.log_std = log_std.copy()
    return policy


def load_policy(path, v_max: float = 3.0) -> GaussianPolicy:
    return policy_from_weights(load_checkpoint(path), v_max)
