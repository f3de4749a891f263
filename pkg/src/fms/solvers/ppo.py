"""Masked actor-critic policy gradient with a clipped surrogate objective.

Two feed-forward approximators (two hidden tanh layers each)
map observations to action logits and to a scalar state value.  Disabled
actions get their logit replaced by -inf before the softmax, so their
probability is exactly zero and no gradient flows through them.  Updates
minimize  L = L_policy + c_v * L_value - c_e * entropy  with the clipped
importance-ratio surrogate; gradients are computed analytically in numpy
(verified against finite differences in the test suite).

Plain SGD (theta <- theta - alpha * grad) is the default update rule;
adaptive moments are available through the config.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

NEG_INF = -1e30  # exp(NEG_INF - lse) underflows to exactly 0.0


@dataclass
class PpoConfig:
    steps: int = 300_000
    lr: float = 3e-4
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    gamma: float = 0.99
    gae_lambda: float = 0.95
    rollout_len: int = 2048
    epochs: int = 10
    minibatch: int = 256
    hidden: int = 256
    optimizer: str = "sgd"          # or "adam"
    value_target: str = "returns"   # or "v_old"
    seed: int = 0
    masking: bool = True

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.value_target not in ("returns", "v_old"):
            raise ValueError(f"unknown value target {self.value_target!r}")


PARAM_NAMES = ("pw1", "pb1", "pw2", "pb2", "pw3", "pb3",
               "vw1", "vb1", "vw2", "vb2", "vw3", "vb3")


class ActorCritic:
    """Policy and value networks as plain float64 numpy arrays."""

    def __init__(self, obs_dim: int, n_actions: int, hidden: int = 256,
                 seed: int = 0):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hidden = hidden
        rng = np.random.default_rng(seed)

        def glorot(n_in, n_out):
            scale = np.sqrt(6.0 / (n_in + n_out))
            return rng.uniform(-scale, scale, size=(n_in, n_out))

        h = hidden
        self.params = {
            "pw1": glorot(obs_dim, h), "pb1": np.zeros(h),
            "pw2": glorot(h, h), "pb2": np.zeros(h),
            "pw3": glorot(h, n_actions) * 0.01, "pb3": np.zeros(n_actions),
            "vw1": glorot(obs_dim, h), "vb1": np.zeros(h),
            "vw2": glorot(h, h), "vb2": np.zeros(h),
            "vw3": glorot(h, 1), "vb3": np.zeros(1),
        }

    # -- forward -------------------------------------------------------------

    def _mlp(self, x, prefix):
        p = self.params
        h1 = np.tanh(x @ p[prefix + "w1"] + p[prefix + "b1"])
        h2 = np.tanh(h1 @ p[prefix + "w2"] + p[prefix + "b2"])
        out = h2 @ p[prefix + "w3"] + p[prefix + "b3"]
        return out, (x, h1, h2)

    def logits(self, obs: np.ndarray) -> np.ndarray:
        out, _ = self._mlp(np.atleast_2d(obs), "p")
        return out

    def value(self, obs: np.ndarray) -> np.ndarray:
        out, _ = self._mlp(np.atleast_2d(obs), "v")
        return out[:, 0]

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        meta = json.dumps({"version": 1, "obs_dim": self.obs_dim,
                           "n_actions": self.n_actions,
                           "hidden": self.hidden})
        np.savez(path, __meta__=np.frombuffer(meta.encode(), dtype=np.uint8),
                 **self.params)

    @classmethod
    def load(cls, path) -> "ActorCritic":
        data = np.load(path)
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {meta}")
        model = cls.__new__(cls)
        model.obs_dim = meta["obs_dim"]
        model.n_actions = meta["n_actions"]
        model.hidden = meta["hidden"]
        model.params = {name: data[name] for name in PARAM_NAMES}
        return model


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Probabilities over enabled actions; disabled entries are exactly 0."""
    logits = np.atleast_2d(logits)
    mask = np.atleast_2d(mask).astype(bool)
    if not mask.any(axis=1).all():
        raise ValueError("mask must enable at least one action")
    z = np.where(mask, logits, NEG_INF)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def masked_log_softmax(logits, mask):
    logits = np.atleast_2d(logits)
    mask = np.atleast_2d(mask).astype(bool)
    z = np.where(mask, logits, NEG_INF)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax + np.log(
        np.where(mask, np.exp(z - zmax), 0.0).sum(axis=1, keepdims=True))
    return np.where(mask, z - lse, NEG_INF)


def ppo_act(model: ActorCritic, obs, mask, deterministic: bool = True,
            rng: Optional[np.random.Generator] = None) -> int:
    """Pick an action from the masked policy distribution."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("all actions are masked")
    logits = model.logits(obs)[0]
    probs = masked_softmax(logits, mask)[0]
    if deterministic:
        z = np.where(mask, logits, NEG_INF)
        return int(np.argmax(z))
    if rng is None:
        rng = np.random.default_rng()
    return int(rng.choice(len(probs), p=probs))


@dataclass(frozen=True)
class PpoPolicy:
    """Greedy wrapper so a trained model can drive environments."""
    model: ActorCritic
    deterministic: bool = True
    name: str = "ppo"

    def decide(self, env) -> int:
        return ppo_act(self.model, env._last_obs, env.action_mask(),
                       deterministic=self.deterministic)


# -- loss and analytic gradients ---------------------------------------------


def ppo_loss_and_grads(model: ActorCritic, batch: dict, config: PpoConfig):
    """Loss of one minibatch plus the gradient of every parameter.

    batch: obs (N,D), actions (N,), masks (N,A), logp_old (N,),
    advantages (N,), returns (N,), v_old (N,).
    """
    obs = batch["obs"]
    acts = batch["actions"]
    masks = batch["masks"].astype(bool)
    adv = batch["advantages"]
    n = len(acts)
    rows = np.arange(n)

    logits, pcache = model._mlp(obs, "p")
    values, vcache = model._mlp(obs, "v")
    values = values[:, 0]

    logp = masked_log_softmax(logits, masks)
    probs = masked_softmax(logits, masks)
    logp_a = logp[rows, acts]
    ratio = np.exp(logp_a - batch["logp_old"])
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv
    policy_loss = -np.mean(np.minimum(unclipped, clipped))

    target = (batch["returns"] if config.value_target == "returns"
              else batch["v_old"])
    verr = values - target
    value_loss = np.mean(verr ** 2)

    ent = -np.sum(np.where(masks, probs * np.where(masks, logp, 0.0), 0.0),
                  axis=1)
    entropy = np.mean(ent)

    loss = (policy_loss + config.value_coef * value_loss
            - config.entropy_coef * entropy)

    # d(policy_loss)/d(logits): gradient flows only where the unclipped
    # branch is the active minimum
    passthrough = (unclipped <= clipped).astype(float)
    coeff = -(adv * ratio * passthrough) / n            # (N,)
    one_hot = np.zeros_like(probs)
    one_hot[rows, acts] = 1.0
    dz = coeff[:, None] * (one_hot - probs)
    if config.entropy_coef != 0.0:
        safe_logp = np.where(masks, logp, 0.0)
        d_ent = -probs * (safe_logp + ent[:, None])
        dz -= config.entropy_coef * d_ent / n
    dz = np.where(masks, dz, 0.0)

    dv = (2.0 * config.value_coef / n) * verr          # (N,)

    grads = {}
    _mlp_backward(model, "p", pcache, dz, grads)
    _mlp_backward(model, "v", vcache, dv[:, None], grads)

    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy),
        "approx_kl": float(np.mean(batch["logp_old"] - logp_a)),
    }
    return loss, grads, stats


def ppo_loss(model, batch, config) -> float:
    loss, _, _ = ppo_loss_and_grads(model, batch, config)
    return loss


def _mlp_backward(model, prefix, cache, dout, grads):
    p = model.params
    x, h1, h2 = cache
    grads[prefix + "w3"] = h2.T @ dout
    grads[prefix + "b3"] = dout.sum(axis=0)
    dh2 = (dout @ p[prefix + "w3"].T) * (1.0 - h2 ** 2)
    grads[prefix + "w2"] = h1.T @ dh2
    grads[prefix + "b2"] = dh2.sum(axis=0)
    dh1 = (dh2 @ p[prefix + "w2"].T) * (1.0 - h1 ** 2)
    grads[prefix + "w1"] = x.T @ dh1
    grads[prefix + "b1"] = dh1.sum(axis=0)


class _Optimizer:
    def __init__(self, params, config: PpoConfig):
        self.config = config
        self.t = 0
        if config.optimizer == "adam":
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        lr = self.config.lr
        if self.config.optimizer == "sgd":
            for k, g in grads.items():
                params[k] -= lr * g
            return
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1 ** self.t)
            vhat = self.v[k] / (1 - b2 ** self.t)
            params[k] -= lr * mhat / (np.sqrt(vhat) + eps)


def compute_gae(rewards, values, dones, bootstrap, gamma, lam):
    """Generalized advantage estimates and returns for one rollout."""
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in reversed(range(n)):
        next_v = bootstrap[t] if dones[t] else (
            values[t + 1] if t + 1 < n else bootstrap[t])
        delta = rewards[t] + gamma * next_v - values[t]
        last = delta + gamma * lam * last * (0.0 if dones[t] else 1.0)
        adv[t] = last
    returns = adv + values[:n]
    return adv, returns


@dataclass
class TrainLog:
    """One row per update iteration: the six training curves."""
    timesteps: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    mean_reward: list = field(default_factory=list)
    approx_kl: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    value_loss: list = field(default_factory=list)
    policy_loss: list = field(default_factory=list)
    episode_rewards: list = field(default_factory=list)  # per finished episode

    def as_dict(self):
        return asdict(self)


def ppo_train(env_factory: Callable, config: PpoConfig,
              model: Optional[ActorCritic] = None,
              progress: Optional[Callable] = None):
    """Train on environments from the factory; returns (model, log)."""
    env = env_factory()
    obs = env.reset()
    full_mask = np.ones(len(env.action_mask()), dtype=bool)
    mask = env.action_mask() if config.masking else full_mask
    if model is None:
        model = ActorCritic(len(obs), len(mask), config.hidden, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    opt = _Optimizer(model.params, config)
    log = TrainLog()
    ep_reward = 0.0
    steps_done = 0
    while steps_done < config.steps:
        horizon = min(config.rollout_len, config.steps - steps_done)
        buf_obs = np.empty((horizon, len(obs)))
        buf_act = np.empty(horizon, dtype=np.int64)
        buf_mask = np.empty((horizon, len(mask)), dtype=bool)
        buf_logp = np.empty(horizon)
        buf_rew = np.empty(horizon)
        buf_done = np.empty(horizon, dtype=bool)
        buf_boot = np.zeros(horizon)
        buf_val = np.empty(horizon)
        for t in range(horizon):
            logits = model.logits(obs)[0]
            probs = masked_softmax(logits, mask)[0]
            action = int(rng.choice(len(probs), p=probs))
            logp = np.log(probs[action])
            value = float(model.value(obs)[0])
            result = env.step(action)
            buf_obs[t] = obs
            buf_act[t] = action
            buf_mask[t] = mask
            buf_logp[t] = logp
            buf_rew[t] = result.reward
            buf_val[t] = value
            ep_reward += result.reward
            terminal = result.terminal
            truncated = result.info.get("truncated", False)
            buf_done[t] = terminal or truncated
            if truncated and not terminal:
                buf_boot[t] = float(model.value(result.observation)[0])
            if terminal or truncated:
                log.episode_rewards.append(ep_reward)
                ep_reward = 0.0
                obs = env.reset()
            else:
                obs = result.observation
            mask = env.action_mask() if config.masking else full_mask
        steps_done += horizon

        bootstrap_tail = float(model.value(obs)[0])
        boot = buf_boot.copy()
        if not buf_done[-1]:
            boot[-1] = bootstrap_tail
        adv, returns = compute_gae(buf_rew, buf_val, buf_done, boot,
                                   config.gamma, config.gae_lambda)
        adv_std = adv.std()
        adv_norm = (adv - adv.mean()) / (adv_std + 1e-8)

        idx = np.arange(horizon)
        stats_acc = []
        for _ in range(config.epochs):
            rng.shuffle(idx)
            for lo in range(0, horizon, config.minibatch):
                sel = idx[lo:lo + config.minibatch]
                batch = {
                    "obs": buf_obs[sel],
                    "actions": buf_act[sel],
                    "masks": buf_mask[sel],
                    "logp_old": buf_logp[sel],
                    "advantages": adv_norm[sel],
                    "returns": returns[sel],
                    "v_old": buf_val[sel],
                }
                loss, grads, stats = ppo_loss_and_grads(model, batch, config)
                if not np.isfinite(loss):
                    raise FloatingPointError(
                        f"non-finite loss at step {steps_done}")
                opt.step(model.params, grads)
                stats_acc.append(stats)

        recent = log.episode_rewards[-20:]
        log.timesteps.append(steps_done)
        log.loss.append(float(np.mean([s["loss"] for s in stats_acc])))
        log.policy_loss.append(
            float(np.mean([s["policy_loss"] for s in stats_acc])))
        log.value_loss.append(
            float(np.mean([s["value_loss"] for s in stats_acc])))
        log.entropy.append(float(np.mean([s["entropy"] for s in stats_acc])))
        log.approx_kl.append(
            float(np.mean([s["approx_kl"] for s in stats_acc])))
        log.mean_reward.append(
            float(np.mean(recent)) if recent else float("nan"))
        if progress is not None:
            progress(steps_done, log)
    return model, log
