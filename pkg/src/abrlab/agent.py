"""Actor-critic PPO on the streaming MDP: rollouts, GAE, clipped updates.

The actor emits one logit per ladder rung; actions are sampled from the
softmax. Updates run the standard clipped-surrogate recipe with entropy
regularization and a squared-error critic, all differentiated analytically
through the dense networks. Observations are standardized by running
statistics (clipped at +-10) because throughput features span orders of
magnitude across regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import Session, episode_qoe
from .errors import NumericalError, UsageError, ValidationError
from .net import (
    AdamState,
    DenseNetwork,
    LayerSpec,
    apply_update,
    clip_gradient_norm,
    init_network,
)

OBS_CLIP = 10.0


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs_per_update: int = 4
    minibatch_size: int = 64
    rollout_horizon: int = 512
    lr: float = 3e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    hidden_sizes: tuple[int, ...] = (64, 64)

    def __post_init__(self) -> None:
        if not (0 <= self.gamma < 1):
            raise ValidationError("gamma must be in [0, 1)")
        if not (0 <= self.gae_lambda <= 1):
            raise ValidationError("gae_lambda must be in [0, 1]")
        if not (self.clip > 0):
            raise ValidationError("clip must be > 0")
        if self.epochs_per_update < 1 or self.minibatch_size < 1 or self.rollout_horizon < 1:
            raise ValidationError("epochs, minibatch and horizon must be >= 1")
        if not (self.lr > 0) or not (self.max_grad_norm > 0):
            raise ValidationError("lr and max_grad_norm must be > 0")
        if self.entropy_coef < 0 or self.value_coef < 0:
            raise ValidationError("entropy_coef and value_coef must be >= 0")


class ObsNormalizer:
    """Running mean/std standardization with clipping, Welford-accumulated."""

    def __init__(self, dim: int) -> None:
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, obs: np.ndarray) -> None:
        self.count += 1
        delta = obs - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (obs - self.mean)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return np.sqrt(np.maximum(self.m2 / self.count, 1e-8))

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        return np.clip((obs - self.mean) / self.std, -OBS_CLIP, OBS_CLIP)

    def state_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean.tolist(),
            "m2": self.m2.tolist(),
        }


@dataclass
class AgentBundle:
    actor: DenseNetwork
    critic: DenseNetwork
    actor_opt: AdamState
    critic_opt: AdamState
    obs_norm: ObsNormalizer
    num_actions: int


def make_bundle(
    obs_dim: int, num_actions: int, seed: int, hidden_sizes: tuple[int, ...] = (64, 64)
) -> AgentBundle:
    """Separate actor and critic networks with derived, independent seeds."""
    actor_seed, critic_seed = np.random.SeedSequence(seed).generate_state(2)

    def specs(out_dim: int) -> list[LayerSpec]:
        dims = [obs_dim, *hidden_sizes]
        layers = [
            LayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])
        ]
        layers.append(LayerSpec(dims[-1], out_dim, "identity"))
        return layers

    actor = init_network(specs(num_actions), seed=int(actor_seed))
    critic = init_network(specs(1), seed=int(critic_seed))
    return AgentBundle(
        actor=actor,
        critic=critic,
        actor_opt=AdamState(actor),
        critic_opt=AdamState(critic),
        obs_norm=ObsNormalizer(obs_dim),
        num_actions=num_actions,
    )


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def select_action(
    actor: DenseNetwork, obs: np.ndarray, rng: np.random.Generator
) -> tuple[int, float, np.ndarray]:
    """Sample one action from the softmax policy; returns (action, log_prob, logits)."""
    logits = actor.predict(obs[None, :])[0]
    if not np.all(np.isfinite(logits)):
        raise NumericalError("actor produced non-finite logits")
    probs = softmax(logits)
    action = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    action = min(action, logits.size - 1)
    log_prob = float(log_softmax(logits)[action])
    return action, log_prob, logits


def greedy_action(actor: DenseNetwork, obs: np.ndarray) -> int:
    logits = actor.predict(obs[None, :])[0]
    if not np.all(np.isfinite(logits)):
        raise NumericalError("actor produced non-finite logits")
    return int(np.argmax(logits))


@dataclass
class Rollout:
    obs: np.ndarray  # (T, obs_dim), normalized
    actions: np.ndarray  # (T,)
    log_probs: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)
    values: np.ndarray  # (T,)
    dones: np.ndarray  # (T,), 1.0 where the episode ended at that step
    bootstrap_value: float
    episode_qoes: list[float] = field(default_factory=list)
    episode_rewards: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.rewards.size)


def collect_rollout(
    session: Session, bundle: AgentBundle, horizon: int, rng: np.random.Generator
) -> Rollout:
    """Step the live session for ``horizon`` steps, resetting inline on done."""
    if horizon < 1:
        raise UsageError("horizon must be >= 1")
    obs_dim = session.config.observation_dim
    obs_buf = np.empty((horizon, obs_dim))
    actions = np.empty(horizon, dtype=np.int64)
    log_probs = np.empty(horizon)
    rewards = np.empty(horizon)
    values = np.empty(horizon)
    dones = np.zeros(horizon)
    episode_qoes: list[float] = []
    episode_rewards: list[float] = []

    for t in range(horizon):
        raw = session.current_obs
        bundle.obs_norm.update(raw)
        nobs = bundle.obs_norm.normalize(raw)
        action, log_prob, _ = select_action(bundle.actor, nobs, rng)
        value = float(bundle.critic.predict(nobs[None, :])[0, 0])
        _, reward, done, _ = session.step(action)
        obs_buf[t] = nobs
        actions[t] = action
        log_probs[t] = log_prob
        rewards[t] = reward
        values[t] = value
        dones[t] = float(done)
        if done:
            outcomes = session.episode_outcomes
            episode_qoes.append(episode_qoe(outcomes, session.config.qoe))
            episode_rewards.append(sum(o.reward for o in outcomes))
            session.reset()

    final_nobs = bundle.obs_norm.normalize(session.current_obs)
    bootstrap = float(bundle.critic.predict(final_nobs[None, :])[0, 0])
    return Rollout(
        obs=obs_buf,
        actions=actions,
        log_probs=log_probs,
        rewards=rewards,
        values=values,
        dones=dones,
        bootstrap_value=bootstrap,
        episode_qoes=episode_qoes,
        episode_rewards=episode_rewards,
    )


def compute_gae(
    rollout: Rollout, gamma: float, gae_lambda: float
) -> tuple[np.ndarray, np.ndarray]:
    """Raw (unnormalized) advantages and returns; normalization happens per update."""
    n = len(rollout)
    advantages = np.empty(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        nonterminal = 1.0 - rollout.dones[t]
        next_value = rollout.bootstrap_value if t == n - 1 else rollout.values[t + 1]
        delta = (
            rollout.rewards[t] + gamma * next_value * nonterminal - rollout.values[t]
        )
        last = delta + gamma * gae_lambda * nonterminal * last
        advantages[t] = last
    returns = advantages + rollout.values
    return advantages, returns


@dataclass
class UpdateDiagnostics:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    advantages_raw: np.ndarray


def _one_hot(actions: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((actions.size, n))
    out[np.arange(actions.size), actions] = 1.0
    return out


def _surrogate_terms(
    logits: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip: float,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Clipped surrogate loss and its gradient with respect to the logits."""
    n = actions.size
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    logp_new = logp_all[np.arange(n), actions]
    ratio = np.exp(logp_new - old_log_probs)
    surr_plain = ratio * advantages
    clipped_ratio = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    surr_clipped = clipped_ratio * advantages
    loss = -float(np.minimum(surr_plain, surr_clipped).mean())
    # gradient passes through only where the min does not pick a binding clip
    clip_binding = (ratio < 1.0 - clip) | (ratio > 1.0 + clip)
    blocked = (surr_clipped < surr_plain) & clip_binding
    coef = np.where(blocked, 0.0, -advantages * ratio / n)
    dlogits = coef[:, None] * (_one_hot(actions, logits.shape[1]) - probs)
    return loss, dlogits, ratio, probs


def _entropy_terms(
    probs: np.ndarray, logits_shape_n: int
) -> tuple[float, np.ndarray]:
    """Mean entropy of the batch and its gradient with respect to the logits."""
    logp = np.log(np.maximum(probs, 1e-300))
    per_sample = -(probs * logp).sum(axis=1)
    entropy = float(per_sample.mean())
    # d(mean entropy)/dlogits = -p * (logp + H) / n
    dlogits = -probs * (logp + per_sample[:, None]) / logits_shape_n
    return entropy, dlogits


def surrogate_objective(
    bundle: AgentBundle,
    obs: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    returns: np.ndarray,
    cfg: PPOConfig,
) -> float:
    """Total loss of one minibatch under the current parameters (no update)."""
    logits = bundle.actor.predict(obs)
    loss_pi, _, _, probs = _surrogate_terms(
        logits, actions, old_log_probs, advantages, cfg.clip
    )
    entropy, _ = _entropy_terms(probs, obs.shape[0])
    values = bundle.critic.predict(obs)[:, 0]
    loss_v = float(np.mean((values - returns) ** 2))
    return loss_pi + cfg.value_coef * loss_v - cfg.entropy_coef * entropy


def ppo_update(
    bundle: AgentBundle,
    rollout: Rollout,
    cfg: PPOConfig,
    rng: np.random.Generator,
) -> UpdateDiagnostics:
    """Clipped-surrogate optimization over shuffled minibatches.

    On a non-finite loss the update aborts with all parameters restored to
    their pre-update values.
    """
    adv_raw, returns = compute_gae(rollout, cfg.gamma, cfg.gae_lambda)
    adv = (adv_raw - adv_raw.mean()) / max(float(adv_raw.std()), 1e-8)
    n = len(rollout)

    snapshot = (
        [w.copy() for w in bundle.actor.weights],
        [b.copy() for b in bundle.actor.biases],
        [w.copy() for w in bundle.critic.weights],
        [b.copy() for b in bundle.critic.biases],
    )

    policy_losses, value_losses, entropies, clip_fracs = [], [], [], []
    try:
        for _ in range(cfg.epochs_per_update):
            order = rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                mb = order[start : start + cfg.minibatch_size]
                obs_mb = rollout.obs[mb]
                act_mb = rollout.actions[mb]

                logits, actor_tape = bundle.actor.forward(obs_mb)
                loss_pi, dlogits_pi, ratio, probs = _surrogate_terms(
                    logits, act_mb, rollout.log_probs[mb], adv[mb], cfg.clip
                )
                entropy, dlogits_ent = _entropy_terms(probs, mb.size)
                values, critic_tape = bundle.critic.forward(obs_mb)
                err = values[:, 0] - returns[mb]
                loss_v = float(np.mean(err**2))
                total = loss_pi + cfg.value_coef * loss_v - cfg.entropy_coef * entropy
                if not math.isfinite(total):
                    raise NumericalError(
                        f"non-finite loss (policy={loss_pi}, value={loss_v}, "
                        f"entropy={entropy}); update aborted"
                    )

                dlogits = dlogits_pi - cfg.entropy_coef * dlogits_ent
                actor_grads = bundle.actor.backward_loss(actor_tape, dlogits)
                clip_gradient_norm(actor_grads, cfg.max_grad_norm)
                apply_update(bundle.actor, actor_grads, bundle.actor_opt, cfg.lr)

                dvalues = cfg.value_coef * (2.0 * err / mb.size)[:, None]
                critic_grads = bundle.critic.backward_loss(critic_tape, dvalues)
                clip_gradient_norm(critic_grads, cfg.max_grad_norm)
                apply_update(bundle.critic, critic_grads, bundle.critic_opt, cfg.lr)

                policy_losses.append(loss_pi)
                value_losses.append(loss_v)
                entropies.append(entropy)
                clip_fracs.append(float(np.mean(np.abs(ratio - 1.0) > cfg.clip)))
    except NumericalError:
        bundle.actor.weights = [w.copy() for w in snapshot[0]]
        bundle.actor.biases = [b.copy() for b in snapshot[1]]
        bundle.critic.weights = [w.copy() for w in snapshot[2]]
        bundle.critic.biases = [b.copy() for b in snapshot[3]]
        raise

    return UpdateDiagnostics(
        policy_loss=float(np.mean(policy_losses)),
        value_loss=float(np.mean(value_losses)),
        entropy=float(np.mean(entropies)),
        clip_fraction=float(np.mean(clip_fracs)),
        advantages_raw=adv_raw,
    )


@dataclass
class EvalResult:
    """Aggregates over greedy evaluation episodes, plus the raw chunk logs."""

    qoe: float
    reward: float
    quality_sum: float
    switch_sum: float
    rebuffer_sum: float
    episodes: list  # one list of StepOutcome per episode

    def as_row(self) -> dict[str, float]:
        return {
            "qoe": self.qoe,
            "reward": self.reward,
            "quality_sum": self.quality_sum,
            "switch_sum": self.switch_sum,
            "rebuffer_sum": self.rebuffer_sum,
        }


def evaluate_greedy(
    session: Session, bundle: AgentBundle, episodes: int = 1
) -> EvalResult:
    """Deterministic (argmax) evaluation episodes; normalizer stats are frozen."""
    qoes, rewards = [], []
    quality_sums, switch_sums, rebuffer_sums = [], [], []
    all_outcomes = []
    for _ in range(episodes):
        session.reset()
        done = False
        while not done:
            nobs = bundle.obs_norm.normalize(session.current_obs)
            _, _, done, _ = session.step(greedy_action(bundle.actor, nobs))
        outcomes = list(session.episode_outcomes)
        all_outcomes.append(outcomes)
        qoes.append(episode_qoe(outcomes, session.config.qoe))
        rewards.append(sum(o.reward for o in outcomes))
        quality_sums.append(sum(o.quality for o in outcomes))
        switch_sums.append(sum(o.switch_penalty for o in outcomes))
        rebuffer_sums.append(sum(o.rebuffer_s for o in outcomes))
    return EvalResult(
        qoe=float(np.mean(qoes)),
        reward=float(np.mean(rewards)),
        quality_sum=float(np.mean(quality_sums)),
        switch_sum=float(np.mean(switch_sums)),
        rebuffer_sum=float(np.mean(rebuffer_sums)),
        episodes=all_outcomes,
    )
