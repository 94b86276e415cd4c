"""Advantage estimation and proximal policy updates.

Advantages come from the exponentially weighted temporal-difference
scan (backward recursion, truncated at episode ends); the policy step
is the clipped-ratio surrogate, with an adaptive KL-penalty variant
kept for ablations. All gradients are assembled analytically through
the numeric module, so they can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import PipelineError, ShapeError, ValidationError
from .numeric import AdamState, adam_step_arrays, mlp_backward, mlp_forward
from .policy import ActorParams, CriticParams, action_mean, entropy, log_prob_from_mean


@dataclass
class PPOConfig:
    gamma: float = 0.995
    gae_lambda: float = 0.97
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch_size: int = 5
    lr: float = 0.003
    entropy_coef: float = 1e-3
    value_coef: float = 0.5
    bonus_weight: float = 1.0
    variant: str = "clip"          # "clip" or "adaptive_kl"
    kl_beta: float = 1.0           # adaptive_kl initial penalty
    kl_a: float = 1.5
    kl_b: float = 2.0
    kl_d_target: float = 0.01

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0 or not 0.0 <= self.gae_lambda < 1.0:
            raise ValidationError("gamma and gae_lambda must lie in [0, 1)")
        if not 0.0 < self.clip_eps <= 0.5:
            raise ValidationError("clip_eps must lie in (0, 0.5]")
        if self.epochs < 1 or self.minibatch_size < 1:
            raise ValidationError("epochs and minibatch_size must be >= 1")
        if self.lr < 0 or self.value_coef < 0 or self.entropy_coef < 0:
            raise ValidationError("coefficients must be >= 0")
        if self.variant not in ("clip", "adaptive_kl"):
            raise ValidationError(f"unknown variant {self.variant!r}")


@dataclass
class RolloutBatch:
    """Concatenated on-policy steps plus per-episode bookkeeping.

    ``env_reward`` is normalized to [0, 1] (clicks / 10);
    ``episode_env_totals`` keeps the raw per-episode click sums for CTR.
    """

    obs: np.ndarray                # (N, obs_dim)
    actions: np.ndarray            # (N, action_dim)
    log_prob_old: np.ndarray       # (N,)
    env_reward: np.ndarray         # (N,) normalized
    bonus_reward: np.ndarray       # (N,)
    value: np.ndarray              # (N,)
    done: np.ndarray               # (N,) bool, True on episode-final steps
    episode_starts: np.ndarray     # (E,) int
    episode_env_totals: np.ndarray  # (E,) int, raw click sums
    episode_lengths: np.ndarray    # (E,) int
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __len__(self) -> int:
        return self.obs.shape[0]

    def validate(self) -> None:
        n = len(self)
        for name in ("actions", "log_prob_old", "env_reward", "bonus_reward",
                     "value", "done"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError(f"field {name} length != {n}")
        if not np.isfinite(self.log_prob_old).all() or not np.isfinite(self.value).all():
            raise ValidationError("non-finite log probs or values in batch")


def compute_gae(rewards, values, bootstrap_value: float, dones,
                gamma: float, gae_lambda: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and value targets from the lambda-weighted TD scan.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t);
    A_t accumulates (gamma * lambda)^l forward sums of deltas, cut at
    episode boundaries; returns_t = A_t + V(s_t). The bootstrap value
    stands in for V beyond the last step and must be 0 when that step
    is terminal.
    """
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    dones = np.ascontiguousarray(dones, dtype=np.bool_)
    if not (rewards.shape == values.shape == dones.shape) or rewards.ndim != 1:
        raise ShapeError("rewards, values and dones must be equal-length vectors")
    return kernels.gae_scan(rewards, values, float(bootstrap_value), dones,
                            gamma, gae_lambda)


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero-mean unit-std advantages, std floored at 1e-8."""
    return (adv - adv.mean()) / max(float(adv.std()), 1e-8)


def prepare_batch(batch: RolloutBatch, config: PPOConfig) -> None:
    """Fill advantages (normalized) and returns from the combined reward."""
    batch.validate()
    combined = batch.env_reward + config.bonus_weight * batch.bonus_reward
    adv, ret = compute_gae(combined, batch.value, 0.0, batch.done,
                           config.gamma, config.gae_lambda)
    batch.advantages = normalize_advantages(adv)
    batch.returns = ret


def ppo_clip_objective(ratios, advantages, clip_eps: float) -> float:
    """mean(min(r * A, clip(r, 1-eps, 1+eps) * A)); higher is better."""
    ratios = np.asarray(ratios, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if ratios.shape != advantages.shape:
        raise ShapeError("ratios and advantages must have equal length")
    if (ratios <= 0).any():
        raise ValidationError("ratios must be positive")
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps)
    return float(np.minimum(ratios * advantages, clipped * advantages).mean())


def adaptive_kl_objective(ratios, advantages, kl: float, beta: float) -> float:
    """mean(r * A) - beta * kl; the penalty-form surrogate."""
    ratios = np.asarray(ratios, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if (ratios <= 0).any():
        raise ValidationError("ratios must be positive")
    if beta < 0:
        raise ValidationError("beta must be >= 0")
    return float((ratios * advantages).mean() - beta * kl)


def update_beta(beta: float, d: float, d_target: float, a: float, b: float) -> float:
    """Multiplicative penalty adaptation: shrink when d < d_target * a, else grow."""
    if beta <= 0 or d_target <= 0 or a <= 0 or b <= 0:
        raise ValidationError("update_beta arguments must be positive")
    return beta / b if d < d_target * a else beta * b


@dataclass
class PPOStats:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float
    kl: float | None = None
    beta: float | None = None


def _gaussian_kl(mu_old, log_std_old, mu_new, log_std_new):
    """Exact per-sample KL(old || new) for diagonal Gaussians."""
    var_new = np.exp(2.0 * log_std_new)
    diff = mu_old - mu_new
    per_dim = (log_std_new - log_std_old)[None, :] + \
        (np.exp(2.0 * log_std_old)[None, :] + diff * diff) / (2.0 * var_new[None, :]) - 0.5
    return per_dim.sum(axis=1)


def _critic_input(critic: CriticParams, obs, actions):
    if critic.input_mode == "state":
        return obs
    return np.concatenate([obs, actions], axis=1)


def ppo_minibatch_loss_and_grads(actor: ActorParams, critic: CriticParams,
                                 obs, actions, log_prob_old, advantages, returns,
                                 config: PPOConfig,
                                 old_actor: ActorParams | None = None,
                                 beta: float = 0.0):
    """Total loss and analytic gradients for one minibatch.

    Loss = -surrogate + value_coef * MSE(V, returns) - entropy_coef * H.
    The surrogate is the clipped objective, or the KL-penalty form when
    ``config.variant == "adaptive_kl"`` (then ``old_actor``/``beta``
    supply the penalty reference). Returns
    (loss, actor_grads_list, critic_grads_list, info dict); gradient
    lists are ordered like ``actor.arrays()`` / ``critic.arrays()``.
    """
    n = obs.shape[0]
    mu, cache = mlp_forward(actor.mlp, obs)
    lp_new = log_prob_from_mean(actor, mu, actions)
    log_ratio = np.clip(lp_new - log_prob_old, -60.0, 60.0)
    ratio = np.exp(log_ratio)

    sigma_sq = np.exp(2.0 * actor.log_std)
    resid = actions - mu                      # (n, d)
    z_sq = resid * resid / sigma_sq[None, :]

    if config.variant == "clip":
        clipped = np.clip(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps)
        surr1 = ratio * advantages
        surr2 = clipped * advantages
        objective = float(np.minimum(surr1, surr2).mean())
        inside = (ratio >= 1.0 - config.clip_eps) & (ratio <= 1.0 + config.clip_eps)
        active = (surr1 <= surr2) | inside
        dobj_dlp = np.where(active, ratio * advantages, 0.0)
        kl_term = 0.0
    else:
        objective = float((ratio * advantages).mean())
        dobj_dlp = ratio * advantages
        mu_old = action_mean(old_actor, obs)
        kl_samples = _gaussian_kl(mu_old, old_actor.log_std, mu, actor.log_std)
        kl_term = float(kl_samples.mean())

    h = entropy(actor)
    dloss_dlp = -dobj_dlp / n
    grad_mu = dloss_dlp[:, None] * resid / sigma_sq[None, :]
    grad_log_std = (dloss_dlp[:, None] * (z_sq - 1.0)).sum(axis=0)
    grad_log_std -= config.entropy_coef

    loss = -objective - config.entropy_coef * h
    if config.variant == "adaptive_kl":
        loss += beta * kl_term
        var_old = np.exp(2.0 * old_actor.log_std)
        dmu = (mu - mu_old) / sigma_sq[None, :]
        grad_mu += (beta / n) * dmu
        dlog_std = 1.0 - (var_old[None, :] + (mu_old - mu) ** 2) / sigma_sq[None, :]
        grad_log_std += (beta / n) * dlog_std.sum(axis=0)

    actor_mlp_grads, _ = mlp_backward(actor.mlp, cache, grad_mu, need_input_grad=False)
    actor_grads = actor_mlp_grads.arrays() + [grad_log_std]

    x_c = _critic_input(critic, obs, actions)
    v_out, vcache = mlp_forward(critic.mlp, x_c)
    v = v_out[:, 0]
    verr = v - returns
    value_loss = float((verr * verr).mean())
    loss += config.value_coef * value_loss
    grad_v = (config.value_coef * 2.0 / n) * verr
    critic_mlp_grads, _ = mlp_backward(critic.mlp, vcache, grad_v[:, None],
                                       need_input_grad=False)
    info = {
        "objective": objective,
        "value_loss": value_loss,
        "entropy": h,
        "ratio": ratio,
        "kl": kl_term,
    }
    return loss, actor_grads, critic_mlp_grads.arrays(), info


def ppo_update(actor: ActorParams, critic: CriticParams, batch: RolloutBatch,
               config: PPOConfig, *, actor_opt: AdamState, critic_opt: AdamState,
               rng: np.random.Generator, beta: float | None = None) -> PPOStats:
    """K epochs of shuffled minibatch Adam on the PPO total loss.

    Expects ``prepare_batch`` to have filled normalized advantages and
    returns. Updates actor (MLP + log_std) and critic in place. For the
    adaptive-KL variant the returned stats carry the exact mean KL
    against the pre-update snapshot and the adapted beta.
    """
    config.validate()
    if len(batch) == 0:
        raise ValidationError("batch must be nonempty")
    if batch.advantages is None or batch.returns is None:
        raise ValidationError("advantages not prepared; call prepare_batch first")
    if beta is None:
        beta = config.kl_beta

    old_actor = actor.copy() if config.variant == "adaptive_kl" else None
    n = len(batch)
    policy_losses, value_losses, entropies, clip_fracs = [], [], [], []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.minibatch_size):
            idx = order[lo:lo + config.minibatch_size]
            loss, a_grads, c_grads, info = ppo_minibatch_loss_and_grads(
                actor, critic,
                batch.obs[idx], batch.actions[idx], batch.log_prob_old[idx],
                batch.advantages[idx], batch.returns[idx],
                config, old_actor=old_actor, beta=beta)
            if not np.isfinite(loss):
                raise PipelineError(f"non-finite PPO loss ({loss!r}); aborting update")
            adam_step_arrays(actor_opt, actor.arrays(), a_grads, config.lr)
            actor.clamp_log_std()
            adam_step_arrays(critic_opt, critic.arrays(), c_grads, config.lr)
            policy_losses.append(-info["objective"])
            value_losses.append(info["value_loss"])
            entropies.append(info["entropy"])
            clip_fracs.append(float(
                (np.abs(info["ratio"] - 1.0) > config.clip_eps).mean()))

    mu_final = action_mean(actor, batch.obs)
    lp_final = log_prob_from_mean(actor, mu_final, batch.actions)
    approx_kl = float((batch.log_prob_old - lp_final).mean())
    kl = None
    new_beta = None
    if config.variant == "adaptive_kl":
        kl = float(_gaussian_kl(action_mean(old_actor, batch.obs),
                                old_actor.log_std, mu_final,
                                actor.log_std).mean())
        new_beta = update_beta(beta, kl, config.kl_d_target, config.kl_a, config.kl_b)
    return PPOStats(
        policy_loss=float(np.mean(policy_losses)),
        value_loss=float(np.mean(value_losses)),
        entropy=float(np.mean(entropies)),
        approx_kl=approx_kl,
        clip_fraction=float(np.mean(clip_fracs)),
        kl=kl,
        beta=new_beta,
    )
