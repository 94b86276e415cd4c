"""Expert-vs-learner discriminator, the learned reward surrogate.

D maps an (observation, action) pair to (0, 1), where values near 1
mean "looks like the expert". The agent's bonus reward is log D, so
pushing pairs toward the expert-classified region raises the bonus.
Outputs are clipped away from {0, 1} so the log never diverges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envsim import ACTION_DIM, OBS_DIM
from .errors import ShapeError, ValidationError
from .numeric import AdamState, MLPParams, adam_step, mlp_backward, mlp_forward, mlp_init

HIDDEN = 128
CLIP_EPS_DEFAULT = 1e-8


@dataclass
class DiscParams:
    mlp: MLPParams                 # sigmoid head, input obs_dim + action_dim
    clip_eps: float = CLIP_EPS_DEFAULT

    @property
    def in_dim(self) -> int:
        return self.mlp.in_dim

    def arrays(self) -> list[np.ndarray]:
        return self.mlp.arrays()


def make_disc(rng: np.random.Generator, obs_dim: int = OBS_DIM,
              action_dim: int = ACTION_DIM, hidden: int = HIDDEN,
              clip_eps: float = CLIP_EPS_DEFAULT) -> DiscParams:
    mlp = mlp_init([obs_dim + action_dim, hidden, hidden, 1], head="sigmoid", rng=rng)
    return DiscParams(mlp, clip_eps)


def _pair_matrix(disc: DiscParams, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[None, :]
        action = action[None, :]
    if obs.shape[0] != action.shape[0]:
        raise ShapeError("obs/action batch sizes differ")
    x = np.concatenate([obs, action], axis=1)
    if x.shape[1] != disc.in_dim:
        raise ShapeError(f"pair width {x.shape[1]} != discriminator input {disc.in_dim}")
    return x


def disc_score_batch(disc: DiscParams, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    out, _ = mlp_forward(disc.mlp, _pair_matrix(disc, obs, action))
    return np.clip(out[:, 0], disc.clip_eps, 1.0 - disc.clip_eps)


def disc_score(disc: DiscParams, obs: np.ndarray, action: np.ndarray) -> float:
    """P(pair is expert-like), clipped into (clip_eps, 1 - clip_eps)."""
    return float(disc_score_batch(disc, obs, action)[0])


def bonus_reward_batch(disc: DiscParams, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
    return np.log(disc_score_batch(disc, obs, action))


def bonus_reward(disc: DiscParams, obs: np.ndarray, action: np.ndarray) -> float:
    """log D(s, a); higher when D judges the pair expert-like."""
    return float(bonus_reward_batch(disc, obs, action)[0])


def disc_loss(disc: DiscParams, learner_pairs, expert_pairs) -> float:
    """Binary-classification loss -(mean_E log D + mean_L log(1 - D)).

    ``learner_pairs`` and ``expert_pairs`` are (obs matrix, action
    matrix) tuples. The policy-entropy term of the adversarial
    objective belongs to the policy update, not here.
    """
    dl = _scores_checked(disc, learner_pairs, "learner")
    de = _scores_checked(disc, expert_pairs, "expert")
    return float(-(np.log(de).mean() + np.log1p(-dl).mean()))


def _scores_checked(disc: DiscParams, pairs, name: str) -> np.ndarray:
    obs, action = pairs
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise ValidationError(f"{name} batch must be nonempty")
    return disc_score_batch(disc, obs, action)


def disc_update(disc: DiscParams, adam: AdamState, learner_pairs, expert_pairs,
                lr: float) -> float:
    """One Adam step on the classification loss; returns the loss before it."""
    lo, la = learner_pairs
    eo, ea = expert_pairs
    lo = np.asarray(lo, dtype=np.float64)
    eo = np.asarray(eo, dtype=np.float64)
    if lo.ndim != 2 or lo.shape[0] == 0 or eo.ndim != 2 or eo.shape[0] == 0:
        raise ValidationError("both batches must be nonempty")
    n_l, n_e = lo.shape[0], eo.shape[0]
    x = np.concatenate([_pair_matrix(disc, eo, ea), _pair_matrix(disc, lo, la)])
    out, cache = mlp_forward(disc.mlp, x)
    d = np.clip(out[:, 0], disc.clip_eps, 1.0 - disc.clip_eps)
    loss = float(-(np.log(d[:n_e]).mean() + np.log1p(-d[n_e:]).mean()))
    # dL/dD, zeroed where the output clip is active
    grad = np.empty_like(d)
    grad[:n_e] = -1.0 / (n_e * d[:n_e])
    grad[n_e:] = 1.0 / (n_l * (1.0 - d[n_e:]))
    grad[out[:, 0] != d] = 0.0
    grads, _ = mlp_backward(disc.mlp, cache, grad[:, None], need_input_grad=False)
    adam_step(adam, disc.mlp, grads, lr)
    return loss
