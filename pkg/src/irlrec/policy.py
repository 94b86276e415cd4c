"""Gaussian actor and value critic for the recommendation policy.

The actor is an MLP (91 -> 256 -> 256 -> 27, tanh head) producing the
action mean, with a global learnable log-std vector (diagonal Gaussian,
state-independent variance). The critic maps the observation (or the
observation-action pair, behind ``input_mode``) to a scalar value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .envsim import ACTION_DIM, OBS_DIM
from .errors import ShapeError, ValidationError
from .numeric import MLPParams, mlp_forward, mlp_init

HIDDEN = 256
LOG_STD_INIT = -0.5
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class ActorParams:
    mlp: MLPParams                 # tanh head
    log_std: np.ndarray            # (action_dim,), clamped to [-5, 2]

    @property
    def action_dim(self) -> int:
        return self.mlp.out_dim

    def arrays(self) -> list[np.ndarray]:
        return self.mlp.arrays() + [self.log_std]

    def copy(self) -> "ActorParams":
        return ActorParams(self.mlp.copy(), self.log_std.copy())

    def clamp_log_std(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)


@dataclass
class CriticParams:
    mlp: MLPParams                 # identity head
    input_mode: str = "state"      # "state" or "state_action"

    def arrays(self) -> list[np.ndarray]:
        return self.mlp.arrays()


def make_actor(rng: np.random.Generator, obs_dim: int = OBS_DIM,
               action_dim: int = ACTION_DIM, hidden: int = HIDDEN) -> ActorParams:
    mlp = mlp_init([obs_dim, hidden, hidden, action_dim], head="tanh", rng=rng)
    return ActorParams(mlp, np.full(action_dim, LOG_STD_INIT))


def make_critic(rng: np.random.Generator, obs_dim: int = OBS_DIM,
                action_dim: int = ACTION_DIM, hidden: int = HIDDEN,
                input_mode: str = "state") -> CriticParams:
    if input_mode not in ("state", "state_action"):
        raise ValidationError(f"unknown critic input_mode {input_mode!r}")
    in_dim = obs_dim if input_mode == "state" else obs_dim + action_dim
    mlp = mlp_init([in_dim, hidden, hidden, 1], head="identity", rng=rng)
    return CriticParams(mlp, input_mode)


def action_mean(actor: ActorParams, obs: np.ndarray) -> np.ndarray:
    out, _ = mlp_forward(actor.mlp, obs)
    return out


def act(actor: ActorParams, obs: np.ndarray, mode: str = "stochastic",
        rng: np.random.Generator | None = None) -> tuple[np.ndarray, float]:
    """Sample (or take the mean) action for one observation.

    Returns (action, log density of that action under the unclipped
    Gaussian). Deterministic mode returns the mean with its own density.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 1:
        raise ShapeError("act expects a single observation vector")
    if not np.isfinite(obs).all():
        raise ValidationError("non-finite observation")
    mu = action_mean(actor, obs[None, :])[0]
    if mode == "deterministic":
        action = mu.copy()
    elif mode == "stochastic":
        if rng is None:
            raise ValidationError("stochastic mode needs an rng")
        action = mu + np.exp(actor.log_std) * rng.standard_normal(actor.action_dim)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    lp = kernels.gauss_logprob(action[None, :], mu[None, :], actor.log_std)[0]
    return action, float(lp)


def log_prob(actor: ActorParams, obs: np.ndarray, action: np.ndarray):
    """Diagonal-Gaussian log density; accepts a single pair or a batch."""
    obs = np.asarray(obs, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    single = obs.ndim == 1
    if single:
        obs = obs[None, :]
        action = action[None, :]
    if action.shape != (obs.shape[0], actor.action_dim):
        raise ShapeError(f"action shape {action.shape} does not match batch")
    mu = action_mean(actor, obs)
    lp = kernels.gauss_logprob(np.ascontiguousarray(action), mu, actor.log_std)
    return float(lp[0]) if single else lp


def log_prob_from_mean(actor: ActorParams, mu: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Log density when the action means are already known (batch)."""
    return kernels.gauss_logprob(np.ascontiguousarray(action, dtype=np.float64),
                                 np.ascontiguousarray(mu, dtype=np.float64),
                                 actor.log_std)


def entropy(actor: ActorParams) -> float:
    """Closed-form diagonal-Gaussian entropy (independent of the state)."""
    d = actor.action_dim
    return float(actor.log_std.sum() + 0.5 * d * (1.0 + np.log(2.0 * np.pi)))


def value(critic: CriticParams, obs: np.ndarray, action: np.ndarray | None = None):
    """Scalar value for one observation or a batch.

    ``action`` must be supplied iff the critic was built in
    state_action mode.
    """
    obs = np.asarray(obs, dtype=np.float64)
    single = obs.ndim == 1
    if single:
        obs = obs[None, :]
    if critic.input_mode == "state":
        if action is not None:
            raise ValidationError("state-mode critic takes no action argument")
        x = obs
    else:
        if action is None:
            raise ValidationError("state_action-mode critic requires an action")
        action = np.asarray(action, dtype=np.float64)
        if single:
            action = action[None, :]
        if action.shape[0] != obs.shape[0]:
            raise ShapeError("obs/action batch sizes differ")
        x = np.concatenate([obs, action], axis=1)
    out, _ = mlp_forward(critic.mlp, x)
    v = out[:, 0]
    return float(v[0]) if single else v
