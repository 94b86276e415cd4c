"""Synthetic online-recommendation environment.

Mirrors the interface dimensions of a retail recommendation simulator:
each user has 11 static attributes one-hot encoded into 88 binary
dimensions plus a 3-dim dynamic interest, giving a 91-dim observation;
an action is a 27-dim page embedding in [-1, 1]^27, and the reward is
the number of clicked items on a 10-slot page.

The generative model is intentionally simple. Each episode draws a
latent 27-dim unit preference vector from the observation through a
fixed seeded projection; click probability rises with the cosine
alignment between the (normalized) action and that latent preference.
The latent vector is never part of the observation; learners only see
rewards. :func:`oracle_action` exposes it for diagnostics and
calibration tests only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ShapeError, StateError, ValidationError

N_ATTRS = 11
N_CATEGORIES = 8
STATIC_DIM = N_ATTRS * N_CATEGORIES  # 88
INTEREST_DIM = 3
OBS_DIM = STATIC_DIM + INTEREST_DIM  # 91
ACTION_DIM = 27
PAGE_SIZE = 10


@dataclass(frozen=True)
class EnvConfig:
    seed: int = 0
    max_steps: int = 50
    kappa: float = 6.0
    click_bias: float = 0.3
    drift: float = 0.2
    leave_prob: float = 0.05

    def validate(self) -> None:
        if self.max_steps < 1:
            raise ValidationError("env.max_steps must be >= 1")
        if not 0.0 <= self.leave_prob < 1.0:
            raise ValidationError("env.leave_prob must be in [0, 1)")
        if self.drift < 0.0 or self.kappa <= 0.0:
            raise ValidationError("env.drift must be >= 0 and env.kappa > 0")


@lru_cache(maxsize=8)
def _world_matrices(seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed per-world projections: preference map (27x91), drift map (3x27)."""
    rng = np.random.default_rng(seed)
    pref_map = rng.normal(size=(ACTION_DIM, OBS_DIM))
    drift_map = rng.normal(size=(INTEREST_DIM, ACTION_DIM)) / np.sqrt(ACTION_DIM)
    pref_map.setflags(write=False)
    drift_map.setflags(write=False)
    return pref_map, drift_map


@dataclass
class UserProfile:
    static_attrs: np.ndarray       # (11,) ints in {0..7}
    static_code: np.ndarray        # (88,) binary
    interest: np.ndarray           # (3,) in [-1, 1]
    hidden_pref: np.ndarray        # (27,) unit vector, latent


@dataclass
class EnvState:
    config: EnvConfig
    profile: UserProfile
    step_index: int = 0
    consecutive_zero_rewards: int = 0
    done: bool = False
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def observation(self) -> np.ndarray:
        return np.concatenate([self.profile.static_code, self.profile.interest])


@dataclass
class StepResult:
    observation: np.ndarray
    reward: int
    done: bool
    info: dict


def encode_user(static_attrs) -> np.ndarray:
    """Concatenate 11 one-hot blocks of width 8 into an 88-dim binary code."""
    attrs = np.asarray(static_attrs)
    if attrs.shape != (N_ATTRS,):
        raise ShapeError(f"expected {N_ATTRS} attributes, got shape {attrs.shape}")
    if attrs.min() < 0 or attrs.max() >= N_CATEGORIES:
        raise ValidationError(f"attributes must lie in [0, {N_CATEGORIES})")
    code = np.zeros(STATIC_DIM)
    code[np.arange(N_ATTRS) * N_CATEGORIES + attrs.astype(int)] = 1.0
    return code


def env_reset(config: EnvConfig, seed: int) -> tuple[EnvState, np.ndarray]:
    """Start an episode: sample a user, derive the latent preference."""
    config.validate()
    pref_map, _ = _world_matrices(config.seed)
    rng = np.random.default_rng(seed)
    attrs = rng.integers(0, N_CATEGORIES, size=N_ATTRS)
    interest = rng.uniform(-1.0, 1.0, size=INTEREST_DIM)
    code = encode_user(attrs)
    obs = np.concatenate([code, interest])
    raw = pref_map @ obs
    hidden = raw / np.linalg.norm(raw)
    profile = UserProfile(attrs, code, interest, hidden)
    state = EnvState(config, profile, rng=rng)
    return state, obs


def _click_prob(config: EnvConfig, alignment: float) -> float:
    x = config.kappa * (alignment - config.click_bias)
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    ex = np.exp(x)
    return ex / (1.0 + ex)


def env_step(state: EnvState, action: np.ndarray) -> StepResult:
    """Advance one interaction: page shown, clicks drawn, interest drifts."""
    if state.done:
        raise StateError("episode is done; reset before stepping")
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (ACTION_DIM,):
        raise ShapeError(f"action must have shape ({ACTION_DIM},)")
    if not np.isfinite(action).all():
        raise ValidationError("non-finite action")
    config = state.config
    _, drift_map = _world_matrices(config.seed)

    a = np.clip(action, -1.0, 1.0)
    a_hat = a / max(np.linalg.norm(a), 1e-12)
    p = _click_prob(config, float(a_hat @ state.profile.hidden_pref))
    reward = int(state.rng.binomial(PAGE_SIZE, p))
    leave_draw = float(state.rng.uniform())

    interest = state.profile.interest
    state.profile.interest = np.clip(
        interest + config.drift * (drift_map @ a_hat - interest), -1.0, 1.0)

    state.step_index += 1
    if reward == 0:
        state.consecutive_zero_rewards += 1
    else:
        state.consecutive_zero_rewards = 0
    state.done = (
        state.step_index >= config.max_steps
        or state.consecutive_zero_rewards >= 2
        or leave_draw < config.leave_prob
    )
    return StepResult(state.observation(), reward, state.done,
                      {"click_prob": p, "step_index": state.step_index})


def oracle_action(state: EnvState) -> np.ndarray:
    """Diagnostic-only: the latent preference vector, i.e. the ideal action.

    Not available to learners; used to calibrate the reward ceiling.
    """
    if state.done:
        raise StateError("episode is done")
    return state.profile.hidden_pref.copy()


def random_action(rng: np.random.Generator) -> np.ndarray:
    """Uniform action in [-1, 1]^27, the no-skill baseline."""
    return rng.uniform(-1.0, 1.0, size=ACTION_DIM)
