"""Expert-policy acquisition via deterministic-policy-gradient training.

The expert is an actor-critic pair (128-unit hidden layers) trained
off-policy with a small ring replay buffer, slow target copies and
Ornstein-Uhlenbeck exploration noise. Once trained, the deterministic
actor is rolled out to export state-action demonstrations for the
imitation pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .envsim import ACTION_DIM, OBS_DIM, EnvConfig, env_reset, env_step
from .errors import PipelineError, ShapeError, ValidationError
from .numeric import AdamState, MLPParams, adam_step, mlp_backward, mlp_forward, mlp_init
from .seeding import derive_rng, derive_seed

HIDDEN = 128


@dataclass
class DDPGConfig:
    gamma: float = 0.95
    tau: float = 0.001
    hidden: int = HIDDEN
    buffer_capacity: int = 1000
    episodes: int = 20000
    batch_size: int = 64
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    ou_theta: float = 0.15
    ou_mu: float = 0.0
    ou_sigma: float = 0.2
    ou_scale: float = 0.1
    update_every: int = 1
    eval_every: int = 500
    eval_episodes: int = 20
    plateau_tol: float = 0.01
    min_episodes: int = 2000

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("ddpg.gamma must lie in [0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError("ddpg.tau must lie in [0, 1]")
        if self.buffer_capacity < 1 or self.batch_size < 1 or self.episodes < 1:
            raise ValidationError("ddpg sizes must be >= 1")


@dataclass
class OUState:
    """Mean-reverting noise process; emitted noise is scale * x."""

    x: np.ndarray
    theta: float = 0.15
    mu: float = 0.0
    sigma: float = 0.2
    scale: float = 0.1

    @classmethod
    def fresh(cls, dim: int = ACTION_DIM, **kw) -> "OUState":
        return cls(np.zeros(dim), **kw)


def ou_next(state: OUState, rng: np.random.Generator) -> tuple[np.ndarray, OUState]:
    """Advance the process one step and return (noise, state)."""
    z = rng.standard_normal(state.x.shape[0])
    state.x = state.x + state.theta * (state.mu - state.x) + state.sigma * z
    return state.scale * state.x, state


class ReplayBuffer:
    """Fixed-capacity FIFO store of (s, a, r, s', done) transitions."""

    def __init__(self, capacity: int = 1000, obs_dim: int = OBS_DIM,
                 action_dim: int = ACTION_DIM):
        if capacity < 1:
            raise ValidationError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        """Uniform sample of n distinct transitions."""
        if n > self._size:
            raise ValidationError(f"cannot sample {n} from buffer of size {self._size}")
        idx = rng.choice(self._size, size=n, replace=False)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx])


@dataclass
class DDPGNets:
    actor: MLPParams               # tanh head
    critic: MLPParams              # identity head on (obs ++ action)
    target_actor: MLPParams
    target_critic: MLPParams

    def copy(self) -> "DDPGNets":
        return DDPGNets(self.actor.copy(), self.critic.copy(),
                        self.target_actor.copy(), self.target_critic.copy())


def make_ddpg(rng: np.random.Generator, obs_dim: int = OBS_DIM,
              action_dim: int = ACTION_DIM, hidden: int = HIDDEN) -> DDPGNets:
    actor = mlp_init([obs_dim, hidden, hidden, action_dim], head="tanh", rng=rng)
    critic = mlp_init([obs_dim + action_dim, hidden, hidden, 1], head="identity", rng=rng)
    return DDPGNets(actor, critic, actor.copy(), critic.copy())


def soft_update(target: MLPParams, online: MLPParams, tau: float) -> MLPParams:
    """target <- (1 - tau) * target + tau * online, entrywise, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError("tau must lie in [0, 1]")
    t_arrays, o_arrays = target.arrays(), online.arrays()
    for t_arr, o_arr in zip(t_arrays, o_arrays):
        if t_arr.shape != o_arr.shape:
            raise ShapeError("target/online shapes differ")
        kernels.soft_blend(t_arr.reshape(-1), o_arr.reshape(-1), tau)
    return target


def actor_forward(actor: MLPParams, obs: np.ndarray) -> np.ndarray:
    out, _ = mlp_forward(actor, np.atleast_2d(obs))
    return out[0] if np.asarray(obs).ndim == 1 else out


def ddpg_update(nets: DDPGNets, batch, gamma: float, tau: float,
                lr_actor: float, lr_critic: float,
                opt_actor: AdamState, opt_critic: AdamState) -> tuple[float, float]:
    """One off-policy update; returns (q_loss, actor_objective).

    Critic regresses Q(s, a) onto r/10 + gamma * (1 - done) *
    Q_target(s', actor_target(s')); the actor ascends mean Q(s,
    actor(s)) through the updated critic; both targets blend toward the
    online nets with rate tau.
    """
    obs, actions, rewards, next_obs, dones = batch
    n = obs.shape[0]
    if n == 0:
        raise ValidationError("batch must be nonempty")

    next_a, _ = mlp_forward(nets.target_actor, next_obs)
    q_next, _ = mlp_forward(nets.target_critic, np.concatenate([next_obs, next_a], axis=1))
    y = rewards / 10.0 + gamma * (1.0 - dones.astype(np.float64)) * q_next[:, 0]

    q, qcache = mlp_forward(nets.critic, np.concatenate([obs, actions], axis=1))
    err = q[:, 0] - y
    q_loss = float((err * err).mean())
    if not np.isfinite(q_loss):
        raise PipelineError("non-finite critic loss in expert update")
    c_grads, _ = mlp_backward(nets.critic, qcache, (2.0 / n) * err[:, None],
                              need_input_grad=False)
    adam_step(opt_critic, nets.critic, c_grads, lr_critic)

    a_pred, acache = mlp_forward(nets.actor, obs)
    q_pi, pcache = mlp_forward(nets.critic, np.concatenate([obs, a_pred], axis=1))
    actor_obj = float(q_pi[:, 0].mean())
    _, grad_in = mlp_backward(nets.critic, pcache, np.full((n, 1), -1.0 / n))
    a_grads, _ = mlp_backward(nets.actor, acache, grad_in[:, obs.shape[1]:],
                              need_input_grad=False)
    adam_step(opt_actor, nets.actor, a_grads, lr_actor)

    soft_update(nets.target_actor, nets.actor, tau)
    soft_update(nets.target_critic, nets.critic, tau)
    return q_loss, actor_obj


@dataclass
class ExpertDataset:
    """Demonstration pairs sampled from the trained expert."""

    states: np.ndarray             # (N, 91)
    actions: np.ndarray            # (N, 27)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.states.shape[0]

    def validate(self) -> None:
        if self.states.ndim != 2 or self.actions.ndim != 2 \
                or self.states.shape[0] != self.actions.shape[0]:
            raise ShapeError("states and actions must pair up row for row")
        if self.states.shape[0] == 0:
            raise ValidationError("expert dataset is empty")
        if np.abs(self.actions).max() > 1.0 + 1e-12:
            raise ValidationError("expert actions must lie in [-1, 1]")


@dataclass
class TrainCurvePoint:
    episode: int
    mean_env_reward: float         # mean per-episode click total, last window
    eval_ctr: float


def _run_episode(config: EnvConfig, nets: DDPGNets, env_seed: int,
                 ou: OUState | None, rng: np.random.Generator | None,
                 buffer: ReplayBuffer | None, updater=None):
    """Roll one episode; optionally push transitions and run updates."""
    state, obs = env_reset(config, env_seed)
    total = 0
    steps = 0
    pairs = []
    while not state.done:
        a = actor_forward(nets.actor, obs)
        if ou is not None:
            noise, _ = ou_next(ou, rng)
            a = np.clip(a + noise, -1.0, 1.0)
        result = env_step(state, a)
        if buffer is not None:
            buffer.push(obs, a, result.reward, result.observation, result.done)
        pairs.append((obs, a))
        total += result.reward
        steps += 1
        obs = result.observation
        if updater is not None:
            updater()
    return total, steps, pairs


def evaluate_expert(nets: DDPGNets, config: EnvConfig, n_episodes: int,
                    seed: int) -> float:
    """Mean CTR of the deterministic actor over fixed evaluation episodes."""
    ctrs = []
    for i in range(n_episodes):
        total, steps, _ = _run_episode(config, nets, derive_seed(seed, 9000 + i),
                                       None, None, None)
        ctrs.append(total / (10.0 * steps))
    return float(np.mean(ctrs))


def train_expert(env_config: EnvConfig, ddpg: DDPGConfig, episodes: int,
                 seed: int) -> tuple[DDPGNets, list[TrainCurvePoint]]:
    """Off-policy training loop with OU exploration and plateau stopping.

    Stops early once evaluation CTR improves by less than
    ``plateau_tol`` relative to the previous checkpointed evaluation
    (checked every ``eval_every`` episodes after ``min_episodes``).
    Fully deterministic in ``seed``.
    """
    if episodes < 1:
        raise ValidationError("episodes must be >= 1")
    ddpg.validate()
    rng = derive_rng(seed, 1)
    nets = make_ddpg(derive_rng(seed, 0), hidden=ddpg.hidden)
    opt_actor = AdamState.for_mlp(nets.actor)
    opt_critic = AdamState.for_mlp(nets.critic)
    buffer = ReplayBuffer(ddpg.buffer_capacity)

    step_counter = [0]

    def updater():
        step_counter[0] += 1
        if len(buffer) >= ddpg.batch_size and step_counter[0] % ddpg.update_every == 0:
            ddpg_update(nets, buffer.sample(ddpg.batch_size, rng),
                        ddpg.gamma, ddpg.tau, ddpg.lr_actor, ddpg.lr_critic,
                        opt_actor, opt_critic)

    curve: list[TrainCurvePoint] = []
    window: list[int] = []
    prev_eval = None
    for ep in range(episodes):
        ou = OUState.fresh(theta=ddpg.ou_theta, mu=ddpg.ou_mu,
                           sigma=ddpg.ou_sigma, scale=ddpg.ou_scale)
        total, _, _ = _run_episode(env_config, nets, derive_seed(seed, 2, ep),
                                   ou, rng, buffer, updater)
        window.append(total)
        done_eps = ep + 1
        if done_eps % ddpg.eval_every == 0 or done_eps == episodes:
            eval_ctr = evaluate_expert(nets, env_config, ddpg.eval_episodes, seed)
            curve.append(TrainCurvePoint(done_eps, float(np.mean(window)), eval_ctr))
            window = []
            if done_eps >= ddpg.min_episodes and prev_eval is not None:
                if eval_ctr < prev_eval * (1.0 + ddpg.plateau_tol):
                    break
            prev_eval = eval_ctr
    return nets, curve


def collect_expert(nets: DDPGNets, env_config: EnvConfig, n_pairs: int,
                   seed: int) -> ExpertDataset:
    """Roll the noise-free actor until n_pairs (s, a) pairs are recorded."""
    if n_pairs < 1:
        raise ValidationError("n_pairs must be >= 1")
    states, actions, totals = [], [], []
    ep = 0
    collected = 0
    while collected < n_pairs:
        total, steps, pairs = _run_episode(env_config, nets,
                                           derive_seed(seed, 3, ep), None, None, None)
        for s, a in pairs:
            states.append(s)
            actions.append(a)
        totals.append(total)
        collected += steps
        ep += 1
    dataset = ExpertDataset(
        np.asarray(states)[:n_pairs], np.asarray(actions)[:n_pairs],
        {"seed": seed, "episodes": ep, "mean_env_reward": float(np.mean(totals))})
    dataset.validate()
    return dataset
