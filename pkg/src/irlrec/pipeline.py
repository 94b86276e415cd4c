"""End-to-end adversarial imitation training on the synthetic environment.

Each iteration rolls the current stochastic policy for a fixed number
of episodes, takes the configured number of discriminator steps on
learner-vs-expert pairs, then runs the proximal policy update on the
combined reward (normalized environment clicks plus the log-score
bonus recorded during the rollout). Every phase transition is appended
to an event log; metrics and an occupancy-divergence curve are written
as CSV, and parameters are checkpointed periodically.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .checkpoint import load_checkpoint, mlp_from_arrays, mlp_to_arrays, save_checkpoint
from .discriminator import DiscParams, bonus_reward_batch, disc_update, make_disc
from .envsim import (ACTION_DIM, OBS_DIM, EnvConfig, env_reset, env_step,
                     random_action)
from .errors import ConfigError, PipelineError, ShapeError, ValidationError
from .expert import ExpertDataset
from .metrics import IterationStats, write_metrics, write_text_atomic
from .numeric import AdamState
from .optim import PPOConfig, RolloutBatch, ppo_update, prepare_batch
from .policy import (ActorParams, CriticParams, act, log_prob_from_mean,
                     make_actor, make_critic, value)
from .seeding import derive_rng, derive_seed


@dataclass
class RunConfig:
    env: EnvConfig
    ppo: PPOConfig
    disc_lr: float = 0.003
    iterations: int = 200
    episodes_per_iteration: int = 100
    expert_path: str | None = None
    seed: int = 0
    out_dir: str = "runs/default"
    disc_updates_per_iteration: int = 1
    eval_episodes: int = 20
    checkpoint_every: int = 50
    js_bins: int = 16
    js_projection_seed: int = 7

    def validate(self) -> None:
        if self.iterations < 1 or self.episodes_per_iteration < 1:
            raise ValidationError("iterations and episodes_per_iteration must be >= 1")


def ctr(episode_rewards, n_steps: int) -> float:
    """Click-through rate: total clicks over 10 slots per shown page."""
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    rewards = np.atleast_1d(np.asarray(episode_rewards))
    if rewards.min() < 0 or rewards.max() > 10:
        raise ValidationError("rewards must lie in [0, 10]")
    return float(rewards.sum() / (10.0 * n_steps))


def rollout(env_config: EnvConfig, actor: ActorParams, critic: CriticParams,
            disc: DiscParams, n_episodes: int, seed: int,
            episode_offset: int = 0) -> RolloutBatch:
    """Roll full stochastic episodes and assemble a training batch.

    Episode RNG streams derive from (seed, global episode index), so
    batches are identical however the episodes are scheduled.
    """
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    obs_rows, mu_rows, act_rows = [], [], []
    rewards_raw, dones = [], []
    starts, totals, lengths = [], [], []
    log_stds = actor.log_std
    sigma = np.exp(log_stds)
    from .numeric import mlp_forward  # local alias, hot loop below

    for ep in range(n_episodes):
        idx = episode_offset + ep
        state, obs = env_reset(env_config, derive_seed(seed, 4, idx))
        policy_rng = derive_rng(seed, 5, idx)
        starts.append(len(obs_rows))
        total = 0
        steps = 0
        while not state.done:
            mu = mlp_forward(actor.mlp, obs[None, :])[0][0]
            a = mu + sigma * policy_rng.standard_normal(actor.action_dim)
            result = env_step(state, a)
            obs_rows.append(obs)
            mu_rows.append(mu)
            act_rows.append(a)
            rewards_raw.append(result.reward)
            dones.append(result.done)
            total += result.reward
            steps += 1
            obs = result.observation
        totals.append(total)
        lengths.append(steps)

    obs_mat = np.asarray(obs_rows)
    act_mat = np.asarray(act_rows)
    mu_mat = np.asarray(mu_rows)
    lps = log_prob_from_mean(actor, mu_mat, act_mat)
    values = value(critic, obs_mat) if critic.input_mode == "state" \
        else value(critic, obs_mat, act_mat)
    bonus = bonus_reward_batch(disc, obs_mat, act_mat)
    batch = RolloutBatch(
        obs=obs_mat, actions=act_mat, log_prob_old=lps,
        env_reward=np.asarray(rewards_raw, dtype=np.float64) / 10.0,
        bonus_reward=bonus, value=np.asarray(values, dtype=np.float64),
        done=np.asarray(dones, dtype=bool),
        episode_starts=np.asarray(starts, dtype=np.int64),
        episode_env_totals=np.asarray(totals, dtype=np.int64),
        episode_lengths=np.asarray(lengths, dtype=np.int64),
    )
    batch.validate()
    return batch


def collect_pairs(env_config: EnvConfig, actor: ActorParams, n_episodes: int,
                  seed: int) -> tuple[np.ndarray, np.ndarray]:
    """State-action pairs from stochastic rollouts (diagnostics only)."""
    obs_rows, act_rows = [], []
    for ep in range(n_episodes):
        state, obs = env_reset(env_config, derive_seed(seed, 4, ep))
        rng = derive_rng(seed, 5, ep)
        while not state.done:
            a, _ = act(actor, obs, mode="stochastic", rng=rng)
            result = env_step(state, a)
            obs_rows.append(obs)
            act_rows.append(a)
            obs = result.observation
    return np.asarray(obs_rows), np.asarray(act_rows)


@dataclass
class EvalResult:
    mean_ctr: float
    halfwidth: float
    mean_episode_reward: float
    ctrs: list[float] = field(default_factory=list)
    episode_rewards: list[int] = field(default_factory=list)


def evaluate(actor: ActorParams | None, env_config: EnvConfig, n_episodes: int,
             seed: int, deterministic: bool = True) -> EvalResult:
    """Roll evaluation episodes without learning; actor=None plays uniform."""
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    ctrs, totals = [], []
    for i in range(n_episodes):
        state, obs = env_reset(env_config, derive_seed(seed, 6, i))
        rng = derive_rng(seed, 7, i)
        total = 0
        steps = 0
        while not state.done:
            if actor is None:
                a = random_action(rng)
            elif deterministic:
                a, _ = act(actor, obs, mode="deterministic")
            else:
                a, _ = act(actor, obs, mode="stochastic", rng=rng)
            result = env_step(state, a)
            total += result.reward
            steps += 1
            obs = result.observation
        ctrs.append(ctr(total, steps))
        totals.append(total)
    mean = float(np.mean(ctrs))
    half = 1.96 * float(np.std(ctrs, ddof=1)) / np.sqrt(n_episodes) \
        if n_episodes > 1 else 0.0
    return EvalResult(mean, half, float(np.mean(totals)), ctrs, totals)


def js_from_histograms(p: np.ndarray, q: np.ndarray) -> float:
    """D_KL(P||M) + D_KL(Q||M) with M the midpoint; zero bins drop out."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if p.shape != q.shape:
        raise ShapeError("histograms must have equal size")
    m = 0.5 * (p + q)
    total = 0.0
    mask_p = p > 0
    mask_q = q > 0
    total += float((p[mask_p] * np.log(p[mask_p] / m[mask_p])).sum())
    total += float((q[mask_q] * np.log(q[mask_q] / m[mask_q])).sum())
    return total


def occupancy_js(learner_pairs: np.ndarray, expert_pairs: np.ndarray,
                 bins: int = 16, projection_seed: int = 7) -> float:
    """Occupancy divergence through a fixed 2-D random projection.

    Both sets of (s ++ a) rows are projected with the same seeded
    linear map and histogrammed on one shared grid spanning the joint
    range; exact occupancy over the continuous pair space is
    intractable, so this is a diagnostic, not a loss.
    """
    learner = np.asarray(learner_pairs, dtype=np.float64)
    expert = np.asarray(expert_pairs, dtype=np.float64)
    if learner.ndim != 2 or expert.ndim != 2 or learner.shape[1] != expert.shape[1]:
        raise ShapeError("pair matrices must be 2-D with equal width")
    if learner.shape[0] == 0 or expert.shape[0] == 0:
        raise ValidationError("both pair sets must be nonempty")
    if bins < 2:
        raise ValidationError("bins must be >= 2")
    proj = derive_rng(projection_seed).normal(size=(learner.shape[1], 2))
    lp = learner @ proj
    ep = expert @ proj
    joint = np.vstack([lp, ep])
    edges = []
    for d in range(2):
        lo, hi = joint[:, d].min(), joint[:, d].max()
        if hi <= lo:
            hi = lo + 1e-9
        edges.append(np.linspace(lo, hi, bins + 1))
    hp, _, _ = np.histogram2d(lp[:, 0], lp[:, 1], bins=edges)
    hq, _, _ = np.histogram2d(ep[:, 0], ep[:, 1], bins=edges)
    return js_from_histograms(hp / hp.sum(), hq / hq.sum())


def load_expert_dataset(path) -> ExpertDataset:
    if not os.path.exists(path):
        raise ConfigError(f"expert dataset not found: {path}")
    arrays = load_checkpoint(path)
    if "expert.states" not in arrays or "expert.actions" not in arrays:
        raise ConfigError(f"{path} does not contain expert.states/expert.actions")
    meta = {}
    if "expert.meta" in arrays:
        m = arrays["expert.meta"].reshape(-1)
        meta = {"seed": int(m[0]), "episodes": int(m[1]), "mean_env_reward": float(m[2])}
    ds = ExpertDataset(arrays["expert.states"], arrays["expert.actions"], meta)
    ds.validate()
    return ds


def save_expert_dataset(path, dataset: ExpertDataset) -> None:
    meta = dataset.meta
    save_checkpoint(path, {
        "expert.states": dataset.states,
        "expert.actions": dataset.actions,
        "expert.meta": np.array([meta.get("seed", 0), meta.get("episodes", 0),
                                 meta.get("mean_env_reward", 0.0)], dtype=np.float64),
    })


def save_policy_checkpoint(path, actor: ActorParams, critic: CriticParams,
                           disc: DiscParams, iteration: int) -> None:
    arrays = {}
    arrays.update(mlp_to_arrays(actor.mlp, "actor"))
    arrays["actor.log_std"] = actor.log_std
    arrays.update(mlp_to_arrays(critic.mlp, "critic"))
    arrays.update(mlp_to_arrays(disc.mlp, "disc"))
    arrays["meta.iteration"] = np.array(float(iteration))
    save_checkpoint(path, arrays)


def load_policy_checkpoint(path) -> tuple[ActorParams, CriticParams, DiscParams]:
    arrays = load_checkpoint(path)
    actor = ActorParams(mlp_from_arrays(arrays, "actor", "tanh"),
                        np.ascontiguousarray(arrays["actor.log_std"]))
    critic_mlp = mlp_from_arrays(arrays, "critic", "identity")
    mode = "state" if critic_mlp.in_dim == OBS_DIM else "state_action"
    critic = CriticParams(critic_mlp, mode)
    disc = DiscParams(mlp_from_arrays(arrays, "disc", "sigmoid"))
    return actor, critic, disc


@dataclass
class TrainResult:
    actor: ActorParams
    critic: CriticParams
    disc: DiscParams
    stats: list[IterationStats]
    js_curve: list[float]
    checkpoint_path: str
    metrics_path: str


def train(config: RunConfig) -> TrainResult:
    """Run the full imitation loop and write all run artifacts."""
    config.validate()
    config.ppo.validate()
    if config.expert_path is None:
        raise ConfigError("config.expert_path is required")
    expert = load_expert_dataset(config.expert_path)

    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    events: list[str] = []
    seed = config.seed

    actor = make_actor(derive_rng(seed, 10))
    critic = make_critic(derive_rng(seed, 11))
    disc = make_disc(derive_rng(seed, 12))
    actor_opt = AdamState.for_arrays(actor.arrays())
    critic_opt = AdamState.for_arrays(critic.arrays())
    disc_opt = AdamState.for_mlp(disc.mlp)
    beta = config.ppo.kl_beta

    js_rng = derive_rng(seed, 13)
    js_idx = js_rng.choice(len(expert), size=min(4000, len(expert)), replace=False)
    js_expert = np.hstack([expert.states[js_idx], expert.actions[js_idx]])

    rows: list[IterationStats] = []
    js_curve: list[float] = []
    ckpt_path = os.path.join(out, "checkpoint.ckpt")
    metrics_path = os.path.join(out, "metrics.csv")
    last_saved = "<none>"

    for i in range(1, config.iterations + 1):
        batch = rollout(config.env, actor, critic, disc,
                        config.episodes_per_iteration, seed,
                        episode_offset=(i - 1) * config.episodes_per_iteration)
        events.append(f"iter={i} phase=rollout")

        disc_loss_val = float("nan")
        disc_rng = derive_rng(seed, 15, i)
        for _ in range(config.disc_updates_per_iteration):
            idx = disc_rng.choice(len(expert), size=len(batch), replace=True)
            disc_loss_val = disc_update(
                disc, disc_opt, (batch.obs, batch.actions),
                (expert.states[idx], expert.actions[idx]), config.disc_lr)
            events.append(f"iter={i} phase=disc_update")

        prepare_batch(batch, config.ppo)
        stats = ppo_update(actor, critic, batch, config.ppo,
                           actor_opt=actor_opt, critic_opt=critic_opt,
                           rng=derive_rng(seed, 14, i), beta=beta)
        if stats.beta is not None:
            beta = stats.beta
        events.append(f"iter={i} phase=ppo_update")

        js = occupancy_js(np.hstack([batch.obs, batch.actions]), js_expert,
                          bins=config.js_bins,
                          projection_seed=config.js_projection_seed)
        js_curve.append(js)

        ep_ctrs = batch.episode_env_totals / (10.0 * batch.episode_lengths)
        row = IterationStats(
            iteration=i,
            episodes=int(config.episodes_per_iteration),
            steps=len(batch),
            mean_env_reward=float(batch.episode_env_totals.sum() / len(batch)),
            mean_bonus=float(batch.bonus_reward.mean()),
            ctr=float(ep_ctrs.mean()),
            disc_loss=disc_loss_val if config.disc_updates_per_iteration else 0.0,
            policy_loss=stats.policy_loss,
            value_loss=stats.value_loss,
            entropy=stats.entropy,
            approx_kl=stats.approx_kl,
        )
        if not all(np.isfinite(v) for v in row.values()):
            raise PipelineError(
                f"non-finite metric at iteration {i}; last checkpoint: {last_saved}")
        rows.append(row)

        if i % config.checkpoint_every == 0 or i == config.iterations:
            save_policy_checkpoint(ckpt_path, actor, critic, disc, i)
            last_saved = ckpt_path
            events.append(f"iter={i} phase=checkpoint")

    write_metrics(metrics_path, rows)
    write_text_atomic(os.path.join(out, "occupancy.csv"),
                      "iteration,js\n" + "".join(
                          f"{k + 1},{v:.6g}\n" for k, v in enumerate(js_curve)))
    write_text_atomic(os.path.join(out, "events.log"), "\n".join(events) + "\n")
    return TrainResult(actor, critic, disc, rows, js_curve, ckpt_path, metrics_path)


@dataclass
class GridRow:
    gae_lambda: float
    clip_eps: float
    ctr: float
    halfwidth: float


GRID_REFERENCE = ("# reference: virtualtb platform peak ctr 0.643 +/- 0.061 "
                  "at gae_lambda=0.97 clip_eps=0.2 (not comparable to this "
                  "synthetic environment)")


def run_grid(base: RunConfig, gae_lambdas, clip_epss) -> list[GridRow]:
    """Train one run per (lambda, epsilon) cell and evaluate its final actor."""
    if not list(gae_lambdas) or not list(clip_epss):
        raise ValidationError("gae_lambda and clip_eps value lists must be nonempty")
    rows = []
    for lam in gae_lambdas:
        for eps in clip_epss:
            cell = replace(
                base,
                ppo=replace(base.ppo, gae_lambda=float(lam), clip_eps=float(eps)),
                out_dir=os.path.join(base.out_dir, f"cell_l{lam}_e{eps}"),
            )
            result = train(cell)
            ev = evaluate(result.actor, cell.env, cell.eval_episodes,
                          cell.seed, deterministic=True)
            rows.append(GridRow(float(lam), float(eps), ev.mean_ctr, ev.halfwidth))
    return rows


def write_grid_csv(path, rows: list[GridRow]) -> None:
    lines = [GRID_REFERENCE, "gae_lambda,clip_eps,ctr,halfwidth"]
    for r in rows:
        lines.append(f"{r.gae_lambda:.6g},{r.clip_eps:.6g},{r.ctr:.6g},{r.halfwidth:.6g}")
    write_text_atomic(path, "\n".join(lines) + "\n")
