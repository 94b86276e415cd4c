"""Flat key=value configuration files with namespaced keys.

Keys are grouped as env.*, ppo.*, ddpg.* and run.*; unknown keys are
rejected. Defaults carry the published training constants (discount
0.995, lambda 0.97, clip 0.2, minibatch 5, 4 epochs, lr 0.003, entropy
factor 1e-3, DDPG gamma 0.95 / tau 0.001 / buffer 1000, OU scale 0.1
with theta 0.15 and sigma 0.2, iteration = 100 episodes).
"""

from __future__ import annotations

from dataclasses import dataclass

from .envsim import EnvConfig
from .errors import ConfigError, ValidationError
from .expert import DDPGConfig
from .optim import PPOConfig


@dataclass
class RunSettings:
    iterations: int = 200
    episodes_per_iteration: int = 100
    disc_lr: float = 0.003
    disc_updates_per_iteration: int = 1
    eval_episodes: int = 20
    checkpoint_every: int = 50
    expert_pairs: int = 20000
    js_bins: int = 16
    js_projection_seed: int = 7

    def validate(self) -> None:
        if self.iterations < 1 or self.episodes_per_iteration < 1:
            raise ValidationError("run.iterations and run.episodes_per_iteration must be >= 1")
        if self.disc_updates_per_iteration < 0 or self.eval_episodes < 1:
            raise ValidationError("run.disc_updates_per_iteration must be >= 0, eval_episodes >= 1")
        if self.js_bins < 2:
            raise ValidationError("run.js_bins must be >= 2")


@dataclass
class AppConfig:
    env: EnvConfig
    ppo: PPOConfig
    ddpg: DDPGConfig
    run: RunSettings


_SECTIONS = {
    "env": (EnvConfig, {
        "seed": int, "max_steps": int, "kappa": float, "click_bias": float,
        "drift": float, "leave_prob": float,
    }),
    "ppo": (PPOConfig, {
        "gamma": float, "gae_lambda": float, "clip_eps": float, "epochs": int,
        "minibatch_size": int, "lr": float, "entropy_coef": float,
        "value_coef": float, "bonus_weight": float, "variant": str,
        "kl_beta": float, "kl_a": float, "kl_b": float, "kl_d_target": float,
    }),
    "ddpg": (DDPGConfig, {
        "gamma": float, "tau": float, "hidden": int, "buffer_capacity": int,
        "episodes": int, "batch_size": int, "lr_actor": float, "lr_critic": float,
        "ou_theta": float, "ou_mu": float, "ou_sigma": float, "ou_scale": float,
        "update_every": int, "eval_every": int, "eval_episodes": int,
        "plateau_tol": float, "min_episodes": int,
    }),
    "run": (RunSettings, {
        "iterations": int, "episodes_per_iteration": int, "disc_lr": float,
        "disc_updates_per_iteration": int, "eval_episodes": int,
        "checkpoint_every": int, "expert_pairs": int, "js_bins": int,
        "js_projection_seed": int,
    }),
}


def default_config() -> AppConfig:
    return AppConfig(EnvConfig(), PPOConfig(), DDPGConfig(), RunSettings())


def _parse_value(text: str, typ, key: str, lineno: int):
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse value {text!r} for key '{key}'") from None


def parse_config(path) -> AppConfig:
    """Merge a config file over the defaults and validate every range."""
    overrides: dict[str, dict] = {name: {} for name in _SECTIONS}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if "." not in key:
                raise ConfigError(f"line {lineno}: unknown config key '{key}'")
            section, name = key.split(".", 1)
            if section not in _SECTIONS or name not in _SECTIONS[section][1]:
                raise ConfigError(f"line {lineno}: unknown config key '{key}'")
            typ = _SECTIONS[section][1][name]
            overrides[section][name] = _parse_value(value, typ, key, lineno)
    config = AppConfig(
        env=EnvConfig(**overrides["env"]),
        ppo=PPOConfig(**overrides["ppo"]),
        ddpg=DDPGConfig(**overrides["ddpg"]),
        run=RunSettings(**overrides["run"]),
    )
    validate_config(config)
    return config


def validate_config(config: AppConfig) -> None:
    try:
        config.env.validate()
        config.ppo.validate()
        config.ddpg.validate()
        config.run.validate()
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
