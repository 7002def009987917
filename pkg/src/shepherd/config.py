"""Configuration bundle: physical parameters, environment and PPO settings.

A single YAML file configures everything. Physical/solver parameters sit at
the top level; environment and optimizer settings live in ``env:`` and
``ppo:`` sections. Every key can be overridden from the command line.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .fokker_planck import PdeConfig
from .geometry import PeriodicGrid
from .kernel import KernelParams


@dataclass
class SimConfig:
    """Physical and solver parameters of the coupled herder/density system."""

    dx_nodes: int = 250
    dt: float = 0.01
    dt_pde: float = 5e-4
    T_horizon: float = 150.0
    N_herders: int = 2
    D: float = 0.05
    L: float = math.pi
    kappa: float = 16.0 / math.pi**2
    v_max: float = 3.0
    M_H: float = 0.3
    M_T: float = 0.7
    alpha: float = 0.2
    # smoothing width of the repulsion kernel's sign switch; two grid cells by
    # default, which removes the quadrature artifacts of the exact sign
    # function at off-node herder positions while leaving the physics at the
    # population scale untouched
    kernel_smoothing: float = 2.0 * (2.0 * math.pi / 250.0)
    scheme: str = "exponential"

    def __post_init__(self):
        if abs(self.M_H + self.M_T - 1.0) > 1e-12:
            raise ValueError("herder and target masses must sum to 1")

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.dx_nodes)

    def kernel_params(self) -> KernelParams:
        return KernelParams(self.L, self.kernel_smoothing)

    def pde_config(self) -> PdeConfig:
        return PdeConfig(self.dt_pde, self.dt, self.D, self.scheme)


@dataclass
class EnvConfig:
    """Episode, reward and perturbation settings for the control environment."""

    n_herders: int = 2
    episode_steps: int = 500
    dt: float = 0.01
    reward_k1: float = 10.0
    reward_k2: float = 0.01
    reward_mode: str = "steady-state"
    disturbance_vd: float = 0.0
    noise_std_Dm: float = 0.0
    gain_K: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.reward_mode not in ("steady-state", "full-density"):
            raise ValueError("reward_mode must be 'steady-state' or 'full-density'")
        if not (self.reward_k1 >= self.reward_k2 >= 0):
            raise ValueError("reward weights must satisfy k1 >= k2 >= 0")


@dataclass
class PpoHyperparams:
    discount_gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    learning_rate: float = 3e-4
    rollout_length: int = 2048
    minibatch_size: int = 64
    epochs_per_update: int = 10
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    total_env_steps: int = 1_000_000
    max_grad_norm: float = 0.5

    def __post_init__(self):
        if not (0 < self.clip_epsilon < 1):
            raise ValueError("clip_epsilon must lie in (0, 1)")
        if not (0 <= self.gae_lambda <= 1):
            raise ValueError("gae_lambda must lie in [0, 1]")
        if not (0 < self.discount_gamma <= 1):
            raise ValueError("discount_gamma must lie in (0, 1]")


@dataclass
class Config:
    sim: SimConfig = field(default_factory=SimConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoHyperparams = field(default_factory=PpoHyperparams)


def _coerce(value, to_type):
    if to_type is bool and isinstance(value, str):
        return value.lower() in ("1", "true", "yes", "on")
    return to_type(value)


def _apply_section(obj, data: dict, section: str):
    fields = {f.name: f.type for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in fields:
            raise KeyError(f"unknown config key {key!r} in section {section!r}")
        current = getattr(obj, key)
        setattr(obj, key, _coerce(value, type(current)))
    obj.__post_init__()


def load_config(path=None, overrides: dict | None = None) -> Config:
    """Build a Config from defaults, an optional YAML file, then overrides.

    Override keys use dotted paths for the sections ("env.gain_K",
    "ppo.learning_rate"); bare keys address the physical section.
    """
    cfg = Config()
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must contain a mapping")
        env_data = data.pop("env", {}) or {}
        ppo_data = data.pop("ppo", {}) or {}
        _apply_section(cfg.sim, data, "sim")
        _apply_section(cfg.env, env_data, "env")
        _apply_section(cfg.ppo, ppo_data, "ppo")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key.startswith("env."):
            _apply_section(cfg.env, {key[4:]: value}, "env")
        elif key.startswith("ppo."):
            _apply_section(cfg.ppo, {key[4:]: value}, "ppo")
        else:
            _apply_section(cfg.sim, {key: value}, "sim")
    return cfg


def config_to_dict(cfg: Config) -> dict:
    out = dataclasses.asdict(cfg.sim)
    out["env"] = dataclasses.asdict(cfg.env)
    out["ppo"] = dataclasses.asdict(cfg.ppo)
    return out


def config_hash(cfg: Config) -> str:
    """Short stable digest identifying a full configuration."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def save_config(cfg: Config, path):
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
