"""Reinforcement-learning environment for the herder positioning problem.

Observations encode herder positions as (cos, sin) pairs so the policy never
sees the coordinate seam at +/-pi. The training reward scores the stationary
density implied by the current herder positions, which avoids simulating the
PDE inside the training loop; a full-density mode that co-simulates the PDE
exists for validation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import EnvConfig, SimConfig
from .fokker_planck import simulate_window
from .geometry import DensityField, l2_norm
from .kernel import HerderConfiguration
from .micro import HerderState, herder_step
from .steady_state import desired_distribution, ss_error


def encode_observation(positions: np.ndarray) -> np.ndarray:
    """Chatter-free encoding: [cos H_1, sin H_1, ..., cos H_N, sin H_N]."""
    out = np.empty(2 * positions.size)
    out[0::2] = np.cos(positions)
    out[1::2] = np.sin(positions)
    return out


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def reward_ss(
    herders: HerderConfiguration,
    gain_K: float,
    action: np.ndarray,
    cfg: EnvConfig,
    desired: DensityField,
    diffusion_D: float,
    params,
) -> float:
    """-k1 * (stationary L2 error)^2 - k2 * ||action||^2."""
    err = ss_error(herders, gain_K, desired, diffusion_D, params)
    return -cfg.reward_k1 * err**2 - cfg.reward_k2 * float(np.dot(action, action))


def reward_full(
    density: DensityField,
    desired: DensityField,
    action: np.ndarray,
    cfg: EnvConfig,
) -> float:
    """-k1 * ||desired - density||^2 - k2 * ||action||^2 on the actual density."""
    err = l2_norm(desired, density)
    return -cfg.reward_k1 * err**2 - cfg.reward_k2 * float(np.dot(action, action))


class ShepherdEnv:
    """Episode lifecycle around the herder kinematics and reward.

    Each instance owns its state and RNG; run as many in parallel as needed.
    """

    def __init__(self, cfg: EnvConfig = None, sim: SimConfig = None):
        self.cfg = cfg or EnvConfig()
        self.sim = sim or SimConfig()
        if self.cfg.n_herders != self.sim.N_herders:
            raise ValueError("env and sim herder counts disagree")
        self.grid = self.sim.grid()
        self.kernel_params = self.sim.kernel_params()
        self.desired = desired_distribution(self.grid, self.sim.kappa, self.sim.M_T)
        self._pde_cfg = self.sim.pde_config()
        self._rng = np.random.default_rng(self.cfg.rng_seed)
        self.state: HerderState | None = None
        self.density: DensityField | None = None
        self.gain = self.cfg.gain_K
        self._step_count = 0

    @property
    def observation_dim(self) -> int:
        return 2 * self.cfg.n_herders

    @property
    def action_dim(self) -> int:
        return self.cfg.n_herders

    def herder_config(self) -> HerderConfiguration:
        return HerderConfiguration(self.state.positions, self.sim.M_H)

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        positions = self._rng.uniform(-np.pi, np.pi, self.cfg.n_herders)
        self.state = HerderState(positions, self.sim.v_max)
        self.gain = self.cfg.gain_K
        self._step_count = 0
        if self.cfg.reward_mode == "full-density":
            self.density = DensityField.uniform(self.grid, self.sim.M_T)
        return encode_observation(self.state.positions)

    def _observed_positions(self) -> np.ndarray:
        if self.cfg.noise_std_Dm > 0:
            noise = self._rng.normal(0.0, self.cfg.noise_std_Dm, self.state.count)
            return self.state.positions + noise
        return self.state.positions

    def step(self, action: np.ndarray) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        action = np.asarray(action, dtype=float)
        self.state = herder_step(
            self.state, action, self.cfg.disturbance_vd, self.cfg.dt
        )
        applied = self.state.last_actions
        herders = self.herder_config()
        if self.cfg.reward_mode == "full-density":
            self.density = simulate_window(
                self.density, herders, self.gain, self._pde_cfg, self.kernel_params
            )
        err = ss_error(herders, self.gain, self.desired, self.sim.D, self.kernel_params)
        if self.cfg.reward_mode == "full-density":
            reward = reward_full(self.density, self.desired, applied, self.cfg)
        else:
            reward = -self.cfg.reward_k1 * err**2 - self.cfg.reward_k2 * float(
                np.dot(applied, applied)
            )
        self._step_count += 1
        done = self._step_count >= self.cfg.episode_steps
        obs = encode_observation(self._observed_positions())
        info = {
            "positions": self.state.positions.copy(),
            "applied_actions": applied.copy(),
            "ss_error": err,
            "gain": self.gain,
        }
        return StepResult(obs, float(reward), done, info)
