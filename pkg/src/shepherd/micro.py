"""Agent-level dynamics: herder kinematics and the target-particle SDE.

The herders are velocity-driven single integrators with clipped inputs. The
target particles follow an Euler-Maruyama random walk repelled from the
herders; a large ensemble of them is the micro-scale consistency oracle for
the continuum solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DensityField, PeriodicGrid, wrap, wrapped_signed_distance
from .kernel import KernelParams, kernel_eval


@dataclass
class HerderState:
    """Wrapped herder positions plus the most recent applied velocities."""

    positions: np.ndarray
    v_max: float = 3.0
    last_actions: np.ndarray = None

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(wrap(self.positions), dtype=float))
        if self.last_actions is None:
            self.last_actions = np.zeros_like(self.positions)
        else:
            self.last_actions = np.asarray(self.last_actions, dtype=float)

    @property
    def count(self) -> int:
        return int(self.positions.size)


@dataclass
class TargetEnsemble:
    """Particle positions for the stochastic target model.

    ``drift_scale`` multiplies the summed kernel term. The continuum model
    assigns each herder a share M_H / N of the herder mass, so the
    macro-consistent choice (the default, with the standard parameter set) is
    drift_scale = M_H / N = 0.15. The literal per-agent normalization
    1 / (N + N_T) is available by passing it explicitly; it only agrees with
    the continuum drift when M_H = N / (N + N_T).
    """

    positions: np.ndarray
    diffusion_D: float = 0.05
    drift_scale: float = 0.15

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(wrap(self.positions), dtype=float))
        if self.positions.size == 0:
            raise ValueError("ensemble must contain at least one particle")
        if self.diffusion_D < 0:
            raise ValueError("diffusion_D must be nonnegative")

    @property
    def count(self) -> int:
        return int(self.positions.size)


def herder_step(
    state: HerderState,
    actions: np.ndarray,
    disturbance_vd: float,
    dt: float,
) -> HerderState:
    """Advance the herders one control step.

    Actions are clipped to [-v_max, v_max] on entry; the constant disturbance
    models unmodeled dynamics and is added after clipping, so it is not
    itself subject to the actuator bound.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    actions = np.asarray(actions, dtype=float)
    if not np.all(np.isfinite(actions)):
        raise ValueError("non-finite herder action")
    clipped = np.clip(actions, -state.v_max, state.v_max)
    new_pos = wrap(state.positions + (clipped + disturbance_vd) * dt)
    return HerderState(new_pos, state.v_max, clipped)


def target_sde_step(
    ensemble: TargetEnsemble,
    herders: HerderState,
    gain_K: float,
    dt: float,
    rng: np.random.Generator,
    params: KernelParams = KernelParams(),
) -> TargetEnsemble:
    """One Euler-Maruyama step for every particle.

    T_j <- wrap(T_j + K * drift_scale * sum_i f(wrap(T_j - H_i)) * dt
                + sqrt(2 D dt) * xi_j)
    with xi_j independent standard normals from ``rng``. Pass a seeded
    generator for bit-reproducible trajectories.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    disp = wrapped_signed_distance(
        ensemble.positions[:, None], herders.positions[None, :]
    )
    drift = gain_K * ensemble.drift_scale * kernel_eval(disp, params).sum(axis=1)
    noise = np.sqrt(2.0 * ensemble.diffusion_D * dt) * rng.standard_normal(ensemble.count)
    new_pos = wrap(ensemble.positions + drift * dt + noise)
    return TargetEnsemble(new_pos, ensemble.diffusion_D, ensemble.drift_scale)


def empirical_density(
    ensemble: TargetEnsemble, grid: PeriodicGrid, total_mass: float
) -> DensityField:
    """Histogram the particles into node-centered cells and scale to mass.

    Cell i covers [x_i - dx/2, x_i + dx/2) on the circle. The result
    integrates to ``total_mass`` up to float rounding.
    """
    idx = np.floor((ensemble.positions - grid.x_min) / grid.dx + 0.5).astype(int)
    idx %= grid.n_nodes
    counts = np.bincount(idx, minlength=grid.n_nodes).astype(float)
    values = counts * (total_mass / (ensemble.count * grid.dx))
    return DensityField(grid, values)
