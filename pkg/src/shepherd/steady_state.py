"""Closed-form stationary target density, desired profile, and gain adaptation.

For frozen herder positions the advection-diffusion balance has a stationary
solution proportional to exp of the integrated drift-to-diffusion ratio. That
closed form is cheap enough to evaluate inside a reinforcement-learning reward
and differentiable (numerically) with respect to the interaction gain, which
is what the adaptive compensation law exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DensityField, PeriodicGrid, integrate, l2_norm
from .kernel import HerderConfiguration, KernelParams, velocity_field

# central-difference half-width for the gain gradient; balances truncation and
# roundoff for error magnitudes around 1e-2
GAIN_FD_DELTA = 1e-3


@dataclass
class GainState:
    """Interaction strength gain with its adaptation settings."""

    K: float = 1.0
    alpha: float = 0.2
    K_min: float = 0.01

    def __post_init__(self):
        if self.K_min <= 0:
            raise ValueError("K_min must be positive")
        if self.K < self.K_min:
            raise ValueError("K must not start below K_min")


def desired_distribution(grid: PeriodicGrid, kappa: float, mass_MT: float) -> DensityField:
    """Von Mises profile concentrated at x = 0 carrying total mass ``mass_MT``.

    The normalizer is the grid quadrature of exp(kappa cos x), so the result
    integrates to ``mass_MT`` exactly by construction.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    raw = np.exp(kappa * np.cos(grid.nodes))
    return DensityField(grid, mass_MT * raw / (grid.dx * raw.sum()))


def steady_state_density(
    herders: HerderConfiguration,
    gain_K: float,
    diffusion_D: float,
    mass_MT: float,
    grid: PeriodicGrid,
    params: KernelParams = KernelParams(),
) -> DensityField:
    """Stationary density for frozen herders, normalized to ``mass_MT``.

    Builds the node drift V/D, integrates it cumulatively by the trapezoid
    rule from -pi, exponentiates (in max-shifted form to avoid overflow) and
    normalizes. The exact drift integrates to zero over the period; the
    discrete node sum generally does not, so the residual mean is removed
    before integrating. This keeps the cumulative integral exactly periodic
    for any herder position instead of only for grid-aligned ones.
    """
    if diffusion_D <= 0:
        raise ValueError("diffusion_D must be positive")
    drift = velocity_field(grid, herders, gain_K, params) / diffusion_D
    drift = drift - drift.mean()
    # trapezoid cumulative over the periodic grid; increment i spans node i -> i+1
    incr = grid.dx * (drift + np.roll(drift, -1)) / 2.0
    log_rho = np.concatenate(([0.0], np.cumsum(incr[:-1])))
    rho = np.exp(log_rho - log_rho.max())
    return DensityField(grid, rho * (mass_MT / (grid.dx * rho.sum())))


def ss_error(
    herders: HerderConfiguration,
    gain_K: float,
    desired: DensityField,
    diffusion_D: float = 0.05,
    params: KernelParams = KernelParams(),
) -> float:
    """L2 mismatch between the desired profile and the stationary estimate.

    The stationary estimate carries the same total mass as ``desired``.
    """
    rho = steady_state_density(
        herders, gain_K, diffusion_D, integrate(desired), desired.grid, params
    )
    return l2_norm(desired, rho)


def adapt_gain_step(
    state: GainState,
    herders: HerderConfiguration,
    desired: DensityField,
    dt: float,
    diffusion_D: float = 0.05,
    params: KernelParams = KernelParams(),
) -> GainState:
    """One explicit-Euler step of gradient descent on the stationary error.

    The gradient of the error norm with respect to the gain is estimated by
    central differences; the gain is clamped below at K_min to keep the
    repulsion strictly positive.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.alpha == 0.0:
        return GainState(state.K, state.alpha, state.K_min)
    delta = GAIN_FD_DELTA
    k_hi = state.K + delta
    k_lo = max(state.K - delta, state.K_min * 1e-3)
    e_hi = ss_error(herders, k_hi, desired, diffusion_D, params)
    e_lo = ss_error(herders, k_lo, desired, diffusion_D, params)
    grad = (e_hi - e_lo) / (k_hi - k_lo)
    new_K = max(state.K_min, state.K - state.alpha * grad * dt)
    return GainState(new_K, state.alpha, state.K_min)
