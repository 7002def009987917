"""Conservative transport solver: conservation, positivity, fixed points."""

import numpy as np
import pytest

from shepherd.fokker_planck import (
    PdeConfig,
    SolverFault,
    StabilityError,
    pde_step,
    run_to_steady_state,
    simulate_window,
)
from shepherd.geometry import DensityField, PeriodicGrid, integrate, l2_norm
from shepherd.kernel import HerderConfiguration, KernelParams, velocity_field
from shepherd.steady_state import desired_distribution, steady_state_density

GRID = PeriodicGrid()
SMOOTH = KernelParams(smoothing_eps=2 * GRID.dx)
KAPPA = 16.0 / np.pi**2


def herders(*positions):
    return HerderConfiguration(np.array(positions, dtype=float), mass_MH=0.3)


def test_pde_config_validation():
    assert PdeConfig(dt_pde=0.0004, dt_control=0.01).substeps_per_window == 25
    with pytest.raises(ValueError):
        PdeConfig(dt_pde=0.0003, dt_control=0.01)  # non-integer ratio
    with pytest.raises(ValueError):
        PdeConfig(scheme="spectral")
    assert PdeConfig().substeps_per_window == 20


def test_uniform_is_fixed_point_of_zero_velocity():
    cfg = PdeConfig()
    rho = DensityField.uniform(GRID, 0.7)
    out = pde_step(rho, np.zeros(GRID.n_nodes), cfg)
    assert np.array_equal(out.values, rho.values)


@pytest.mark.parametrize("scheme", ["exponential", "upwind", "central"])
def test_single_step_conserves_mass(scheme):
    cfg = PdeConfig(scheme=scheme)
    rng = np.random.default_rng(0)
    rho = DensityField(GRID, rng.uniform(0.01, 0.5, GRID.n_nodes))
    velocity = velocity_field(GRID, herders(-1.0, 2.0), 1.5, SMOOTH)
    out = pde_step(rho, velocity, cfg)
    assert integrate(out) == pytest.approx(integrate(rho), abs=1e-12)


def test_upwind_step_matches_literal_stencil():
    # contract check against a direct transcription of the donor-cell scheme
    cfg = PdeConfig(scheme="upwind")
    rng = np.random.default_rng(1)
    rho = rng.uniform(0.01, 0.5, GRID.n_nodes)
    V = velocity_field(GRID, herders(0.7, -2.2), 1.0, SMOOTH)
    out = pde_step(DensityField(GRID, rho), V, cfg)

    dx, dt, D = GRID.dx, cfg.dt_pde, cfg.diffusion_D
    n = GRID.n_nodes
    expected = np.empty(n)
    for i in range(n):
        ip, im = (i + 1) % n, (i - 1) % n
        v_r = (V[i] + V[ip]) / 2.0
        v_l = (V[im] + V[i]) / 2.0
        flux_r = v_r * (rho[i] if v_r >= 0 else rho[ip])
        flux_l = v_l * (rho[im] if v_l >= 0 else rho[i])
        expected[i] = (
            rho[i]
            - dt / dx * (flux_r - flux_l)
            + D * dt / dx**2 * (rho[ip] - 2 * rho[i] + rho[im])
        )
    assert np.allclose(out.values, expected, atol=1e-15)


def test_stability_rejection():
    cfg = PdeConfig(dt_pde=0.005, dt_control=0.01)  # diffusion number ~0.4, ok
    bad_cfg = PdeConfig(dt_pde=0.01, dt_control=0.01)  # diffusion number ~0.79
    rho = DensityField.uniform(GRID, 0.7)
    with pytest.raises(StabilityError):
        pde_step(rho, np.zeros(GRID.n_nodes), bad_cfg)
    # advection bound: |V| dt / dx >= 1
    fast = np.full(GRID.n_nodes, 6.0)
    with pytest.raises(StabilityError):
        pde_step(rho, fast, cfg)


def test_negativity_fault_detected():
    # separately-stable advection and diffusion whose combination undershoots
    # on a sharp spike
    coarse = PeriodicGrid(50)
    cfg = PdeConfig(dt_pde=0.01, dt_control=0.01, diffusion_D=0.7)
    velocity = np.full(coarse.n_nodes, 11.0)
    # diffusion number ~0.44, CFL ~0.88, sum > 1: positivity can break
    spike = np.zeros(coarse.n_nodes)
    spike[10] = 1.0
    with pytest.raises(SolverFault):
        field = DensityField(coarse, spike)
        for _ in range(10):
            field = pde_step(field, velocity, cfg)


def test_window_with_unit_ratio_equals_single_step():
    cfg1 = PdeConfig(dt_pde=5e-4, dt_control=5e-4)
    rng = np.random.default_rng(3)
    rho = DensityField(GRID, rng.uniform(0.05, 0.3, GRID.n_nodes))
    h = herders(-1.0, 1.2)
    V = velocity_field(GRID, h, 1.0, SMOOTH)
    one = pde_step(rho, V, cfg1)
    window = simulate_window(rho, h, 1.0, cfg1, SMOOTH)
    assert np.array_equal(one.values, window.values)


def test_mass_conserved_over_long_horizon_with_moving_herders():
    cfg = PdeConfig()
    rho = DensityField.uniform(GRID, 0.7)
    t = 0.0
    # scripted sweep of both herders around the circle
    for k in range(2000):  # 20 time units is plenty for roundoff accumulation
        t = k * cfg.dt_control
        h = herders(-1.0 + 0.8 * np.sin(0.3 * t), 2.0 + 0.5 * np.cos(0.2 * t))
        rho = simulate_window(rho, h, 1.0, cfg, SMOOTH)
    assert abs(integrate(rho) - 0.7) <= 1e-9


def test_no_herders_influence_relaxes_to_uniform():
    cfg = PdeConfig()
    start = desired_distribution(GRID, KAPPA, 0.7)  # structured initial state
    settled, _ = run_to_steady_state(start, herders(0.0, 1.0), 1e-9, cfg, SMOOTH)
    assert l2_norm(settled, DensityField.uniform(GRID, 0.7)) <= 1e-6


def test_positivity_preserved_on_long_run():
    cfg = PdeConfig()
    rho = DensityField.uniform(GRID, 0.7)
    h = herders(-np.pi / 2, np.pi / 2)
    for _ in range(500):
        rho = simulate_window(rho, h, 2.0, cfg, SMOOTH)
    assert rho.values.min() >= -1e-12


def test_closed_form_is_discrete_fixed_point_of_exponential_scheme():
    cfg = PdeConfig(scheme="exponential")
    h = herders(-np.pi / 2, np.pi / 2)
    stationary = steady_state_density(h, 1.0, cfg.diffusion_D, 0.7, GRID, SMOOTH)
    after = simulate_window(stationary, h, 1.0, cfg, SMOOTH)
    assert l2_norm(after, stationary) <= 1e-12


def test_long_run_matches_closed_form_oracle():
    # independent routes: explicit time marching from uniform vs the
    # exponential closed form
    cfg = PdeConfig()
    h = herders(-np.pi / 2, np.pi / 2)
    for K in (0.5, 1.0, 2.0):
        closed = steady_state_density(h, K, cfg.diffusion_D, 0.7, GRID, SMOOTH)
        settled, _ = run_to_steady_state(
            DensityField.uniform(GRID, 0.7), h, K, cfg, SMOOTH, dt=3e-3
        )
        assert l2_norm(settled, closed) <= 1e-3


def test_translation_equivariance():
    cfg = PdeConfig()
    rng = np.random.default_rng(5)
    pos = rng.uniform(-np.pi, np.pi, 2)
    start = rng.uniform(0.05, 0.3, GRID.n_nodes)
    shift = 1

    a = DensityField(GRID, start.copy())
    b = DensityField(GRID, np.roll(start, shift))
    for _ in range(50):
        a = simulate_window(a, herders(*pos), 1.0, cfg, SMOOTH)
        b = simulate_window(b, herders(*(pos + shift * GRID.dx)), 1.0, cfg, SMOOTH)
    assert np.allclose(b.values, np.roll(a.values, shift), atol=1e-10)
