"""Domain arithmetic: wrapping, quadrature and norms on the circle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shepherd.geometry import (
    DensityField,
    PeriodicGrid,
    integrate,
    l2_norm,
    wrap,
    wrapped_signed_distance,
)
from shepherd.steady_state import desired_distribution

KAPPA = 16.0 / np.pi**2


def test_wrap_examples():
    assert wrap(0.0) == 0.0
    assert np.isclose(wrap(3 * np.pi), np.pi, atol=1e-12)
    assert np.isclose(wrap(-3.5 * np.pi), 0.5 * np.pi, atol=1e-12)


def test_wrap_boundary_tie_goes_to_plus_pi():
    assert wrap(np.pi) == np.pi
    assert wrap(-np.pi) == np.pi


def test_wrap_rejects_non_finite():
    for bad in (np.nan, np.inf, -np.inf):
        with pytest.raises(ValueError):
            wrap(bad)


def test_wrap_array_matches_scalar():
    xs = np.array([0.0, 3 * np.pi, -3.5 * np.pi, 1.0])
    out = wrap(xs)
    assert out.shape == xs.shape
    assert np.allclose(out, [wrap(float(x)) for x in xs])


@settings(max_examples=200)
@given(st.floats(min_value=-100.0, max_value=100.0))
def test_wrap_idempotent_and_in_range(x):
    w = wrap(x)
    assert -np.pi < w <= np.pi
    assert wrap(w) == w


def test_wrapped_signed_distance_examples():
    assert np.isclose(wrapped_signed_distance(0.5, 0.2), 0.3, atol=1e-12)
    assert np.isclose(wrapped_signed_distance(3.0, -3.0), 6.0 - 2 * np.pi, atol=1e-12)
    assert wrapped_signed_distance(1.234, 1.234) == 0.0


@settings(max_examples=200)
@given(
    st.floats(min_value=-np.pi, max_value=np.pi),
    st.floats(min_value=-np.pi, max_value=np.pi),
)
def test_wrapped_signed_distance_antisymmetric(a, b):
    d = wrapped_signed_distance(a, b)
    if abs(d) < np.pi - 1e-9:  # the +pi tie maps to the same representative
        assert np.isclose(wrapped_signed_distance(b, a), -d, atol=1e-12)


def test_grid_spacing_closes_the_circle():
    for n in (3, 250, 1000):
        g = PeriodicGrid(n)
        assert g.dx * g.n_nodes == pytest.approx(2 * np.pi, abs=1e-15)
        assert g.nodes[0] == -np.pi
        assert g.nodes[-1] < np.pi


def test_density_field_validates_shape():
    g = PeriodicGrid(10)
    with pytest.raises(ValueError):
        DensityField(g, np.zeros(9))


def test_integrate_uniform_and_zero():
    g = PeriodicGrid()
    uniform = DensityField(g, np.full(g.n_nodes, 0.7 / (2 * np.pi)))
    assert integrate(uniform) == pytest.approx(0.7, abs=1e-12)
    assert integrate(DensityField(g, np.zeros(g.n_nodes))) == 0.0


def test_integrate_von_mises_against_quadrature_oracle():
    # oracle: adaptive quadrature of the analytic normalized profile
    from scipy.integrate import quad
    from scipy.special import i0

    g = PeriodicGrid()
    f = desired_distribution(g, KAPPA, 0.7)
    assert integrate(f) == pytest.approx(0.7, abs=1e-9)

    norm = 2 * np.pi * i0(KAPPA)
    mass, err = quad(lambda x: 0.7 * np.exp(KAPPA * np.cos(x)) / norm, -np.pi, np.pi)
    assert integrate(f) == pytest.approx(mass, abs=1e-9 + err)


def test_integrate_invariant_under_rotation():
    g = PeriodicGrid(97)
    rng = np.random.default_rng(3)
    values = rng.uniform(0.0, 1.0, g.n_nodes)
    base = integrate(DensityField(g, values))
    for shift in (1, 13, 60):
        assert integrate(DensityField(g, np.roll(values, shift))) == pytest.approx(
            base, rel=1e-14
        )


def test_l2_norm_identical_and_constant_offset():
    g = PeriodicGrid()
    a = DensityField(g, np.full(g.n_nodes, 0.3))
    assert l2_norm(a, a) == 0.0
    zero = DensityField(g, np.zeros(g.n_nodes))
    assert l2_norm(a, zero) == pytest.approx(0.3 * np.sqrt(2 * np.pi), rel=1e-12)


def test_l2_norm_rejects_grid_mismatch():
    a = DensityField(PeriodicGrid(10), np.zeros(10))
    b = DensityField(PeriodicGrid(20), np.zeros(20))
    with pytest.raises(ValueError):
        l2_norm(a, b)


def test_l2_norm_against_high_resolution_quadrature():
    # oracle: the same integrand sampled on a 40x finer grid
    coarse = PeriodicGrid(250)
    fine = PeriodicGrid(10_000)
    val_coarse = l2_norm(
        desired_distribution(coarse, KAPPA, 0.7), DensityField.uniform(coarse, 0.7)
    )
    val_fine = l2_norm(
        desired_distribution(fine, KAPPA, 0.7), DensityField.uniform(fine, 0.7)
    )
    assert val_coarse > 0
    assert val_coarse == pytest.approx(val_fine, abs=1e-9)


def test_l2_norm_triangle_inequality_on_random_fields():
    g = PeriodicGrid(50)
    rng = np.random.default_rng(11)
    for _ in range(25):
        a, b, c = (DensityField(g, rng.uniform(0, 1, g.n_nodes)) for _ in range(3))
        assert l2_norm(a, c) <= l2_norm(a, b) + l2_norm(b, c) + 1e-12


def test_normalize_sets_mass():
    g = PeriodicGrid(64)
    rng = np.random.default_rng(5)
    f = DensityField(g, rng.uniform(0.1, 2.0, g.n_nodes)).normalize(0.7)
    assert integrate(f) == pytest.approx(0.7, abs=1e-9)
    with pytest.raises(ValueError):
        DensityField(g, np.zeros(g.n_nodes)).normalize(1.0)
