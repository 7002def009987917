"""Performance indices: residual error, control effort and settling times."""

from __future__ import annotations

import numpy as np

from .geometry import DensityField, l2_norm, wrapped_signed_distance


def steady_state_error(density_final: DensityField, desired: DensityField) -> float:
    """L2 distance between the desired profile and the final density."""
    return l2_norm(desired, density_final)


def mean_control_effort(action_history: np.ndarray, dt: float, T: float) -> float:
    """Time-averaged Euclidean norm of the control vector over [0, T]."""
    actions = np.asarray(action_history, dtype=float)
    if actions.size == 0:
        raise ValueError("empty action history")
    norms = np.sqrt((actions**2).sum(axis=1))
    return float(norms.sum() * dt / T)


def _earliest_inside(deviation: np.ndarray, threshold: float, times: np.ndarray) -> float:
    """First time from which the deviation stays within the threshold."""
    outside = np.nonzero(deviation > threshold)[0]
    if outside.size == 0:
        return 0.0
    last_out = outside[-1]
    if last_out + 1 >= times.size:
        return float(times[-1])
    return float(times[last_out + 1])


def settling_time_herders(position_history: np.ndarray, T: float) -> float:
    """2% settling time of the herders, worst case over agents.

    ``position_history`` has shape (n_samples, n_herders) over [0, T].
    Distances are wrapped: a herder crossing the +/-pi seam is judged by its
    true circular excursion. A herder that ends where it started settles at
    t = 0 by convention.
    """
    positions = np.asarray(position_history, dtype=float)
    n = positions.shape[0]
    times = np.linspace(0.0, T, n)
    worst = 0.0
    for i in range(positions.shape[1]):
        final = positions[-1, i]
        total = abs(wrapped_signed_distance(positions[0, i], final))
        if total == 0.0:
            continue
        deviation = np.abs(wrapped_signed_distance(positions[:, i], final))
        worst = max(worst, _earliest_inside(deviation, 0.02 * total, times))
    return worst


def settling_time_targets(error_history: np.ndarray, e_ss: float, T: float) -> float:
    """2% settling time of the density-error norm toward its final value."""
    errors = np.asarray(error_history, dtype=float)
    times = np.linspace(0.0, T, errors.size)
    total = abs(errors[0] - e_ss)
    if total == 0.0:
        return 0.0
    deviation = np.abs(errors - e_ss)
    return _earliest_inside(deviation, 0.02 * total, times)
