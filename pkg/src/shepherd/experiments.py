"""Experiment runners: evaluation, gain ablation, robustness sweeps, oracles.

Every run is reproducible from (configuration, seed); reports carry both. The
runners return in-memory report objects; CSV/JSON writers live alongside so
the command-line interface stays thin.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import Config, config_hash
from .env import ShepherdEnv
from .fokker_planck import run_to_steady_state, simulate_window
from .geometry import DensityField, PeriodicGrid, l2_norm
from .kernel import HerderConfiguration
from .metrics import (
    mean_control_effort,
    settling_time_herders,
    settling_time_targets,
)
from .micro import HerderState, TargetEnsemble, empirical_density, target_sde_step
from .ppo import GaussianPolicy, policy_from_weights
from .steady_state import GainState, adapt_gain_step, steady_state_density


@dataclass
class RunRecord:
    """One closed-loop evaluation run and its four performance indices."""

    seed: int
    e_T_ss: float
    u_m: float
    tau_H: float
    tau_T: float
    final_K: float
    config_hash: str
    sweep_value: float = None


@dataclass
class ExperimentReport:
    records: list = field(default_factory=list)

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def aggregates(self) -> dict:
        out = {"n_runs": len(self.records)}
        for name in ("e_T_ss", "u_m", "tau_H", "tau_T", "final_K"):
            v = self.values(name)
            out[name] = {
                "median": float(np.median(v)),
                "q1": float(np.percentile(v, 25)),
                "q3": float(np.percentile(v, 75)),
                "p10": float(np.percentile(v, 10)),
                "p90": float(np.percentile(v, 90)),
                "mean": float(np.mean(v)),
                "std": float(np.std(v)),
            }
        return out


@dataclass
class RolloutSeries:
    """Per-step traces of one evaluation run."""

    times: np.ndarray
    errors: np.ndarray
    gains: np.ndarray
    control_norms: np.ndarray
    positions: np.ndarray


def evaluate_policy_run(
    policy: GaussianPolicy,
    cfg: Config,
    seed: int,
    adapt_alpha: float = None,
    T: float = None,
    adapt_start: float = 0.0,
    keep_series: bool = False,
):
    """Roll the deterministic policy with full PDE co-simulation.

    The density starts uniform; the gain starts at the environment's gain_K
    and follows the adaptation law (when its step size is nonzero) from
    ``adapt_start`` onward. Returns (RunRecord, RolloutSeries | None).
    """
    sim = cfg.sim
    T = sim.T_horizon if T is None else T
    alpha = sim.alpha if adapt_alpha is None else adapt_alpha
    dt = cfg.env.dt
    steps = int(round(T / dt))
    env_cfg = dataclasses.replace(cfg.env, episode_steps=steps)
    env = ShepherdEnv(env_cfg, sim)
    obs = env.reset(seed)

    grid = sim.grid()
    params = sim.kernel_params()
    pde_cfg = sim.pde_config()
    desired = env.desired
    density = DensityField.uniform(grid, sim.M_T)
    gain = GainState(K=env_cfg.gain_K, alpha=alpha)

    errors = np.zeros(steps + 1)
    gains = np.zeros(steps + 1)
    actions = np.zeros((steps, env_cfg.n_herders))
    positions = np.zeros((steps + 1, env_cfg.n_herders))
    errors[0] = l2_norm(desired, density)
    gains[0] = gain.K
    positions[0] = env.state.positions

    for k in range(steps):
        mean, _ = policy.actor_forward(obs)
        result = env.step(mean)
        herders = env.herder_config()
        density = simulate_window(density, herders, gain.K, pde_cfg, params)
        if alpha > 0 and (k + 1) * dt >= adapt_start:
            gain = adapt_gain_step(gain, herders, desired, dt, sim.D, params)
            env.gain = gain.K
        obs = result.observation
        errors[k + 1] = l2_norm(desired, density)
        gains[k + 1] = gain.K
        actions[k] = result.info["applied_actions"]
        positions[k + 1] = result.info["positions"]

    record = RunRecord(
        seed=seed,
        e_T_ss=float(errors[-1]),
        u_m=mean_control_effort(actions, dt, T),
        tau_H=settling_time_herders(positions, T),
        tau_T=settling_time_targets(errors, float(errors[-1]), T),
        final_K=float(gain.K),
        config_hash=config_hash(cfg),
    )
    series = None
    if keep_series:
        series = RolloutSeries(
            times=np.linspace(0.0, T, steps + 1),
            errors=errors,
            gains=gains,
            control_norms=np.concatenate(
                ([0.0], np.sqrt((actions**2).sum(axis=1)))
            ),
            positions=positions,
        )
    return record, series


def _eval_job(args):
    weights, v_max, cfg, seed, alpha, sweep_field, sweep_value = args
    if sweep_field is not None:
        cfg = Config(
            cfg.sim, dataclasses.replace(cfg.env, **{sweep_field: sweep_value}), cfg.ppo
        )
    policy = policy_from_weights(weights, v_max)
    record, _ = evaluate_policy_run(policy, cfg, seed, adapt_alpha=alpha)
    record.sweep_value = sweep_value
    return record


def _run_jobs(jobs, workers: int):
    if workers <= 1:
        return [_eval_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_eval_job, jobs))


def _policy_weights(policy: GaussianPolicy) -> dict:
    return {name: arr.copy() for name, arr in policy.named_tensors()}


def run_evaluation(
    policy: GaussianPolicy,
    cfg: Config,
    n_runs: int = 10,
    adapt_alpha: float = 0.2,
    seeds=None,
    workers: int = 1,
) -> ExperimentReport:
    """Evaluate the deterministic policy over several initial conditions.

    No disturbance or measurement noise; gain adaptation runs from t = 0.
    """
    seeds = list(range(n_runs)) if seeds is None else list(seeds)
    clean_env = dataclasses.replace(cfg.env, disturbance_vd=0.0, noise_std_Dm=0.0)
    clean = Config(cfg.sim, clean_env, cfg.ppo)
    weights = _policy_weights(policy)
    jobs = [(weights, policy.v_max, clean, s, adapt_alpha, None, None) for s in seeds]
    return ExperimentReport(_run_jobs(jobs, workers))


def run_adaptive_ablation(
    policy: GaussianPolicy,
    cfg: Config,
    switch_time: float = 75.0,
    T: float = 150.0,
    seed: int = 0,
    adapt_alpha: float = None,
    window: float = 15.0,
) -> dict:
    """Hold the gain fixed until ``switch_time``, then enable adaptation.

    Returns the error/gain series plus a summary of the reduction achieved
    within ``window`` time units of the switch.
    """
    alpha = cfg.sim.alpha if adapt_alpha is None else adapt_alpha
    record, series = evaluate_policy_run(
        policy,
        cfg,
        seed,
        adapt_alpha=alpha,
        T=T,
        adapt_start=switch_time,
        keep_series=True,
    )
    dt = cfg.env.dt
    i_switch = int(round(switch_time / dt))
    i_window = min(int(round((switch_time + window) / dt)), series.errors.size - 1)
    e_switch = float(series.errors[i_switch])
    e_within = float(series.errors[i_switch : i_window + 1].min())
    e_final = float(series.errors[-1])
    summary = {
        "switch_time": switch_time,
        "error_at_switch": e_switch,
        "error_min_within_window": e_within,
        "error_final": e_final,
        "reduction_within_window": (e_switch - e_within) / e_switch if e_switch else 0.0,
        "reduction_final": (e_switch - e_final) / e_switch if e_switch else 0.0,
        "final_K": record.final_K,
        "seed": seed,
        "config_hash": record.config_hash,
    }
    return {"record": record, "series": series, "summary": summary}


def _sweep(
    policy: GaussianPolicy,
    cfg: Config,
    sweep_field: str,
    values,
    runs_per_value: int,
    adapt_alpha: float,
    workers: int,
    seed0: int = 0,
) -> ExperimentReport:
    weights = _policy_weights(policy)
    jobs = []
    for value in values:
        for r in range(runs_per_value):
            jobs.append(
                (weights, policy.v_max, cfg, seed0 + r, adapt_alpha, sweep_field, float(value))
            )
    records = _run_jobs(jobs, workers)
    records.sort(key=lambda rec: (rec.sweep_value, rec.seed))
    return ExperimentReport(records)


def run_disturbance_sweep(
    policy: GaussianPolicy,
    cfg: Config,
    vd_values=None,
    runs_per_value: int = 1,
    adapt_alpha: float = 0.2,
    workers: int = 1,
) -> ExperimentReport:
    """Constant additive herder-velocity disturbance, 21 points on [0, 0.6]."""
    if vd_values is None:
        vd_values = np.linspace(0.0, 0.6, 21)
    return _sweep(policy, cfg, "disturbance_vd", vd_values, runs_per_value, adapt_alpha, workers)


def run_noise_sweep(
    policy: GaussianPolicy,
    cfg: Config,
    dm_values=None,
    runs_per_value: int = 100,
    adapt_alpha: float = 0.2,
    workers: int = 1,
) -> ExperimentReport:
    """Gaussian measurement noise on the observations, 21 points on [0, 2pi/5]."""
    if dm_values is None:
        dm_values = np.linspace(0.0, 2.0 * np.pi / 5.0, 21)
    return _sweep(policy, cfg, "noise_std_Dm", dm_values, runs_per_value, adapt_alpha, workers)


def sweep_summary(report: ExperimentReport) -> list:
    """Aggregate a sweep report per parameter value."""
    by_value = {}
    for rec in report.records:
        by_value.setdefault(rec.sweep_value, []).append(rec.e_T_ss)
    out = []
    for value in sorted(by_value):
        errs = np.array(by_value[value])
        out.append(
            {
                "value": value,
                "n": int(errs.size),
                "mean_e_T_ss": float(errs.mean()),
                "median_e_T_ss": float(np.median(errs)),
                "p10_e_T_ss": float(np.percentile(errs, 10)),
                "p90_e_T_ss": float(np.percentile(errs, 90)),
                "std_e_T_ss": float(errs.std()),
            }
        )
    return out


def coarsen(field_: DensityField, n_coarse: int) -> DensityField:
    """Bin-average a field onto a coarser grid (node-centered cells)."""
    n = field_.grid.n_nodes
    if n % n_coarse:
        raise ValueError("coarse node count must divide the fine node count")
    k = n // n_coarse
    rolled = np.roll(field_.values, k // 2)
    coarse_values = rolled.reshape(n_coarse, k).mean(axis=1)
    return DensityField(PeriodicGrid(n_coarse), coarse_values)


DEFAULT_ORACLE_HERDERS = ((-np.pi / 2, np.pi / 2), (0.0, np.pi), (-1.0, 2.0))
DEFAULT_ORACLE_GAINS = (0.5, 1.0, 2.0)


def run_oracle_check(
    cfg: Config,
    herder_sets=DEFAULT_ORACLE_HERDERS,
    gains=DEFAULT_ORACLE_GAINS,
    sde_particles: int = 10_000,
    sde_T: float = 50.0,
    sde_bins: int = 50,
    sde_seed: int = 42,
    pde_dt: float = 3e-3,
) -> dict:
    """Cross-validate the three routes to the target density.

    (a) For each herder set and gain, the PDE is marched to numerical steady
        state from uniform and compared against the closed-form stationary
        density (plus a near-zero-gain case against the uniform profile).
    (b) For each herder set, a particle ensemble is integrated to ``sde_T``
        and its histogram compared against the PDE solution at matched time
        on a coarse grid.
    """
    sim = cfg.sim
    grid = sim.grid()
    params = sim.kernel_params()
    pde_cfg = sim.pde_config()
    results = {"steady_state": [], "uniform_limit": None, "micro_macro": []}

    for positions in herder_sets:
        herders = HerderConfiguration(np.array(positions), sim.M_H)
        for K in gains:
            closed = steady_state_density(herders, K, sim.D, sim.M_T, grid, params)
            start = DensityField.uniform(grid, sim.M_T)
            settled, t_reached = run_to_steady_state(
                start, herders, K, pde_cfg, params, dt=pde_dt
            )
            results["steady_state"].append(
                {
                    "herders": list(positions),
                    "gain_K": K,
                    "l2_gap": l2_norm(settled, closed),
                    "t_reached": t_reached,
                }
            )

    # vanishing gain: both routes must recover the uniform density
    herders = HerderConfiguration(np.array(herder_sets[0]), sim.M_H)
    uniform = DensityField.uniform(grid, sim.M_T)
    tiny = 1e-9
    closed = steady_state_density(herders, tiny, sim.D, sim.M_T, grid, params)
    settled, _ = run_to_steady_state(
        DensityField.uniform(grid, sim.M_T), herders, tiny, pde_cfg, params, dt=pde_dt, t_max=400.0
    )
    results["uniform_limit"] = {
        "closed_vs_uniform": l2_norm(closed, uniform),
        "pde_vs_uniform": l2_norm(settled, uniform),
    }

    coarse_grid = PeriodicGrid(sde_bins)
    for positions in herder_sets:
        herder_state = HerderState(np.array(positions), sim.v_max)
        herders = HerderConfiguration(np.array(positions), sim.M_H)
        rng = np.random.default_rng(sde_seed)
        ensemble = TargetEnsemble(
            rng.uniform(-np.pi, np.pi, sde_particles),
            diffusion_D=sim.D,
            drift_scale=sim.M_H / sim.N_herders,
        )
        n_steps = int(round(sde_T / sim.dt))
        for _ in range(n_steps):
            ensemble = target_sde_step(ensemble, herder_state, 1.0, sim.dt, rng, params)
        histogram = empirical_density(ensemble, coarse_grid, sim.M_T)

        density = DensityField.uniform(grid, sim.M_T)
        for _ in range(n_steps):
            density = simulate_window(density, herders, 1.0, pde_cfg, params)
        results["micro_macro"].append(
            {
                "herders": list(positions),
                "l2_gap": l2_norm(histogram, coarsen(density, sde_bins)),
            }
        )
    return results


def simulate_fixed_herders(
    cfg: Config,
    positions,
    gain_K: float = 1.0,
    T: float = None,
    snapshot_every: float = 1.0,
):
    """Run the PDE under frozen herders, recording periodic density snapshots.

    Returns (times, snapshot matrix with rows = times, columns = grid nodes).
    """
    sim = cfg.sim
    T = sim.T_horizon if T is None else T
    grid = sim.grid()
    params = sim.kernel_params()
    pde_cfg = sim.pde_config()
    herders = HerderConfiguration(np.array(positions, dtype=float), sim.M_H)
    density = DensityField.uniform(grid, sim.M_T)
    steps = int(round(T / sim.dt))
    stride = max(1, int(round(snapshot_every / sim.dt)))
    times = [0.0]
    rows = [density.values.copy()]
    for k in range(1, steps + 1):
        density = simulate_window(density, herders, gain_K, pde_cfg, params)
        if k % stride == 0 or k == steps:
            times.append(k * sim.dt)
            rows.append(density.values.copy())
    return np.array(times), np.vstack(rows)


def write_records_csv(report: ExperimentReport, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["seed", "sweep_value", "e_T_ss", "u_m", "tau_H", "tau_T", "final_K", "config_hash"]
        )
        for r in report.records:
            writer.writerow(
                [
                    r.seed,
                    "" if r.sweep_value is None else repr(r.sweep_value),
                    repr(r.e_T_ss),
                    repr(r.u_m),
                    repr(r.tau_H),
                    repr(r.tau_T),
                    repr(r.final_K),
                    r.config_hash,
                ]
            )


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=float)


def write_snapshots_csv(times, matrix, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"node_{i}" for i in range(matrix.shape[1])])
        for t, row in zip(times, matrix):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def write_series_csv(series: RolloutSeries, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_herders = series.positions.shape[1]
        writer.writerow(
            ["time", "error_l2", "gain_K", "control_norm"]
            + [f"herder_{i}" for i in range(n_herders)]
        )
        for i in range(series.times.size):
            writer.writerow(
                [
                    repr(float(series.times[i])),
                    repr(float(series.errors[i])),
                    repr(float(series.gains[i])),
                    repr(float(series.control_norms[i])),
                ]
                + [repr(float(p)) for p in series.positions[i]]
            )
