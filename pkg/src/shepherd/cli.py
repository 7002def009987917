"""Command-line interface for training, evaluation and the experiment suite."""

from __future__ import annotations

import argparse
import os

import numpy as np

from . import experiments
from .config import Config, config_hash, load_config, save_config
from .env import ShepherdEnv
from .ppo import load_policy, train


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (dotted for sections, e.g. ppo.learning_rate=1e-4)",
    )
    parser.add_argument("--out", default="out", help="output directory")


def _build_config(args) -> Config:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return load_config(args.config, overrides)


def _prepare_out(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_train(args):
    cfg = _build_config(args)
    if args.seed is not None:
        args.overrides.append(f"env.rng_seed={args.seed}")
        cfg = _build_config(args)
    out = _prepare_out(args)
    save_config(cfg, os.path.join(out, "config.yaml"))

    def env_factory():
        return ShepherdEnv(cfg.env, cfg.sim)

    policy, history = train(
        env_factory,
        cfg.ppo,
        output_dir=out,
        seed=cfg.env.rng_seed,
        v_max=cfg.sim.v_max,
        log_every=args.log_every,
    )
    final = history.smoothed_rewards[-1] if history.smoothed_rewards else float("nan")
    print(
        f"trained {len(history.episode_rewards)} episodes in "
        f"{history.wall_seconds:.0f}s; smoothed reward {final:.2f}; "
        f"checkpoint at {out}/policy.ckpt"
    )


def cmd_eval(args):
    cfg = _build_config(args)
    out = _prepare_out(args)
    policy = load_policy(args.checkpoint, cfg.sim.v_max)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    report = experiments.run_evaluation(
        policy,
        cfg,
        n_runs=args.runs,
        adapt_alpha=args.alpha if args.alpha is not None else cfg.sim.alpha,
        seeds=seeds,
        workers=args.workers,
    )
    experiments.write_records_csv(report, os.path.join(out, "evaluation.csv"))
    agg = report.aggregates()
    experiments.write_json(
        {"config_hash": config_hash(cfg), "aggregates": agg},
        os.path.join(out, "evaluation_summary.json"),
    )
    e = agg["e_T_ss"]
    print(
        f"{agg['n_runs']} runs: e_T_ss median {e['median']:.4f} "
        f"(IQR {e['q3'] - e['q1']:.4f}), u_m median {agg['u_m']['median']:.4f}, "
        f"tau_H median {agg['tau_H']['median']:.1f}, tau_T median {agg['tau_T']['median']:.1f}"
    )


def cmd_ablate_gain(args):
    cfg = _build_config(args)
    out = _prepare_out(args)
    policy = load_policy(args.checkpoint, cfg.sim.v_max)
    result = experiments.run_adaptive_ablation(
        policy, cfg, switch_time=args.switch_time, T=args.horizon, seed=args.seed
    )
    experiments.write_series_csv(result["series"], os.path.join(out, "ablation_series.csv"))
    experiments.write_json(result["summary"], os.path.join(out, "ablation_summary.json"))
    s = result["summary"]
    print(
        f"error at switch {s['error_at_switch']:.4f}, min within window "
        f"{s['error_min_within_window']:.4f} "
        f"({100 * s['reduction_within_window']:.1f}% reduction), final K {s['final_K']:.3f}"
    )


def _run_sweep(args, runner, label):
    cfg = _build_config(args)
    out = _prepare_out(args)
    policy = load_policy(args.checkpoint, cfg.sim.v_max)
    report = runner(
        policy, cfg, runs_per_value=args.runs_per_value, workers=args.workers
    )
    experiments.write_records_csv(report, os.path.join(out, f"{label}_records.csv"))
    summary = experiments.sweep_summary(report)
    experiments.write_json(
        {"config_hash": config_hash(cfg), "summary": summary},
        os.path.join(out, f"{label}_summary.json"),
    )
    lo, hi = summary[0], summary[-1]
    print(
        f"{label}: e_T_ss mean {lo['mean_e_T_ss']:.4f} at {lo['value']:.3f} -> "
        f"{hi['mean_e_T_ss']:.4f} at {hi['value']:.3f}"
    )


def cmd_sweep_disturbance(args):
    _run_sweep(args, experiments.run_disturbance_sweep, "disturbance")


def cmd_sweep_noise(args):
    _run_sweep(args, experiments.run_noise_sweep, "noise")


def cmd_oracle_check(args):
    cfg = _build_config(args)
    out = _prepare_out(args)
    results = experiments.run_oracle_check(cfg)
    experiments.write_json(results, os.path.join(out, "oracle_check.json"))
    worst_a = max(r["l2_gap"] for r in results["steady_state"])
    worst_b = max(r["l2_gap"] for r in results["micro_macro"])
    print(
        f"steady-state gaps max {worst_a:.2e}; micro-macro gaps max {worst_b:.3f}; "
        f"uniform limit {results['uniform_limit']['pde_vs_uniform']:.2e}"
    )


def cmd_simulate(args):
    cfg = _build_config(args)
    out = _prepare_out(args)
    positions = [float(x) for x in args.herders.split(",")]
    times, matrix = experiments.simulate_fixed_herders(
        cfg, positions, gain_K=args.gain, T=args.horizon, snapshot_every=args.snapshot_every
    )
    path = os.path.join(out, "density_snapshots.csv")
    experiments.write_snapshots_csv(times, matrix, path)
    print(f"{len(times)} snapshots of {matrix.shape[1]} nodes written to {path}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="shepherd",
        description="Sparse indirect density control: training, evaluation and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the positioning policy")
    _add_common(p)
    p.add_argument("--seed", type=int, default=None, help="master training seed")
    p.add_argument("--log-every", type=int, default=10, help="print every N updates (0 = quiet)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained policy with PDE co-simulation")
    _add_common(p)
    p.add_argument("checkpoint")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seeds", help="comma-separated seeds (overrides --runs)")
    p.add_argument("--alpha", type=float, default=None, help="gain adaptation step size")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate-gain", help="freeze the gain, then switch adaptation on")
    _add_common(p)
    p.add_argument("checkpoint")
    p.add_argument("--switch-time", type=float, default=75.0)
    p.add_argument("--horizon", type=float, default=150.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ablate_gain)

    p = sub.add_parser("sweep-disturbance", help="sweep a constant herder-velocity disturbance")
    _add_common(p)
    p.add_argument("checkpoint")
    p.add_argument("--runs-per-value", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep_disturbance)

    p = sub.add_parser("sweep-noise", help="sweep measurement-noise amplitude")
    _add_common(p)
    p.add_argument("checkpoint")
    p.add_argument("--runs-per-value", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep_noise)

    p = sub.add_parser("oracle-check", help="cross-validate PDE, closed form and particles")
    _add_common(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("simulate", help="run the PDE under fixed herders, dump snapshots")
    _add_common(p)
    p.add_argument("--herders", required=True, help="comma-separated herder positions")
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--snapshot-every", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
