"""Command-line entry points: train, eval, oracle, plot."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from . import __version__, oracle
from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_FOUND = 2


def _resolve_out_dir(path: str) -> str:
    # Environment variables override io paths only.
    return os.environ.get("CPEX_OUT_DIR", path)


def _write_manifest(out_dir: str, command: str, config_path, seeds, extra=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "code_version": __version__,
        "seeds": list(seeds),
        "argv": sys.argv[1:],
    }
    if config_path is not None:
        with open(config_path, "rb") as fh:
            manifest["config_sha256"] = hashlib.sha256(fh.read()).hexdigest()
        manifest["config_path"] = str(config_path)
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    from .trainer import Trainer

    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.training.seed = args.seed
    out_dir = _resolve_out_dir(args.out or cfg.io.out_dir)
    cfg.io.out_dir = out_dir
    _write_manifest(out_dir, "train", args.config, [cfg.training.seed])
    trainer = Trainer(cfg)
    paths = trainer.train(out_dir=out_dir)
    print(f"trained {trainer.episodes_done} episodes; checkpoints: {', '.join(paths)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _eval_one_seed(job) -> list:
    """Worker: load a checkpoint and collect its per-episode records."""
    from .evaluation import agent_from_checkpoint, evaluate

    ckpt_path, seed, n_episodes, t_max, eval_seed = job
    agent, env = agent_from_checkpoint(ckpt_path)
    res = evaluate({seed: agent}, env, n_episodes, t_max, eval_seed=eval_seed, n_boot=50)
    return res.records


def cmd_eval(args) -> int:
    from .evaluation import (
        EvalResult,
        agent_from_checkpoint,
        bca_ci,
        evaluate,
        robustness_sweep,
        write_sigma_trace_csv,
        write_survival_csv,
    )

    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in args.checkpoint:
        if not os.path.exists(path):
            print(f"checkpoint not found: {path}", file=sys.stderr)
            return EXIT_NOT_FOUND

    out_dir = _resolve_out_dir(args.out or cfg.io.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    seeds = list(range(len(args.checkpoint)))
    eval_seed = args.seed if args.seed is not None else cfg.evaluation.eval_seed
    n_episodes = cfg.evaluation.n_episodes
    t_max = cfg.training.t_max

    jobs = [
        (path, seed, n_episodes, t_max, eval_seed)
        for seed, path in zip(seeds, args.checkpoint)
    ]
    if args.workers > 1 and len(jobs) > 1:
        import concurrent.futures
        import multiprocessing

        # spawn, not fork: forked workers can deadlock in torch's OpenMP pool
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.workers, mp_context=ctx
        ) as pool:
            chunks = list(pool.map(_eval_one_seed, jobs))
    else:
        chunks = [_eval_one_seed(job) for job in jobs]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.seed, r.episode))

    result = EvalResult(records=records)
    boot_rng = np.random.default_rng(np.random.SeedSequence([eval_seed, 0xB007]))
    succ = result.by_seed("success")
    taus = result.by_seed("tau")
    result.correctness = float(np.concatenate(succ).mean())
    result.correctness_ci = bca_ci(succ, rng=boot_rng)
    result.mean_tau = float(np.concatenate(taus).mean())
    result.tau_ci = bca_ci(taus, rng=boot_rng)

    result.write_csv(os.path.join(out_dir, "episodes.csv"))
    write_survival_csv(result, t_max, os.path.join(out_dir, "survival.csv"))
    write_sigma_trace_csv(result, os.path.join(out_dir, "sigma_trace.csv"))
    summary = result.summary()

    if cfg.evaluation.beta_sweep:
        agents = {}
        env = None
        for seed, path in zip(seeds, args.checkpoint):
            agents[seed], env = agent_from_checkpoint(path)
        rows = robustness_sweep(
            agents, env, cfg.evaluation.beta_sweep, n_episodes, t_max, eval_seed=eval_seed
        )
        summary["robustness"] = rows
        with open(os.path.join(out_dir, "robustness.csv"), "w") as fh:
            fh.write("alpha,beta,kl,mean_tau,correctness\n")
            for row in rows:
                fh.write(
                    f"{row['alpha']},{row['beta']},{row['kl']:.6f},"
                    f"{row['mean_tau']:.6f},{row['correctness']:.6f}\n"
                )

    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    _write_manifest(out_dir, "eval", args.config, seeds, extra={"checkpoints": args.checkpoint})
    print(
        f"correctness {result.correctness:.3f} "
        f"[{result.correctness_ci[0]:.3f},{result.correctness_ci[1]:.3f}]  "
        f"mean tau {result.mean_tau:.2f} [{result.tau_ci[0]:.2f},{result.tau_ci[1]:.2f}]"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


@dataclass
class OracleRunConfig:
    n_points: int = 129
    eps: float = 0.125
    lam: float | None = None
    cost: float | None = None
    noise_p: float = 0.0
    n_actions: int | None = None
    horizon: int = 10
    markov_depth: int = 4
    n_episodes: int = 2000
    seed: int = 0
    node_budget: int = 1_000_000


def load_oracle_config(path) -> OracleRunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    known = set(OracleRunConfig.__dataclass_fields__)
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown oracle config field")
    cfg = OracleRunConfig(**data)
    if cfg.lam is None and cfg.cost is None:
        raise ConfigError("lam", "specify lam or cost")
    return cfg


def cmd_oracle(args) -> int:
    try:
        cfg = load_oracle_config(args.config)
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (ConfigError, TypeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = _resolve_out_dir(args.out or "oracle_out")
    os.makedirs(out_dir, exist_ok=True)
    model = oracle.binary_search_model(
        cfg.n_points,
        cfg.eps,
        lam=cfg.lam,
        cost=cfg.cost,
        noise_p=cfg.noise_p,
        n_actions=cfg.n_actions,
        node_budget=cfg.node_budget,
    )
    dp = oracle.backward_induction(model, cfg.horizon)
    rng = np.random.default_rng(cfg.seed)
    mean_tau, success = oracle.simulate_optimal(model, dp, rng, cfg.n_episodes)
    report = oracle.verify_markov_bound(model, cfg.markov_depth)
    dp_stop = oracle.backward_induction_stop_action(model, cfg.horizon, reach=dp.reach)
    equiv = max(
        float(np.max(np.abs(a - b))) for a, b in zip(dp.values, dp_stop.values)
    )
    horizon_values = [
        oracle.backward_induction(model, t, reach=dp.reach).value_at_prior
        for t in range(cfg.horizon + 1)
    ]

    lines = [
        f"grid model: {cfg.n_points} points, eps={cfg.eps}, lam={model.lam}, "
        f"noise_p={cfg.noise_p}, actions={model.n_actions}",
        f"value at prior (horizon {cfg.horizon}): {dp.value_at_prior:.6f}",
        f"simulated policy: tau={mean_tau:g}, success={success:g} over {cfg.n_episodes} episodes",
        f"stop-as-action max value gap: {equiv:.3e}",
        "value by horizon: " + ", ".join(f"{v:.4f}" for v in horizon_values),
        report.summary().replace("violations=", "violations: "),
    ]
    if dp.decision(0, 0) == oracle.STOP:
        lines.append("policy at prior: stop immediately (zero queries)")
    report_text = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "oracle_report.txt"), "w") as fh:
        fh.write(report_text)

    tables = []
    for t in range(dp.horizon + 1):
        tables.append(
            {
                "t": t,
                "belief_ids": [int(i) for i in dp.level_ids[t]],
                "values": [float(v) for v in dp.values[t]],
                "policy": [int(p) for p in dp.policy[t]],
            }
        )
    with open(os.path.join(out_dir, "oracle_tables.json"), "w") as fh:
        json.dump({"stop_marker": oracle.STOP, "levels": tables}, fh)
    _write_manifest(out_dir, "oracle", args.config, [cfg.seed])
    print(report_text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    results_dir = args.results_dir
    if not os.path.isdir(results_dir):
        print(f"results directory not found: {results_dir}", file=sys.stderr)
        return EXIT_NOT_FOUND
    out_dir = _resolve_out_dir(args.out or results_dir)
    os.makedirs(out_dir, exist_ok=True)

    made = []
    surv_path = os.path.join(results_dir, "survival.csv")
    if os.path.exists(surv_path):
        data = np.genfromtxt(surv_path, delimiter=",", names=True)
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.step(data["t"], data["survival"], where="post")
        ax.set_xlabel("t")
        ax.set_ylabel("P(tau > t)")
        ax.set_ylim(-0.02, 1.02)
        fig.tight_layout()
        target = os.path.join(out_dir, "survival.png")
        fig.savefig(target, dpi=120)
        plt.close(fig)
        made.append(target)

    sigma_path = os.path.join(results_dir, "sigma_trace.csv")
    if os.path.exists(sigma_path):
        data = np.genfromtxt(sigma_path, delimiter=",", names=True)
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.plot(np.atleast_1d(data["step"]), np.atleast_1d(data["mean_sigma"]))
        ax.set_xlabel("step")
        ax.set_ylabel("mean posterior sigma")
        fig.tight_layout()
        target = os.path.join(out_dir, "sigma_trace.png")
        fig.savefig(target, dpi=120)
        plt.close(fig)
        made.append(target)

    _write_manifest(out_dir, "plot", None, [])
    if not made:
        print(f"warning: no plottable CSV files in {results_dir}", file=sys.stderr)
        return EXIT_OK
    print("wrote " + ", ".join(made))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpex",
        description="Meta-trained in-context pure exploration agents and their exact oracle.",
    )
    parser.add_argument("--version", action="version", version=f"cpex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="meta-train an agent from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", default=None, help="override io.out_dir")
    p_train.add_argument("--seed", type=int, default=None, help="override training.seed")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate trained checkpoints")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument(
        "--checkpoint", action="append", required=True, help="one per training seed"
    )
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--seed", type=int, default=None, help="override evaluation seed")
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.set_defaults(func=cmd_eval)

    p_oracle = sub.add_parser("oracle", help="run the exact stop/continue oracle")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--out", default=None)
    p_oracle.set_defaults(func=cmd_oracle)

    p_plot = sub.add_parser("plot", help="render survival and sigma-trace figures")
    p_plot.add_argument("results_dir")
    p_plot.add_argument("--out", default=None)
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
