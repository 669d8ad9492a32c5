"""Desk-scale training pilot; prints metrics and final evaluation."""

import argparse
import os
import sys
import time

import numpy as np
import torch


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--explore", default="thompson")
    ap.add_argument("--episodes", type=int, default=8000)
    ap.add_argument("--eta-cost", type=float, default=0.002)
    ap.add_argument("--c-init", type=float, default=0.03)
    ap.add_argument("--eta-critic", type=float, default=0.02)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--warmup", type=int, default=500)
    ap.add_argument("--batch", type=int, default=192)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", required=True)
    ap.add_argument("--eval-episodes", type=int, default=300)
    args = ap.parse_args()

    torch.set_num_threads(args.threads)
    from cpex.config import (
        EnvironmentConfig,
        ExperimentConfig,
        IOConfig,
        ModelConfig,
        TrainingConfig,
    )
    from cpex.evaluation import agent_from_checkpoint, evaluate
    from cpex.trainer import Trainer

    cfg = ExperimentConfig(
        environment=EnvironmentConfig(kind="binary_search", dim=2, eps=0.2),
        model=ModelConfig(backbone="lstm", width=args.width, depth=1, heads=4),
        training=TrainingConfig(
            total_episodes=args.episodes,
            delta=0.1,
            t_max=30,
            explore=args.explore,
            learning_rate=args.lr,
            batch_size=args.batch,
            buffer_capacity=200_000,
            warmup_episodes=args.warmup,
            eta_inference=0.01,
            eta_critic=args.eta_critic,
            eta_cost=args.eta_cost,
            c_init=args.c_init,
            cost_window=256,
            seed=args.seed,
            log_every=500,
        ),
        io=IOConfig(out_dir=args.out, checkpoint_every=10**9),
    )
    t0 = time.time()
    tr = Trainer(cfg)
    paths = tr.train(out_dir=args.out)
    print(f"[{args.explore} s{args.seed}] trained {args.episodes} eps in {time.time()-t0:.0f}s")
    for row in tr.metrics_rows[::2]:
        print(
            f"[{args.explore} s{args.seed}] ep={row['episode']} p_hat={row['p_hat']:.3f} "
            f"c={row['c']:.3f} tau={row['mean_tau']:.2f} nll={row['nll']:.3f}"
        )
    agent, env = agent_from_checkpoint(paths[-1])
    res = evaluate({args.seed: agent}, env, args.eval_episodes, t_max=30, n_boot=200)
    print(
        f"[{args.explore} s{args.seed}] EVAL correctness={res.correctness:.3f} "
        f"mean_tau={res.mean_tau:.2f}"
    )


if __name__ == "__main__":
    main()
