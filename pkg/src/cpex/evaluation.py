"""Fixed-confidence evaluation: correctness and stopping-time statistics with
hierarchical bias-corrected bootstrap intervals, survival curves, posterior
uncertainty traces, a uniform-querying baseline, fixed-horizon ablations, and
prior-misspecification sweeps.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import envs
from .config import EnvironmentConfig
from .critic import CriticNetwork
from .inference import InferenceNetwork
from .trainer import collect_episode, load_checkpoint


# ---------------------------------------------------------------------------
# Agents


@dataclass
class Agent:
    """A rollout policy: posterior-driven or uniform querying, learned stop."""

    inference: InferenceNetwork
    critic: CriticNetwork
    explore: str = "thompson"
    fixed_horizon: int | None = None

    def rollout(self, task: envs.Task, t_max: int, rng: np.random.Generator):
        return collect_episode(
            self.inference,
            self.critic,
            task,
            t_max,
            rng,
            explore=self.explore,
            use_stop_rule=self.fixed_horizon is None,
            forced_tau=self.fixed_horizon,
        )


def agent_from_checkpoint(path) -> tuple[Agent, EnvironmentConfig]:
    loaded = load_checkpoint(path)
    return Agent(loaded.inference, loaded.critic, explore=loaded.explore), loaded.env


def uniform_baseline(inference: InferenceNetwork, critic: CriticNetwork) -> Agent:
    """Same stopping and recommendation machinery, uniform queries."""
    return Agent(inference, critic, explore="uniform")


def with_fixed_horizon(agent: Agent, horizon: int) -> Agent:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return Agent(agent.inference, agent.critic, agent.explore, fixed_horizon=horizon)


# ---------------------------------------------------------------------------
# Evaluation results


@dataclass
class EpisodeRecord:
    seed: int
    episode: int
    task: dict
    tau: int
    success: bool
    sigma_trace: list[float]


@dataclass
class EvalResult:
    records: list[EpisodeRecord]
    correctness: float = 0.0
    correctness_ci: tuple[float, float] = (0.0, 0.0)
    mean_tau: float = 0.0
    tau_ci: tuple[float, float] = (0.0, 0.0)

    def by_seed(self, attr: str) -> list[np.ndarray]:
        seeds = sorted({r.seed for r in self.records})
        return [
            np.array([getattr(r, attr) for r in self.records if r.seed == s], dtype=float)
            for s in seeds
        ]

    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.records], dtype=float)

    def summary(self) -> dict:
        return {
            "n_episodes": len(self.records),
            "correctness": {
                "metric": "correctness",
                "point": self.correctness,
                "ci_lo": self.correctness_ci[0],
                "ci_hi": self.correctness_ci[1],
            },
            "stopping_time": {
                "metric": "mean_tau",
                "point": self.mean_tau,
                "ci_lo": self.tau_ci[0],
                "ci_hi": self.tau_ci[1],
            },
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "episode", "tau", "success", "sigma_trace", "task"])
            for r in self.records:
                writer.writerow(
                    [
                        r.seed,
                        r.episode,
                        r.tau,
                        int(r.success),
                        ";".join(repr(v) for v in r.sigma_trace),
                        json.dumps(r.task, sort_keys=True),
                    ]
                )


def strict_success(task: envs.Task, x_hat) -> bool:
    """Evaluation-time correctness predicate: distance strictly below eps.

    The environments' own predicate is inclusive; the difference is measure
    zero for continuous recommendations.
    """
    return bool(envs.loss(task, x_hat) < task.eps)


def evaluate(
    agents: dict[int, Agent],
    env: EnvironmentConfig,
    n_episodes: int,
    t_max: int,
    eval_seed: int = 12345,
    n_boot: int = 2000,
) -> EvalResult:
    """Roll out each seed's agent on freshly sampled tasks.

    Correctness uses the strict predicate (distance < eps); every episode gets
    its own child rng stream, so results are reproducible bit for bit.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if not agents:
        raise ValueError("need at least one seed's agent")
    env.validate()
    records: list[EpisodeRecord] = []
    for seed in sorted(agents):
        agent = agents[seed]
        for ep in range(n_episodes):
            rng = np.random.default_rng(np.random.SeedSequence([eval_seed, seed, ep]))
            task = envs.sample_task(
                env.kind,
                env.dim,
                env.prior(),
                env.eps,
                rng,
                noise_p=env.noise_p,
                noise_sigma=env.noise_sigma,
            )
            out = agent.rollout(task, t_max, rng)
            success = strict_success(task, out.x_hat)
            records.append(
                EpisodeRecord(
                    seed=seed,
                    episode=ep,
                    task=task.to_json(),
                    tau=out.tau,
                    success=success,
                    sigma_trace=[float(v) for v in out.sigma_trace],
                )
            )
    result = EvalResult(records=records)
    boot_rng = np.random.default_rng(np.random.SeedSequence([eval_seed, 0xB007]))
    succ_groups = result.by_seed("success")
    tau_groups = result.by_seed("tau")
    result.correctness = float(np.concatenate(succ_groups).mean())
    result.correctness_ci = bca_ci(succ_groups, rng=boot_rng, n_boot=n_boot)
    result.mean_tau = float(np.concatenate(tau_groups).mean())
    result.tau_ci = bca_ci(tau_groups, rng=boot_rng, n_boot=n_boot)
    return result


def fixed_horizon_run(
    agents: dict[int, Agent],
    env: EnvironmentConfig,
    horizon: int,
    n_episodes: int,
    eval_seed: int = 12345,
) -> EvalResult:
    """Ablation with the learned stop rule disabled: every episode runs
    exactly ``horizon`` queries and recommends at the end."""
    forced = {seed: with_fixed_horizon(agent, horizon) for seed, agent in agents.items()}
    return evaluate(forced, env, n_episodes, t_max=horizon, eval_seed=eval_seed)


# ---------------------------------------------------------------------------
# Statistics


def survival(taus, t_max: int) -> np.ndarray:
    """P(tau > t) for t = 0..t_max; nonincreasing, 1 at t=0, 0 at t_max."""
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise ValueError("need at least one stopping time")
    ts = np.arange(t_max + 1)
    return (taus[None, :] > ts[:, None]).mean(axis=1)


def bca_ci(
    groups: list[np.ndarray],
    level: float = 0.95,
    n_boot: int = 2000,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Hierarchical bias-corrected and accelerated bootstrap CI for the mean.

    Two-stage resampling: draw groups (seeds) with replacement, then draw
    episodes with replacement within each drawn group; the statistic is the
    pooled mean. Bias correction comes from the bootstrap distribution's
    quantile at the point estimate, acceleration from leave-one-group-out
    jackknife skewness. All-equal data collapses to a zero-width interval.
    """
    groups = [np.asarray(g, dtype=float) for g in groups if np.asarray(g).size > 0]
    if not groups:
        raise ValueError("need at least one nonempty group")
    if rng is None:
        rng = np.random.default_rng()
    flat = np.concatenate(groups)
    if np.all(flat == flat[0]):
        return float(flat[0]), float(flat[0])
    theta_hat = float(flat.mean())

    n_groups = len(groups)
    sizes = np.array([g.size for g in groups])
    if np.all(sizes == sizes[0]):
        # Equal group sizes: fully vectorized two-stage resampling.
        mat = np.stack(groups)  # (G, n)
        g_idx = rng.integers(0, n_groups, size=(n_boot, n_groups))
        v_idx = rng.integers(0, sizes[0], size=(n_boot, n_groups, sizes[0]))
        boot = mat[g_idx[:, :, None], v_idx].mean(axis=(1, 2))
    else:
        boot = np.empty(n_boot)
        for b in range(n_boot):
            chosen = rng.integers(0, n_groups, size=n_groups)
            parts = [rng.choice(groups[g], size=groups[g].size, replace=True) for g in chosen]
            boot[b] = np.concatenate(parts).mean()

    frac = np.mean(boot < theta_hat)
    frac = min(max(frac, 1.0 / (n_boot + 1)), n_boot / (n_boot + 1))
    z0 = stats.norm.ppf(frac)

    if n_groups > 1:
        jack = np.array(
            [
                np.concatenate([g for j, g in enumerate(groups) if j != i]).mean()
                for i in range(n_groups)
            ]
        )
        centered = jack.mean() - jack
        denom = float(np.sum(centered**2)) ** 1.5
        accel = float(np.sum(centered**3)) / (6.0 * denom) if denom > 0 else 0.0
    else:
        accel = 0.0

    alpha = 1.0 - level
    lo_hi = []
    for z_alpha in (stats.norm.ppf(alpha / 2), stats.norm.ppf(1 - alpha / 2)):
        adj = z0 + (z0 + z_alpha) / (1.0 - accel * (z0 + z_alpha))
        lo_hi.append(float(np.quantile(boot, stats.norm.cdf(adj))))
    return lo_hi[0], lo_hi[1]


def kl_uniform_beta(alpha: float, beta: float) -> float:
    """KL divergence of the uniform density from Beta(alpha, beta) on [0, 1].

    Closed form: ln B(alpha, beta) + (alpha - 1) + (beta - 1).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    return float(special.betaln(alpha, beta) + (alpha - 1.0) + (beta - 1.0))


def robustness_sweep(
    agents: dict[int, Agent],
    env: EnvironmentConfig,
    beta_params_list,
    n_episodes: int,
    t_max: int,
    eval_seed: int = 12345,
) -> list[dict]:
    """Evaluate under shifted Beta task priors; rows sorted by divergence."""
    rows = []
    for alpha, beta in beta_params_list:
        shifted = EnvironmentConfig(
            kind=env.kind,
            dim=env.dim,
            eps=env.eps,
            prior_family="beta",
            prior_alpha=float(alpha),
            prior_beta=float(beta),
            noise_p=env.noise_p,
            noise_sigma=env.noise_sigma,
        )
        res = evaluate(agents, shifted, n_episodes, t_max, eval_seed=eval_seed, n_boot=200)
        rows.append(
            {
                "alpha": float(alpha),
                "beta": float(beta),
                "kl": kl_uniform_beta(alpha, beta),
                "mean_tau": res.mean_tau,
                "correctness": res.correctness,
            }
        )
    rows.sort(key=lambda r: (r["kl"], r["alpha"], r["beta"]))
    return rows


# ---------------------------------------------------------------------------
# Curve emission


def write_survival_csv(result: EvalResult, t_max: int, path) -> None:
    curve = survival(result.taus(), t_max)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "survival"])
        for t, p in enumerate(curve):
            writer.writerow([t, repr(float(p))])


def write_sigma_trace_csv(result: EvalResult, path) -> None:
    """Mean posterior-sigma trace per step, averaged over episodes that
    reached each step."""
    max_len = max((len(r.sigma_trace) for r in result.records), default=0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mean_sigma", "n_episodes"])
        for t in range(max_len):
            vals = [r.sigma_trace[t] for r in result.records if len(r.sigma_trace) > t]
            writer.writerow([t + 1, repr(float(np.mean(vals))), len(vals)])
