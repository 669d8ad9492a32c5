"""Meta-training loop: Thompson rollouts with learned stopping, replay,
off-policy likelihood/critic updates, Polyak targets, and the cost controller
that calibrates the stopping rule to the target confidence level.
"""

from __future__ import annotations

import collections
import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import critic as critic_mod
from . import envs
from . import inference as inference_mod
from .config import EnvironmentConfig, ExperimentConfig, ModelConfig
from .critic import CriticNetwork
from .history import HistoryRecord, history_features
from .inference import InferenceNetwork, gaussian_nll

CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Replay storage


@dataclass
class Episode:
    """One collected trajectory; transitions are views into these arrays.

    ``truncated`` marks episodes halted by the horizon cap rather than by the
    stop rule; only those absorb (zero) the critic's bootstrap, because a
    voluntary stop's value is already carried by the stop branch of the
    bootstrap max.
    """

    task: envs.Task
    actions: np.ndarray  # (tau, D)
    observations: np.ndarray  # (tau + 1, obs_width)
    episode_id: int
    truncated: bool = False

    def __post_init__(self):
        self.features = history_features(self.actions, self.observations)

    @property
    def length(self) -> int:
        return self.actions.shape[0]


@dataclass
class Transition:
    """Replay item: the prefix before step ``step_index`` plus its outcome."""

    episode: Episode
    step_index: int

    @property
    def done(self) -> bool:
        return self.episode.truncated and self.step_index == self.episode.length - 1

    @property
    def action(self) -> np.ndarray:
        return self.episode.actions[self.step_index]

    @property
    def next_observation(self) -> np.ndarray:
        return self.episode.observations[self.step_index + 1]

    @property
    def x_star(self) -> np.ndarray:
        return self.episode.task.x_star

    @property
    def task_ref(self) -> envs.Task:
        return self.episode.task

    @property
    def episode_id(self) -> int:
        return self.episode.episode_id

    @property
    def history_prefix(self) -> HistoryRecord:
        k = self.step_index
        return HistoryRecord(
            self.episode.actions[:k],
            self.episode.observations[: k + 1],
            episode_id=self.episode.episode_id,
        )

    def next_history(self) -> HistoryRecord:
        k = self.step_index
        return HistoryRecord(
            self.episode.actions[: k + 1],
            self.episode.observations[: k + 2],
            episode_id=self.episode.episode_id,
        )


class ReplayBuffer:
    """Ring of transitions with whole-episode eviction."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._episodes: collections.deque[Episode] = collections.deque()
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, episode: Episode) -> None:
        self._episodes.append(episode)
        self._size += episode.length
        while self._size > self.capacity and len(self._episodes) > 1:
            dropped = self._episodes.popleft()
            self._size -= dropped.length

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform over stored transitions, without replacement within a batch."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        batch_size = min(batch_size, self._size)
        lengths = np.fromiter((ep.length for ep in self._episodes), dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)])
        flat = rng.choice(self._size, size=batch_size, replace=False)
        episodes = list(self._episodes)
        out = []
        for idx in flat:
            ep_idx = int(np.searchsorted(offsets, idx, side="right") - 1)
            out.append(Transition(episodes[ep_idx], int(idx - offsets[ep_idx])))
        return out


# ---------------------------------------------------------------------------
# Cost controller


@dataclass
class CostState:
    """Per-step cost and the recent-episode success window that drives it."""

    c: float
    eta_c: float
    window_size: int = 256
    use_ema: bool = False
    window: collections.deque = field(default_factory=collections.deque)
    ema: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("c must lie in [0, 1]")
        if self.eta_c <= 0:
            raise ValueError("eta_c must be positive")
        self.window = collections.deque(self.window, maxlen=self.window_size)

    def push_outcome(self, success: bool) -> None:
        self.window.append(1.0 if success else 0.0)
        if self.ema is None:
            self.ema = 1.0 if success else 0.0
        else:
            rho = 1.0 / self.window_size
            self.ema = (1.0 - rho) * self.ema + rho * (1.0 if success else 0.0)

    @property
    def p_hat(self) -> float:
        if self.use_ema:
            if self.ema is None:
                raise ValueError("no outcomes recorded")
            return self.ema
        if not self.window:
            raise ValueError("no outcomes recorded")
        return float(np.mean(self.window))


def update_cost(state: CostState, delta: float) -> CostState:
    """One projected step of the confidence-tracking cost update.

    c <- clip(c - eta_c * ((1 - delta) - p_hat), 0, 1): cost rises when the
    success rate exceeds the target (stop earlier), falls when it lags.
    """
    p_hat = state.p_hat
    state.c = float(np.clip(state.c - state.eta_c * ((1.0 - delta) - p_hat), 0.0, 1.0))
    return state


def polyak(target_net: torch.nn.Module, online_net: torch.nn.Module, eta: float) -> None:
    """target <- (1 - eta) * target + eta * online, elementwise."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    with torch.no_grad():
        for p_t, p_o in zip(target_net.parameters(), online_net.parameters()):
            p_t.mul_(1.0 - eta).add_(p_o, alpha=eta)
        for b_t, b_o in zip(target_net.buffers(), online_net.buffers()):
            b_t.copy_((1.0 - eta) * b_t + eta * b_o)


# ---------------------------------------------------------------------------
# Episode collection


@dataclass
class EpisodeResult:
    episode: Episode
    tau: int
    success: bool
    x_hat: np.ndarray
    sigma_trace: np.ndarray  # mean posterior sigma after each step


def _draw_action(params, kind: str, dim: int, rng: np.random.Generator, explore: str) -> np.ndarray:
    if explore == "thompson":
        return inference_mod.sample_action(params, rng, kind)
    draw = rng.uniform(-1.0, 1.0, dim)
    if kind == envs.EPS_BEST_ARM:
        draw = rng.standard_normal(dim)
        norm = np.linalg.norm(draw)
        if norm < 1e-12:
            draw = np.zeros(dim)
            draw[0] = 1.0
            norm = 1.0
        draw = draw / norm
    return draw


def collect_episode(
    inference: InferenceNetwork,
    critic: CriticNetwork,
    task: envs.Task,
    t_max: int,
    rng: np.random.Generator,
    explore: str = "thompson",
    use_stop_rule: bool = True,
    forced_tau: int | None = None,
    episode_id: int = 0,
) -> EpisodeResult:
    """Roll out one episode; at least one query is always executed.

    After each step the posterior is refreshed and the next candidate query is
    drawn; with the stop rule active the episode ends once the critic values
    stopping at least as much as continuing with that candidate. ``forced_tau``
    (stop rule off) fixes the query count for warm-up and fixed-horizon runs.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    kind, dim = task.kind, task.dim
    obs = envs.initial_observation(task)
    actions: list[np.ndarray] = []
    observations: list[np.ndarray] = [obs]
    sigma_trace: list[float] = []

    history = HistoryRecord.initial(obs, dim, episode_id=episode_id)
    params = inference.posterior_params(history)
    action = _draw_action(params, kind, dim, rng, explore)
    limit = t_max if forced_tau is None else min(forced_tau, t_max)
    truncated = False

    while True:
        y = envs.step(task, action, rng)
        actions.append(np.asarray(action, dtype=float))
        observations.append(np.asarray(y, dtype=float))
        history = history.extended(action, y)
        t = len(actions)
        params = inference.posterior_params(history)
        sigma_trace.append(float(params.sigma.mean()))
        if t >= limit:
            truncated = t >= t_max
            break
        candidate = _draw_action(params, kind, dim, rng, explore)
        if use_stop_rule:
            vals = critic.q_values(history, candidate)
            if vals.q_stop >= vals.q_cont:
                break
        action = candidate

    episode = Episode(
        task=task,
        actions=np.stack(actions),
        observations=np.stack(observations),
        episode_id=episode_id,
        truncated=truncated,
    )
    x_hat = inference_mod.recommend(params)
    return EpisodeResult(
        episode=episode,
        tau=len(actions),
        success=envs.is_success(task, x_hat),
        x_hat=x_hat,
        sigma_trace=np.asarray(sigma_trace),
    )


# ---------------------------------------------------------------------------
# Networks, checkpoints


def build_networks(
    env: EnvironmentConfig, model: ModelConfig
) -> tuple[InferenceNetwork, CriticNetwork]:
    inf = InferenceNetwork(
        env.dim, env.obs_width, model.width, model.depth, model.heads, model.backbone
    )
    cri = CriticNetwork(
        env.dim, env.obs_width, model.width, model.depth, model.heads, model.backbone
    )
    return inf, cri


def clone_network(net: torch.nn.Module) -> torch.nn.Module:
    import copy

    target = copy.deepcopy(net)
    for p in target.parameters():
        p.requires_grad_(False)
    return target


def save_checkpoint(path, trainer: "Trainer") -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "environment": {
            "kind": trainer.env_cfg.kind,
            "dim": trainer.env_cfg.dim,
            "eps": trainer.env_cfg.eps,
            "prior_family": trainer.env_cfg.prior_family,
            "prior_alpha": trainer.env_cfg.prior_alpha,
            "prior_beta": trainer.env_cfg.prior_beta,
            "noise_p": trainer.env_cfg.noise_p,
            "noise_sigma": trainer.env_cfg.noise_sigma,
        },
        "model": {
            "backbone": trainer.model_cfg.backbone,
            "width": trainer.model_cfg.width,
            "depth": trainer.model_cfg.depth,
            "heads": trainer.model_cfg.heads,
        },
        "explore": trainer.explore,
        "episode": trainer.episodes_done,
        "inference": trainer.inference.state_dict(),
        "critic": trainer.critic.state_dict(),
        "inference_target": trainer.inference_target.state_dict(),
        "critic_target": trainer.critic_target.state_dict(),
        "cost": {
            "c": trainer.cost.c,
            "eta_c": trainer.cost.eta_c,
            "window_size": trainer.cost.window_size,
            "use_ema": trainer.cost.use_ema,
            "window": list(trainer.cost.window),
            "ema": trainer.cost.ema,
        },
        "rng_state": trainer.rng.bit_generator.state,
    }
    torch.save(payload, path)


@dataclass
class LoadedAgent:
    """Everything needed to roll out a trained agent."""

    inference: InferenceNetwork
    critic: CriticNetwork
    inference_target: InferenceNetwork
    critic_target: CriticNetwork
    env: EnvironmentConfig
    model: ModelConfig
    explore: str
    episode: int
    cost: CostState
    rng_state: dict | None


def load_checkpoint(path) -> LoadedAgent:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('version')}")
    env = EnvironmentConfig(**payload["environment"])
    model = ModelConfig(**payload["model"])
    inf, cri = build_networks(env, model)
    inf.load_state_dict(payload["inference"])
    cri.load_state_dict(payload["critic"])
    inf_t, cri_t = build_networks(env, model)
    inf_t.load_state_dict(payload["inference_target"])
    cri_t.load_state_dict(payload["critic_target"])
    for net in (inf, cri, inf_t, cri_t):
        net.eval()
    cost = CostState(
        c=payload["cost"]["c"],
        eta_c=payload["cost"]["eta_c"],
        window_size=payload["cost"]["window_size"],
        use_ema=payload["cost"]["use_ema"],
        window=payload["cost"]["window"],
    )
    cost.ema = payload["cost"]["ema"]
    return LoadedAgent(
        inference=inf,
        critic=cri,
        inference_target=inf_t,
        critic_target=cri_t,
        env=env,
        model=model,
        explore=payload.get("explore", "thompson"),
        episode=payload["episode"],
        cost=cost,
        rng_state=payload.get("rng_state"),
    )


# ---------------------------------------------------------------------------
# Trainer


class Trainer:
    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.env_cfg = cfg.environment
        self.model_cfg = cfg.model
        self.train_cfg = cfg.training
        self.explore = cfg.training.explore

        torch.manual_seed(cfg.training.seed)
        self.inference, self.critic = build_networks(cfg.environment, cfg.model)
        self.inference_target = clone_network(self.inference)
        self.critic_target = clone_network(self.critic)

        lr = cfg.training.learning_rate
        self.opt_inference = torch.optim.Adam(self.inference.parameters(), lr=lr)
        self.opt_critic = torch.optim.Adam(self.critic.parameters(), lr=lr)

        self.buffer = ReplayBuffer(cfg.training.buffer_capacity)
        self.cost = CostState(
            c=cfg.training.c_init,
            eta_c=cfg.training.eta_cost,
            window_size=cfg.training.cost_window,
            use_ema=cfg.training.cost_use_ema,
        )
        seq = np.random.SeedSequence(cfg.training.seed)
        env_seed, buf_seed = seq.spawn(2)
        self.rng = np.random.default_rng(env_seed)
        self.rng_buffer = np.random.default_rng(buf_seed)
        self.episodes_done = 0
        self.metrics_rows: list[dict] = []
        self._accum = {"tau": [], "nll": [], "critic_loss": []}

    # -- one environment interaction + one gradient step ---------------------

    def _warmup_tau(self) -> int:
        t_max = self.train_cfg.t_max
        if self.rng.random() < 0.5:
            return t_max
        g = int(self.rng.geometric(min(1.0, 3.0 / t_max)))
        return int(np.clip(g, 1, t_max))

    def run_episode(self) -> EpisodeResult:
        task = envs.sample_task(
            self.env_cfg.kind,
            self.env_cfg.dim,
            self.env_cfg.prior(),
            self.env_cfg.eps,
            self.rng,
            noise_p=self.env_cfg.noise_p,
            noise_sigma=self.env_cfg.noise_sigma,
        )
        warming = self.episodes_done < self.train_cfg.warmup_episodes
        if warming:
            result = collect_episode(
                self.inference,
                self.critic,
                task,
                self.train_cfg.t_max,
                self.rng,
                explore="uniform",
                use_stop_rule=False,
                forced_tau=self._warmup_tau(),
                episode_id=self.episodes_done,
            )
        else:
            result = collect_episode(
                self.inference,
                self.critic,
                task,
                self.train_cfg.t_max,
                self.rng,
                explore=self.explore,
                use_stop_rule=True,
                episode_id=self.episodes_done,
            )
        self.buffer.push(result.episode)
        # Warm-up rollouts use forced lengths, so their success rate says
        # nothing about the stop rule; the cost update starts afterwards.
        if not warming:
            self.cost.push_outcome(result.success)
            update_cost(self.cost, self.train_cfg.delta)
        self.episodes_done += 1
        return result

    def _batch_tensors(self, batch: list[Transition]):
        dim = self.env_cfg.dim
        width = self.inference.encoder.in_width
        max_len = max(tr.step_index + 2 for tr in batch)
        b = len(batch)
        feats = np.zeros((b, max_len, width), dtype=np.float32)
        lengths_t = np.empty(b, dtype=np.int64)
        actions = np.empty((b, dim), dtype=np.float32)
        x_star = np.empty((b, dim), dtype=np.float32)
        done = np.empty(b, dtype=np.float32)
        eps = np.empty(b, dtype=np.float32)
        for i, tr in enumerate(batch):
            upto = tr.step_index + 2
            feats[i, :upto] = tr.episode.features[:upto]
            lengths_t[i] = tr.step_index + 1
            actions[i] = tr.action
            x_star[i] = tr.x_star
            done[i] = 1.0 if tr.done else 0.0
            eps[i] = tr.task_ref.eps
        to = torch.from_numpy
        return (
            to(feats),
            to(lengths_t),
            to(actions),
            to(x_star),
            to(done),
            to(eps),
        )

    def gradient_step(self, batch: list[Transition]) -> tuple[float, float]:
        """One likelihood step and one critic regression step on a batch."""
        feats, lengths_t, actions, x_star, done, eps = self._batch_tensors(batch)
        from .encoder import lengths_to_mask

        max_len = feats.shape[1]
        mask_t = lengths_to_mask(lengths_t, max_len)
        mask_tp1 = lengths_to_mask(lengths_t + 1, max_len)

        # Inference: likelihood of the true target under the posterior at H_t.
        mu, sigma = self.inference(feats, lengths_t)
        loss_inf = gaussian_nll(mu, sigma, x_star).mean()
        self.opt_inference.zero_grad()
        loss_inf.backward()
        self.opt_inference.step()

        # Critic targets from the target networks only.
        with torch.no_grad():
            hidden_ti = self.inference_target.encoder(feats)
            mu_t, _ = self.inference_target.params_from_hidden(hidden_ti, mask_t)
            mu_tp1, _ = self.inference_target.params_from_hidden(hidden_ti, mask_tp1)
            dist_t = torch.linalg.norm(mu_t - x_star, dim=1)
            y_stop = torch.clamp(1.0 - dist_t / eps, min=0.0)
            hidden_tc = self.critic_target.encoder(feats)
            q_stop_next = self.critic_target.q_stop_from_hidden(hidden_tc, mask_tp1)
            q_cont_next = self.critic_target.q_cont_from_hidden(hidden_tc, mask_tp1, mu_tp1)
            v_targ = torch.maximum(q_stop_next, q_cont_next)
            y_cont = -self.cost.c + (1.0 - done) * v_targ

        hidden_c = self.critic.encoder(feats)
        q_cont = self.critic.q_cont_from_hidden(hidden_c, mask_t, actions)
        q_stop = self.critic.q_stop_from_hidden(hidden_c, mask_t)
        loss_critic = critic_mod.critic_loss_terms(q_cont, q_stop, y_cont, y_stop)
        self.opt_critic.zero_grad()
        loss_critic.backward()
        self.opt_critic.step()

        polyak(self.inference_target, self.inference, self.train_cfg.eta_inference)
        polyak(self.critic_target, self.critic, self.train_cfg.eta_critic)
        return float(loss_inf.detach()), float(loss_critic.detach())

    # -- full loop ------------------------------------------------------------

    def train(self, out_dir=None, checkpoint_every: int | None = None) -> list[str]:
        """Run the configured number of episodes; returns checkpoint paths."""
        out_dir = out_dir or self.cfg.io.out_dir
        checkpoint_every = checkpoint_every or self.cfg.io.checkpoint_every
        os.makedirs(out_dir, exist_ok=True)
        metrics_path = os.path.join(out_dir, f"metrics_seed{self.train_cfg.seed}.csv")
        checkpoints: list[str] = []

        with open(metrics_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "p_hat", "c", "mean_tau", "nll", "critic_loss"])
            for _ in range(self.train_cfg.total_episodes):
                result = self.run_episode()
                self._accum["tau"].append(result.tau)
                if len(self.buffer) >= self.train_cfg.batch_size:
                    batch = self.buffer.sample(self.train_cfg.batch_size, self.rng_buffer)
                    nll_val, critic_val = self.gradient_step(batch)
                    self._accum["nll"].append(nll_val)
                    self._accum["critic_loss"].append(critic_val)
                if self.episodes_done % self.train_cfg.log_every == 0:
                    row = {
                        "episode": self.episodes_done,
                        "p_hat": self.cost.p_hat if self.cost.window else math.nan,
                        "c": self.cost.c,
                        "mean_tau": float(np.mean(self._accum["tau"])),
                        "nll": float(np.mean(self._accum["nll"])) if self._accum["nll"] else math.nan,
                        "critic_loss": float(np.mean(self._accum["critic_loss"]))
                        if self._accum["critic_loss"]
                        else math.nan,
                    }
                    self.metrics_rows.append(row)
                    writer.writerow([row[k] for k in ("episode", "p_hat", "c", "mean_tau", "nll", "critic_loss")])
                    fh.flush()
                    self._accum = {"tau": [], "nll": [], "critic_loss": []}
                if self.episodes_done % checkpoint_every == 0:
                    path = os.path.join(
                        out_dir, f"ckpt_seed{self.train_cfg.seed}_ep{self.episodes_done}.pt"
                    )
                    save_checkpoint(path, self)
                    checkpoints.append(path)

        final = os.path.join(out_dir, f"ckpt_seed{self.train_cfg.seed}_final.pt")
        save_checkpoint(final, self)
        checkpoints.append(final)
        return checkpoints
