"""Stop/continue critic: values a history under a candidate query or the
decision to stop now.

The critic reuses the history encoder, but its pooling query is derived from
the candidate action (cross-attention from the action into the history); the
stop branch uses a dedicated learned query. Targets follow the optimal
stopping structure: continuing pays a per-step cost and bootstraps through
target networks, stopping earns a shaped terminal reward based on how close
the (target-network) recommendation is to the true target, clipped into
[0, 1] so it lower-bounds a success probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from . import envs
from .encoder import HistoryEncoder, TimePooling, lengths_to_mask
from .history import HistoryRecord
from .inference import InferenceNetwork


@dataclass
class CriticValues:
    """Value of continuing with a given query, and of stopping now."""

    q_cont: float
    q_stop: float


class CriticNetwork(nn.Module):
    def __init__(
        self,
        dim: int,
        obs_width: int,
        d_model: int = 64,
        depth: int = 2,
        n_heads: int = 4,
        backbone: str = "attention",
    ):
        super().__init__()
        self.dim = dim
        self.encoder = HistoryEncoder(dim, obs_width, d_model, depth, n_heads, backbone)
        self.readout = TimePooling(d_model)
        self.action_embed = nn.Linear(dim, d_model)
        self.stop_query = nn.Parameter(torch.randn(d_model) / math.sqrt(d_model))
        self.head = nn.Sequential(
            nn.Linear(d_model, d_model), nn.SiLU(), nn.Linear(d_model, 1)
        )
        # Shared additive offset on both heads; stop decisions only depend on
        # the sign of q_stop - q_cont, which this leaves unchanged.
        self.register_buffer("q_offset", torch.zeros(()))

    def _value(self, hidden, query, mask):
        z, _ = self.readout(hidden, query, mask)
        return self.head(z).squeeze(-1) + self.q_offset

    def q_cont_from_hidden(
        self, hidden: torch.Tensor, mask: torch.Tensor | None, actions: torch.Tensor
    ) -> torch.Tensor:
        return self._value(hidden, self.action_embed(actions), mask)

    def q_stop_from_hidden(self, hidden: torch.Tensor, mask: torch.Tensor | None) -> torch.Tensor:
        return self._value(hidden, self.stop_query, mask)

    def forward(
        self, feats: torch.Tensor, lengths: torch.Tensor | None, actions: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Batched (q_cont, q_stop) for padded token features."""
        hidden = self.encoder(feats)
        mask = None
        if lengths is not None:
            mask = lengths_to_mask(lengths, feats.shape[1])
        return (
            self.q_cont_from_hidden(hidden, mask, actions),
            self.q_stop_from_hidden(hidden, mask),
        )

    @torch.no_grad()
    def q_values(self, history: HistoryRecord, action=None) -> CriticValues:
        """Values at a single history; ``action=None`` evaluates only stop."""
        dtype = self.action_embed.weight.dtype
        feats = torch.as_tensor(history.features(), dtype=dtype)[None, :, :]
        hidden = self.encoder(feats)
        q_stop = float(self.q_stop_from_hidden(hidden, None)[0])
        if action is None:
            return CriticValues(q_cont=float("nan"), q_stop=q_stop)
        action = np.asarray(action, dtype=float)
        if action.shape != (self.dim,):
            raise ValueError(f"action must have width {self.dim}")
        act = torch.as_tensor(action, dtype=dtype)[None, :]
        q_cont = float(self.q_cont_from_hidden(hidden, None, act)[0])
        return CriticValues(q_cont=q_cont, q_stop=q_stop)


def shaped_reward(task: envs.Task, x_hat, eps: float | None = None) -> float:
    """Clipped closeness score in [0, 1]: 1 at the target, 0 at distance eps."""
    eps = task.eps if eps is None else eps
    if eps <= 0:
        raise ValueError("eps must be positive")
    return max(0.0, 1.0 - envs.loss(task, x_hat) / eps)


@torch.no_grad()
def bootstrap_target(
    next_history: HistoryRecord,
    target_inference: InferenceNetwork,
    target_critic: CriticNetwork,
) -> float:
    """max of target-net stop value and continue value at the target mean."""
    mu = target_inference.posterior_params(next_history).mu
    vals = target_critic.q_values(next_history, mu)
    return max(vals.q_stop, vals.q_cont)


@torch.no_grad()
def critic_targets(
    transition,
    c: float,
    target_inference: InferenceNetwork,
    target_critic: CriticNetwork,
) -> tuple[float, float]:
    """Regression targets (y_cont, y_stop) for one replayed transition.

    y_cont = -c + (1 - done) * bootstrap at the successor history;
    y_stop = shaped reward of the target-net recommendation at the history.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("per-step cost must lie in [0, 1]")
    y_cont = -c
    if not transition.done:
        y_cont += bootstrap_target(transition.next_history(), target_inference, target_critic)
    mu = target_inference.posterior_params(transition.history_prefix).mu
    y_stop = shaped_reward(transition.task_ref, mu)
    return y_cont, y_stop


def critic_loss_terms(
    q_cont: torch.Tensor,
    q_stop: torch.Tensor,
    y_cont: torch.Tensor,
    y_stop: torch.Tensor,
) -> torch.Tensor:
    """Half the mean squared error of both branches against their targets."""
    if q_cont.numel() == 0:
        raise ValueError("empty batch")
    return 0.5 * torch.mean((q_cont - y_cont) ** 2 + (q_stop - y_stop) ** 2)
