"""Posterior network: history -> diagonal Gaussian over the latent target.

The pooled history summary (with a learned, action-independent query) feeds a
linear head emitting (mu, log sigma); sigma is clamped to a fixed range to
keep both the likelihood objective and the exploration draws well-behaved.
The posterior doubles as the sampling policy: queries are drawn from it and
clipped to the action box, and the recommendation is its mean.
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

SIGMA_MIN = 1e-3
SIGMA_MAX = 2.0


@dataclass
class PosteriorParams:
    """Diagonal Gaussian over the target: mean and per-coordinate std."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.mu.shape != self.sigma.shape:
            raise ValueError("mu and sigma must have matching shapes")
        if np.any(self.sigma <= 0):
            raise ValueError("sigma must be positive")


class InferenceNetwork(nn.Module):
    """Maps a history to posterior parameters via the shared encoder."""

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
        self.q_in = nn.Parameter(torch.randn(d_model) / math.sqrt(d_model))
        self.head = nn.Linear(d_model, 2 * dim)

    def params_from_hidden(
        self, hidden: torch.Tensor, mask: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        z, _ = self.readout(hidden, self.q_in, mask)
        out = self.head(z)
        mu, log_sigma = out[:, : self.dim], out[:, self.dim :]
        sigma = torch.clamp(torch.exp(log_sigma), SIGMA_MIN, SIGMA_MAX)
        return mu, sigma

    def forward(
        self, feats: torch.Tensor, lengths: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        hidden = self.encoder(feats)
        mask = None
        if lengths is not None:
            mask = lengths_to_mask(lengths, feats.shape[1])
        return self.params_from_hidden(hidden, mask)

    @torch.no_grad()
    def posterior_params(self, history: HistoryRecord) -> PosteriorParams:
        """Posterior at a single history; deterministic given the weights."""
        dtype = self.head.weight.dtype
        feats = torch.as_tensor(history.features(), dtype=dtype)[None, :, :]
        mu, sigma = self.forward(feats)
        return PosteriorParams(mu[0].cpu().numpy(), sigma[0].cpu().numpy())


def gaussian_nll(mu: torch.Tensor, sigma: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Negative log-likelihood of ``target`` under N(mu, diag(sigma^2)), per row."""
    d = mu.shape[-1]
    return (
        torch.log(sigma).sum(-1)
        + ((target - mu) ** 2 / (2.0 * sigma**2)).sum(-1)
        + 0.5 * d * math.log(2.0 * math.pi)
    )


def nll(params: PosteriorParams, x_star) -> float:
    """Scalar negative log-likelihood of the target under the posterior."""
    x = np.asarray(x_star, dtype=float)
    if x.shape != params.mu.shape:
        raise ValueError("target width must match the posterior")
    d = x.size
    return float(
        np.sum(np.log(params.sigma))
        + np.sum((x - params.mu) ** 2 / (2.0 * params.sigma**2))
        + 0.5 * d * math.log(2.0 * math.pi)
    )


def sample_action(
    params: PosteriorParams, rng: np.random.Generator, kind: str = envs.BINARY_SEARCH
) -> np.ndarray:
    """Thompson draw from the posterior, clipped to the action box.

    For the unit-sphere family the clipped draw is projected back onto the
    sphere by normalization.
    """
    draw = params.mu + params.sigma * rng.standard_normal(params.mu.shape)
    action = np.clip(draw, -1.0, 1.0)
    if kind == envs.EPS_BEST_ARM:
        norm = np.linalg.norm(action)
        if norm < 1e-12:
            action = np.zeros_like(action)
            action[0] = 1.0
        else:
            action = action / norm
    return action


def recommend(params: PosteriorParams) -> np.ndarray:
    """Point recommendation: the posterior mean."""
    return params.mu.copy()
