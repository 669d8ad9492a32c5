"""Shared history encoder: token embedding, causal backbone, pooled readout.

Every interaction step becomes one token (action, following observation,
is-initial flag) mapped through a linear embedding. A causal backbone (LSTM
or masked attention blocks) produces per-step hidden states, and a time
pooling readout turns the states for a prefix into a single summary vector:
attention over timesteps with a caller-supplied query, followed by a
feature-wise silu gate.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .history import feature_width


def lengths_to_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """Boolean (B, T) mask with True on valid positions."""
    ar = torch.arange(max_len, device=lengths.device)
    return ar[None, :] < lengths[:, None]


class TimePooling(nn.Module):
    """Attention readout over timesteps plus a feature gate.

    alpha_i = softmax_i(<q, W_k h_i> / sqrt(d)), v = sum_i alpha_i W_v h_i,
    z = v * silu(W_m q_out) with a learned gate query q_out.
    """

    def __init__(self, d_model: int):
        super().__init__()
        self.d_model = d_model
        self.w_k = nn.Linear(d_model, d_model, bias=False)
        self.w_v = nn.Linear(d_model, d_model, bias=False)
        self.w_m = nn.Linear(d_model, d_model, bias=False)
        self.q_out = nn.Parameter(torch.randn(d_model) / math.sqrt(d_model))

    def pool(
        self, hidden: torch.Tensor, query: torch.Tensor, mask: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Weighted summary over valid timesteps.

        hidden: (B, T, d); query: (d,) or (B, d); mask: (B, T) or None.
        Returns (v, alpha) with v: (B, d) and alpha: (B, T).
        """
        if hidden.ndim != 3:
            raise ValueError("hidden states must be (B, T, d)")
        keys = self.w_k(hidden)
        if query.ndim == 1:
            logits = keys @ query
        else:
            logits = torch.einsum("btd,bd->bt", keys, query)
        logits = logits / math.sqrt(self.d_model)
        if mask is not None:
            logits = logits.masked_fill(~mask, float("-inf"))
        alpha = torch.softmax(logits, dim=-1)
        v = torch.einsum("bt,btd->bd", alpha, self.w_v(hidden))
        return v, alpha

    def gate(self, v: torch.Tensor) -> torch.Tensor:
        return v * F.silu(self.w_m(self.q_out))

    def forward(self, hidden, query, mask=None):
        v, alpha = self.pool(hidden, query, mask)
        return self.gate(v), alpha


class CausalAttentionBlock(nn.Module):
    """Pre-norm self-attention + feed-forward with a causal mask."""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = nn.MultiheadAttention(d_model, n_heads, batch_first=True)
        self.ln2 = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.SiLU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        t = x.shape[1]
        causal = torch.triu(
            torch.ones(t, t, dtype=torch.bool, device=x.device), diagonal=1
        )
        h = self.ln1(x)
        attn_out, _ = self.attn(h, h, h, attn_mask=causal, need_weights=False)
        x = x + attn_out
        x = x + self.ff(self.ln2(x))
        return x


class HistoryEncoder(nn.Module):
    """Token embedding plus a causal sequential backbone.

    ``backbone`` selects between stacked causal attention blocks (default) and
    an LSTM; both guarantee h_i depends only on tokens 1..i.
    """

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
        if backbone not in ("attention", "lstm"):
            raise ValueError(f"unknown backbone: {backbone!r}")
        self.dim = dim
        self.obs_width = obs_width
        self.d_model = d_model
        self.backbone = backbone
        self.in_width = feature_width(dim, obs_width)
        self.embed = nn.Linear(self.in_width, d_model)
        if backbone == "lstm":
            self.rnn = nn.LSTM(d_model, d_model, num_layers=depth, batch_first=True)
        else:
            self.blocks = nn.ModuleList(
                CausalAttentionBlock(d_model, n_heads) for _ in range(depth)
            )

    def embed_step(self, action, observation, is_initial: bool = False) -> torch.Tensor:
        """Embed a single step into one token of width d_model."""
        action = np.asarray(action, dtype=float)
        observation = np.asarray(observation, dtype=float)
        if action.shape != (self.dim,):
            raise ValueError(f"action must have width {self.dim}")
        if observation.shape != (self.obs_width,):
            raise ValueError(f"observation must have width {self.obs_width}")
        feat = np.concatenate([action, observation, [1.0 if is_initial else 0.0]])
        x = torch.as_tensor(feat, dtype=self.embed.weight.dtype)
        return self.embed(x)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        """Encode (B, T, F) token features into (B, T, d) hidden states."""
        if feats.ndim != 3:
            raise ValueError("token features must be (B, T, F)")
        if feats.shape[1] < 1:
            raise ValueError("cannot encode an empty sequence")
        if feats.shape[2] != self.in_width:
            raise ValueError(f"token features must have width {self.in_width}")
        x = self.embed(feats)
        if self.backbone == "lstm":
            out, _ = self.rnn(x)
            return out
        for block in self.blocks:
            x = block(x)
        return x
