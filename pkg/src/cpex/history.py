"""Interaction histories: the (Y_1, A_1, Y_2, ..., A_{t-1}, Y_t) prefix.

A history with t observations embeds into t tokens: the first token carries
the initial observation with a zero action and an is-initial flag, each later
token carries one (action, following observation) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def feature_width(dim: int, obs_width: int) -> int:
    # [action | observation | is_initial flag]
    return dim + obs_width + 1


@dataclass
class HistoryRecord:
    """Episode prefix: actions (k, D) and observations (k + 1, obs_width)."""

    actions: np.ndarray
    observations: np.ndarray
    episode_id: int = 0

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=float)
        self.observations = np.asarray(self.observations, dtype=float)
        if self.actions.ndim != 2 or self.observations.ndim != 2:
            raise ValueError("actions and observations must be 2-D arrays")
        if self.observations.shape[0] != self.actions.shape[0] + 1:
            raise ValueError("need exactly one more observation than actions")

    @property
    def length(self) -> int:
        """Number of tokens (= number of observations seen)."""
        return self.observations.shape[0]

    @property
    def dim(self) -> int:
        return self.actions.shape[1]

    def features(self) -> np.ndarray:
        """(t, F) token feature matrix; row 0 is the initial-observation token."""
        return history_features(self.actions, self.observations)

    def extended(self, action: np.ndarray, observation: np.ndarray) -> "HistoryRecord":
        return HistoryRecord(
            actions=np.vstack([self.actions, np.asarray(action, dtype=float)[None, :]]),
            observations=np.vstack(
                [self.observations, np.asarray(observation, dtype=float)[None, :]]
            ),
            episode_id=self.episode_id,
        )

    @staticmethod
    def initial(observation: np.ndarray, dim: int, episode_id: int = 0) -> "HistoryRecord":
        obs = np.asarray(observation, dtype=float)
        return HistoryRecord(
            actions=np.zeros((0, dim)),
            observations=obs[None, :],
            episode_id=episode_id,
        )


def history_features(actions: np.ndarray, observations: np.ndarray) -> np.ndarray:
    """Token features for a full prefix: (t, D + obs_width + 1)."""
    actions = np.asarray(actions, dtype=float)
    observations = np.asarray(observations, dtype=float)
    t = observations.shape[0]
    dim = actions.shape[1]
    feats = np.zeros((t, feature_width(dim, observations.shape[1])))
    feats[0, dim:-1] = observations[0]
    feats[0, -1] = 1.0
    if t > 1:
        feats[1:, :dim] = actions[: t - 1]
        feats[1:, dim:-1] = observations[1:]
    return feats
