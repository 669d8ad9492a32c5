"""Exact Bayesian filtering and stop/continue dynamic programming on grids.

A :class:`GridModel` discretizes a task family: a finite hypothesis grid, a
finite query set, a finite observation alphabet, and an exact likelihood
table. On such a model the posterior over hypotheses is a finite weight
vector, the set of beliefs reachable from the prior is enumerable, and the
optimal trade-off between querying (unit cost per step) and stopping (terminal
reward ``lam * r`` where ``r`` is the best achievable posterior success
probability) can be tabulated exactly by backward induction.

This module is the ground-truth reference the learned agent is checked
against: it also verifies the mean-loss lower bound on the posterior success
probability that motivates the critic's shaped reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Beliefs are deduplicated after rounding weights to this resolution.
_ROUND = 1e-10
_CERTAIN = 1.0 - 1e-12
_IMPOSSIBLE = 1e-15


class ImpossibleObservationError(ValueError):
    """Raised when conditioning on an observation with zero predictive mass."""


class ResourceLimitError(RuntimeError):
    """Raised when the reachable-belief enumeration exceeds the node budget."""


@dataclass
class BeliefState:
    """Posterior over the hypothesis grid: nonnegative weights summing to 1."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1:
            raise ValueError("belief weights must be a vector")
        if np.any(self.weights < -1e-15):
            raise ValueError("belief weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("belief weights must sum to 1")


@dataclass
class GridModel:
    """Discretized instance: grids, prior, exact likelihoods, and the trade-off.

    ``likelihood[a, y, h]`` is the probability of observing alphabet entry
    ``y`` when querying action ``a`` under hypothesis ``h``. The stop reward
    multiplier ``lam`` is the reward-form constant; a per-step-cost model is
    expressed as ``lam = 1 / cost``.
    """

    hypothesis_grid: np.ndarray
    action_grid: np.ndarray
    observation_alphabet: np.ndarray
    prior: np.ndarray
    likelihood: np.ndarray
    eps: float
    lam: float
    candidates: np.ndarray | None = None
    node_budget: int = 1_000_000

    def __post_init__(self):
        self.hypothesis_grid = np.atleast_2d(np.asarray(self.hypothesis_grid, dtype=float))
        if self.hypothesis_grid.shape[0] == 1 and self.hypothesis_grid.shape[1] > 1:
            self.hypothesis_grid = self.hypothesis_grid.T
        self.action_grid = np.atleast_2d(np.asarray(self.action_grid, dtype=float))
        if self.action_grid.shape[0] == 1 and self.action_grid.shape[1] > 1:
            self.action_grid = self.action_grid.T
        self.observation_alphabet = np.asarray(self.observation_alphabet, dtype=float)
        self.prior = np.asarray(self.prior, dtype=float)
        self.likelihood = np.asarray(self.likelihood, dtype=float)

        n = self.hypothesis_grid.shape[0]
        n_act = self.action_grid.shape[0]
        n_obs = self.observation_alphabet.shape[0]
        if self.prior.shape != (n,):
            raise ValueError("prior length must match the hypothesis grid")
        if abs(float(self.prior.sum()) - 1.0) > 1e-12:
            raise ValueError("prior must sum to 1 within 1e-12")
        if self.likelihood.shape != (n_act, n_obs, n):
            raise ValueError("likelihood must have shape (actions, observations, hypotheses)")
        row_sums = self.likelihood.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > 1e-12:
            raise ValueError("every likelihood row must sum to 1 within 1e-12")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

        if self.candidates is None:
            self.candidates = _default_candidates(self.hypothesis_grid)
        else:
            self.candidates = np.atleast_2d(np.asarray(self.candidates, dtype=float))
            if self.candidates.shape[1] != self.dim:
                raise ValueError("candidate points must match the grid dimension")

        # Indicator of the eps-ball and pairwise distances, hypotheses x candidates.
        dists = np.linalg.norm(
            self.hypothesis_grid[:, None, :] - self.candidates[None, :, :], axis=-1
        )
        self._cand_dist = dists
        self._cand_cover = (dists <= self.eps).astype(float)
        # Likelihood flattened to (hypotheses, actions * observations) for fast
        # predictive computation: pred = W @ _lik2d.
        self._lik2d = self.likelihood.transpose(2, 0, 1).reshape(n, n_act * n_obs)

    @property
    def n_hypotheses(self) -> int:
        return self.hypothesis_grid.shape[0]

    @property
    def n_actions(self) -> int:
        return self.action_grid.shape[0]

    @property
    def n_observations(self) -> int:
        return self.observation_alphabet.shape[0]

    @property
    def dim(self) -> int:
        return self.hypothesis_grid.shape[1]

    def prior_belief(self) -> BeliefState:
        return BeliefState(self.prior.copy())

    def action_index(self, action) -> int:
        a = np.atleast_1d(np.asarray(action, dtype=float))
        dists = np.linalg.norm(self.action_grid - a[None, :], axis=1)
        idx = int(np.argmin(dists))
        if dists[idx] > 1e-9:
            raise ValueError(f"action {action!r} not on the action grid")
        return idx

    def observation_index(self, observation) -> int:
        y = float(np.asarray(observation).reshape(()))
        dists = np.abs(self.observation_alphabet - y)
        idx = int(np.argmin(dists))
        if dists[idx] > 1e-9:
            raise ValueError(f"observation {observation!r} not in the alphabet")
        return idx


def _default_candidates(grid: np.ndarray) -> np.ndarray:
    """Grid points plus midpoints of consecutive points, per axis.

    On a 1-D grid the posterior success probability, as a function of the
    candidate point, is piecewise constant with breakpoints at eps-ball
    boundaries; grid points and adjacent midpoints hit every piece.
    """
    axes = []
    for j in range(grid.shape[1]):
        coords = np.unique(grid[:, j])
        if coords.size > 1:
            mids = 0.5 * (coords[:-1] + coords[1:])
            coords = np.concatenate([coords, mids])
        axes.append(coords)
    total = int(np.prod([a.size for a in axes]))
    if total > 200_000:
        raise ResourceLimitError("candidate product grid too large")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# Single-belief operations


def posterior_update(model: GridModel, belief: BeliefState, action, observation) -> BeliefState:
    """Bayes update: reweight by the observation likelihood and renormalize."""
    a_idx = model.action_index(action)
    y_idx = model.observation_index(observation)
    lik = model.likelihood[a_idx, y_idx]
    post = belief.weights * lik
    total = float(post.sum())
    if total <= _IMPOSSIBLE:
        raise ImpossibleObservationError(
            f"observation {observation!r} has zero predictive probability"
        )
    return BeliefState(post / total)


def q_exact(model: GridModel, belief: BeliefState, x) -> float:
    """Posterior probability that ``x`` is within eps of the true hypothesis."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dists = np.linalg.norm(model.hypothesis_grid - x[None, :], axis=1)
    return float(belief.weights[dists <= model.eps].sum())


def r_exact(model: GridModel, belief: BeliefState) -> tuple[float, np.ndarray]:
    """Best posterior success probability over the candidate set.

    Returns the maximal value and the first candidate attaining it.
    """
    q = belief.weights @ model._cand_cover
    idx = int(np.argmax(q))
    return float(q[idx]), model.candidates[idx].copy()


# ---------------------------------------------------------------------------
# Reachable-belief enumeration

_HASH_RNG = np.random.default_rng(0x5EED)
_HASH_VECS: dict[int, np.ndarray] = {}


def _hash_vectors(n: int) -> np.ndarray:
    if n not in _HASH_VECS:
        vecs = _HASH_RNG.integers(-(2**62), 2**62, size=(n, 2), dtype=np.int64)
        _HASH_VECS[n] = vecs | 1
    return _HASH_VECS[n]


class ReachableSet:
    """Registry of beliefs reachable from the prior, expanded level by level.

    Beliefs are keyed by their weight vectors rounded to 1e-10 and hashed with
    two independent 64-bit projections; ``levels[t]`` holds the ids reachable
    in exactly t queries (including repeats via uninformative observations).
    """

    def __init__(self, model: GridModel):
        self.model = model
        self._rows: list[np.ndarray] = []
        self._index: dict[tuple[int, int], int] = {}
        self.succ: list[np.ndarray | None] = []
        self.pred: list[np.ndarray | None] = []
        self.levels: list[np.ndarray] = []
        self._stacks: dict[int, tuple] = {}
        self._hash = _hash_vectors(model.n_hypotheses)
        proj_rng = np.random.default_rng(0xB111F5)
        n = model.n_hypotheses
        self._proj1 = proj_rng.standard_normal(n)
        self._proj2 = proj_rng.standard_normal(n)
        # Two rows agreeing after 1e-10 rounding may differ by this much in
        # the second projection; anything larger is a genuine mismatch.
        self._proj2_tol = 2.0 * _ROUND * float(np.abs(self._proj2).sum())
        root = self._register(model.prior[None, :])[0]
        self.levels.append(np.array([root], dtype=np.int64))

    # -- registry -----------------------------------------------------------

    def _keys_of(self, rows: np.ndarray) -> np.ndarray:
        scaled = rows * (1.0 / _ROUND)
        np.rint(scaled, out=scaled)
        ints = scaled.astype(np.int64)
        with np.errstate(over="ignore"):
            return ints @ self._hash  # wrapping int64 products; used as a hash

    def _new_node(self, key: tuple[int, int], row: np.ndarray) -> int:
        idx = len(self._rows)
        if idx >= self.model.node_budget:
            raise ResourceLimitError(
                f"reachable beliefs exceed the node budget ({self.model.node_budget})"
            )
        self._index[key] = idx
        self._rows.append(row.copy())
        self.succ.append(None)
        self.pred.append(None)
        return idx

    def _register_one(self, row: np.ndarray) -> int:
        keys = self._keys_of(row[None, :])
        key = (int(keys[0, 0]), int(keys[0, 1]))
        idx = self._index.get(key)
        if idx is None:
            idx = self._new_node(key, row)
        return idx

    def _register(self, rows: np.ndarray) -> np.ndarray:
        """Map each row to its node id, creating nodes for unseen beliefs.

        Rows are grouped by a float projection first so that the exact
        rounded-key path only runs on group representatives; a second
        projection guards against accidental projection collisions between
        distinct beliefs (mismatching rows fall back to exact registration).
        """
        h1 = rows @ self._proj1
        _, first_pos, inverse = np.unique(h1, return_index=True, return_inverse=True)
        inverse = np.ravel(inverse)
        rep_keys = self._keys_of(rows[first_pos])
        ids_of_group = np.empty(first_pos.size, dtype=np.int64)
        for u in range(first_pos.size):
            key = (int(rep_keys[u, 0]), int(rep_keys[u, 1]))
            idx = self._index.get(key)
            if idx is None:
                idx = self._new_node(key, rows[first_pos[u]])
            ids_of_group[u] = idx
        out = ids_of_group[inverse]

        h2 = rows @ self._proj2
        mismatch = np.abs(h2 - h2[first_pos][inverse]) > self._proj2_tol
        if np.any(mismatch):
            for i in np.nonzero(mismatch)[0]:
                out[i] = self._register_one(rows[i])
        return out

    def belief(self, idx: int) -> np.ndarray:
        return self._rows[idx]

    def belief_matrix(self, ids) -> np.ndarray:
        return np.stack([self._rows[i] for i in np.asarray(ids, dtype=np.int64)])

    @property
    def n_nodes(self) -> int:
        return len(self._rows)

    def all_ids(self) -> np.ndarray:
        return np.arange(self.n_nodes, dtype=np.int64)

    # -- expansion ----------------------------------------------------------

    def _expand(self, ids: np.ndarray) -> None:
        """Compute successors for every id that has none yet."""
        model = self.model
        todo = [int(i) for i in ids if self.succ[i] is None]
        if not todo:
            return
        n_act, n_obs = model.n_actions, model.n_observations
        w_mat = self.belief_matrix(todo)
        pred = (w_mat @ model._lik2d).reshape(len(todo), n_act, n_obs)
        np.clip(pred, 0.0, 1.0, out=pred)

        succ = np.full((len(todo), n_act, n_obs), -1, dtype=np.int64)
        # Certain observations leave the belief unchanged (likelihood must be
        # one on the whole support), so they loop back to the same node.
        certain = pred >= _CERTAIN
        for k, node in enumerate(todo):
            succ[k][certain[k]] = node

        interesting = (pred > _IMPOSSIBLE) & ~certain
        rows_i, act_i, obs_i = np.nonzero(interesting)
        for lo in range(0, rows_i.size, 200_000):
            sl = slice(lo, min(lo + 200_000, rows_i.size))
            posts = model.likelihood[act_i[sl], obs_i[sl]]
            posts *= w_mat[rows_i[sl]]
            posts *= (1.0 / pred[rows_i[sl], act_i[sl], obs_i[sl]])[:, None]
            succ[rows_i[sl], act_i[sl], obs_i[sl]] = self._register(posts)

        pred[pred <= _IMPOSSIBLE] = 0.0
        for k, node in enumerate(todo):
            self.succ[node] = succ[k]
            self.pred[node] = pred[k]

    def ensure_depth(self, depth: int) -> None:
        """Expand level sets so that ``levels[0..depth]`` exist.

        Self-loops make level sets grow monotonically, so once two successive
        levels coincide the closure is complete and later levels are reused.
        """
        while len(self.levels) <= depth:
            ids = self.levels[-1]
            if len(self.levels) >= 2 and ids is self.levels[-2]:
                self.levels.append(ids)
                continue
            self._expand(ids)
            children = [self.succ[int(i)].ravel() for i in ids]
            flat = np.concatenate(children)
            nxt = np.unique(flat[flat >= 0])
            if nxt.size == ids.size and np.array_equal(nxt, ids):
                self.levels.append(ids)
            else:
                self.levels.append(nxt)

    def ids_to_depth(self, depth: int) -> np.ndarray:
        self.ensure_depth(depth)
        return np.unique(np.concatenate(self.levels[: depth + 1]))

    def transition_matrices(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (successor, predictive) tables for the given ids, cached
        per level array (levels repeat once the closure stabilizes)."""
        hit = self._stacks.get(id(ids))
        if hit is not None and hit[0] is ids:
            return hit[1], hit[2]
        succ = np.stack([self.succ[int(i)] for i in ids])
        pred = np.stack([self.pred[int(i)] for i in ids])
        self._stacks[id(ids)] = (ids, succ, pred)
        return succ, pred


def reachable_beliefs(model: GridModel, depth: int) -> ReachableSet:
    reach = ReachableSet(model)
    reach.ensure_depth(depth)
    return reach


# ---------------------------------------------------------------------------
# Backward induction

STOP = -1  # policy entry marking the stop decision


@dataclass
class DPResult:
    """Tabulated optimal values and decisions for a forced-stop horizon.

    ``values[t]`` and ``policy[t]`` are aligned with ``level_ids[t]``; a
    policy entry is an action index, or ``STOP``.
    """

    model: GridModel
    horizon: int
    reach: ReachableSet
    level_ids: list[np.ndarray]
    values: list[np.ndarray]
    policy: list[np.ndarray]
    _recs: dict[int, tuple[float, np.ndarray]] = field(default_factory=dict)

    @property
    def value_at_prior(self) -> float:
        return float(self.values[0][0])

    def _position(self, t: int, node: int) -> int:
        ids = self.level_ids[t]
        pos = int(np.searchsorted(ids, node))
        if pos >= ids.size or ids[pos] != node:
            raise KeyError(f"belief {node} not tabulated at step {t}")
        return pos

    def decision(self, t: int, node: int) -> int:
        """Action index to play at step t in the given belief, or STOP."""
        if t >= self.horizon:
            return STOP
        return int(self.policy[t][self._position(t, node)])

    def value(self, t: int, node: int) -> float:
        return float(self.values[t][self._position(t, node)])

    def recommendation(self, node: int) -> tuple[float, np.ndarray]:
        """Best posterior success probability and maximizer at this belief."""
        if node not in self._recs:
            self._recs[node] = r_exact(self.model, BeliefState(self.reach.belief(node)))
        return self._recs[node]


def _stop_values(model: GridModel, reach: ReachableSet, ids: np.ndarray, cache: dict) -> np.ndarray:
    missing = [int(i) for i in ids if int(i) not in cache]
    if missing:
        q = reach.belief_matrix(missing) @ model._cand_cover
        best = q.max(axis=1)
        for node, val in zip(missing, best):
            cache[node] = float(val)
    return np.array([cache[int(i)] for i in ids])


def _continue_values(
    reach: ReachableSet, ids: np.ndarray, next_ids: np.ndarray, next_values: np.ndarray
) -> np.ndarray:
    """Q-values of continuing, per (id, action): -1 + E_y V_next(posterior)."""
    n_nodes = reach.n_nodes
    v_map = np.full(n_nodes, np.nan)
    v_map[next_ids] = next_values
    succ, pred = reach.transition_matrices(ids)  # (M, A, Y) each
    v_next = np.where(succ >= 0, v_map[np.clip(succ, 0, n_nodes - 1)], 0.0)
    q_cont = -1.0 + (pred * v_next).sum(axis=2)  # (M, A)
    return q_cont


def backward_induction(model: GridModel, horizon: int, reach: ReachableSet | None = None) -> DPResult:
    """Tabulate the optimal stop/continue values with a forced stop at T.

    The recursion is the reward form
    ``V_t = max(lam * r, max_a [-1 + E_y V_{t+1}])`` with terminal value
    ``V_T = lam * r``; stopping is preferred on ties.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if reach is None:
        reach = ReachableSet(model)
    reach.ensure_depth(horizon)

    level_ids = [np.asarray(reach.levels[t]) for t in range(horizon + 1)]
    values: list[np.ndarray | None] = [None] * (horizon + 1)
    policy: list[np.ndarray | None] = [None] * (horizon + 1)
    r_cache: dict[int, float] = {}

    stop_T = model.lam * _stop_values(model, reach, level_ids[horizon], r_cache)
    values[horizon] = stop_T
    policy[horizon] = np.full(level_ids[horizon].size, STOP, dtype=np.int64)

    for t in range(horizon - 1, -1, -1):
        ids = level_ids[t]
        v_stop = model.lam * _stop_values(model, reach, ids, r_cache)
        q_cont = _continue_values(reach, ids, level_ids[t + 1], values[t + 1])
        best_action = np.argmax(q_cont, axis=1)
        v_cont = q_cont[np.arange(ids.size), best_action]
        stop_mask = v_stop >= v_cont
        values[t] = np.where(stop_mask, v_stop, v_cont)
        policy[t] = np.where(stop_mask, STOP, best_action)

    return DPResult(model, horizon, reach, level_ids, values, policy)


def backward_induction_stop_action(
    model: GridModel, horizon: int, reach: ReachableSet | None = None
) -> DPResult:
    """Same control problem with stopping as an explicit extra action.

    The action set is augmented with an absorbing stop symbol whose one-step
    reward is ``lam * r`` and which ends the episode; the value is the max of
    the augmented Q-vector. Kept as an independent recursion so equivalence
    with :func:`backward_induction` is a meaningful check.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if reach is None:
        reach = ReachableSet(model)
    reach.ensure_depth(horizon)

    level_ids = [np.asarray(reach.levels[t]) for t in range(horizon + 1)]
    values: list[np.ndarray | None] = [None] * (horizon + 1)
    policy: list[np.ndarray | None] = [None] * (horizon + 1)
    r_cache: dict[int, float] = {}

    values[horizon] = model.lam * _stop_values(model, reach, level_ids[horizon], r_cache)
    policy[horizon] = np.full(level_ids[horizon].size, STOP, dtype=np.int64)

    for t in range(horizon - 1, -1, -1):
        ids = level_ids[t]
        q_stop = model.lam * _stop_values(model, reach, ids, r_cache)
        q_cont = _continue_values(reach, ids, level_ids[t + 1], values[t + 1])
        # Augmented Q-table: stop symbol first, then the continuation actions.
        q_aug = np.concatenate([q_stop[:, None], q_cont], axis=1)
        best = np.argmax(q_aug, axis=1)
        values[t] = q_aug[np.arange(ids.size), best]
        policy[t] = np.where(best == 0, STOP, best - 1)

    return DPResult(model, horizon, reach, level_ids, values, policy)


# ---------------------------------------------------------------------------
# Rollouts and verification


def simulate_optimal(
    model: GridModel, dp: DPResult, rng: np.random.Generator, n_episodes: int
) -> tuple[float, float]:
    """Monte Carlo rollout of the tabulated policy on tasks from the prior.

    Returns (mean number of queries, success rate). A policy that stops at
    the prior makes zero queries.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    reach = dp.reach
    taus = np.empty(n_episodes)
    wins = np.empty(n_episodes)
    hyp_draws = rng.choice(model.n_hypotheses, size=n_episodes, p=model.prior)
    for ep in range(n_episodes):
        hyp = int(hyp_draws[ep])
        node = 0
        t = 0
        while True:
            action = dp.decision(t, node)
            if action == STOP:
                break
            probs = model.likelihood[action, :, hyp]
            y_idx = int(rng.choice(model.n_observations, p=probs))
            node = int(reach.succ[node][action, y_idx])
            t += 1
        _, x_hat = dp.recommendation(node)
        dist = float(np.linalg.norm(x_hat - model.hypothesis_grid[hyp]))
        taus[ep] = t
        wins[ep] = 1.0 if dist <= model.eps else 0.0
    return float(taus.mean()), float(wins.mean())


@dataclass
class MarkovBoundReport:
    """Sweep of the mean-loss lower bound over enumerated beliefs."""

    depth: int
    n_beliefs: int
    n_candidates: int
    n_violations: int
    worst_slack: float  # min over pairs of q - (1 - mean_loss / eps); >= -tol when clean

    @property
    def ok(self) -> bool:
        return self.n_violations == 0

    def summary(self) -> str:
        return (
            f"markov bound sweep: depth={self.depth} beliefs={self.n_beliefs} "
            f"candidates={self.n_candidates} violations={self.n_violations} "
            f"worst_slack={self.worst_slack:.3e}"
        )


def verify_markov_bound(model: GridModel, depth: int, tol: float = 1e-12) -> MarkovBoundReport:
    """Check q(b, x) >= 1 - mean_loss(b, x) / eps on every reachable belief.

    Enumerates all beliefs reachable within ``depth`` queries and every
    candidate recommendation point.
    """
    reach = reachable_beliefs(model, depth)
    ids = reach.ids_to_depth(depth)
    w_mat = reach.belief_matrix(ids)
    q = w_mat @ model._cand_cover  # (M, C)
    mean_loss = w_mat @ model._cand_dist
    slack = q - (1.0 - mean_loss / model.eps)
    violations = int(np.sum(slack < -tol))
    return MarkovBoundReport(
        depth=depth,
        n_beliefs=int(ids.size),
        n_candidates=model.candidates.shape[0],
        n_violations=violations,
        worst_slack=float(slack.min()),
    )


# ---------------------------------------------------------------------------
# Model builders


def binary_search_model(
    n_points: int,
    eps: float,
    lam: float | None = None,
    cost: float | None = None,
    noise_p: float = 0.0,
    n_actions: int | None = None,
    node_budget: int = 1_000_000,
) -> GridModel:
    """1-D sign-feedback model on a uniform grid over [-1, 1].

    Observation +1 means the query is at or below the hypothesis; each sign is
    flipped independently with probability ``noise_p``. By default the action
    grid equals the hypothesis grid; pass ``n_actions`` for a smaller evenly
    spaced interior query set (keeps noisy-model enumeration tractable).
    """
    if n_points < 2:
        raise ValueError("need at least two grid points")
    if (lam is None) == (cost is None):
        raise ValueError("specify exactly one of lam or cost")
    if lam is None:
        if cost <= 0:
            raise ValueError("cost must be positive")
        lam = 1.0 / cost
    if not 0.0 <= noise_p < 0.5:
        raise ValueError("noise_p must lie in [0, 0.5)")

    grid = np.linspace(-1.0, 1.0, n_points)
    if n_actions is None:
        actions = grid.copy()
    else:
        actions = np.linspace(-1.0, 1.0, n_actions + 2)[1:-1]
    alphabet = np.array([-1.0, 1.0])
    # P(+1 | h, a) = 1 - p if a <= h else p
    below = actions[:, None] <= grid[None, :]
    p_plus = np.where(below, 1.0 - noise_p, noise_p)
    likelihood = np.stack([1.0 - p_plus, p_plus], axis=1)  # (A, Y, n)
    prior = np.full(n_points, 1.0 / n_points)
    return GridModel(
        hypothesis_grid=grid[:, None],
        action_grid=actions[:, None],
        observation_alphabet=alphabet,
        prior=prior,
        likelihood=likelihood,
        eps=eps,
        lam=lam,
        node_budget=node_budget,
    )
