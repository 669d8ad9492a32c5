"""Benchmark environment families for continuous hypothesis identification.

Three task families share the same interface: a latent target ``x_star`` in
``[-1, 1]^D``, queries (actions) in the same box, and a scalar or vector
observation per query.

* ``binary_search`` -- per-coordinate noisy sign feedback about whether the
  query is below or above the target.
* ``eps_best_arm`` -- the target lives on the unit sphere and the observation
  is the noisy Euclidean distance between query and target.
* ``ackley`` -- the observation is the (negated, normalized, noisy) Ackley
  landscape shifted so its global optimum sits at the target.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

BINARY_SEARCH = "binary_search"
EPS_BEST_ARM = "eps_best_arm"
ACKLEY = "ackley"

KINDS = (BINARY_SEARCH, EPS_BEST_ARM, ACKLEY)

ACKLEY_A = 10.0
ACKLEY_B_RANGE = (0.1, 0.5)
ACKLEY_C_RANGE = (math.pi, 4.0 * math.pi)

# Observation noise std for the two noisy families.
DEFAULT_NOISE_SIGMA = 0.05


@dataclass(frozen=True)
class PriorSpec:
    """Coordinate-wise prior over the latent target (and Ackley shape params).

    ``uniform`` is equivalent to ``beta`` with alpha = beta = 1. Beta draws in
    [0, 1] are mapped affinely onto the destination range.
    """

    family: str = "uniform"
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.family not in ("uniform", "beta"):
            raise ValueError(f"unknown prior family: {self.family!r}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("beta prior requires alpha > 0 and beta > 0")

    def sample_unit(self, size, rng: np.random.Generator) -> np.ndarray:
        """Draw from the prior on [0, 1]."""
        if self.family == "uniform":
            return rng.uniform(0.0, 1.0, size=size)
        return rng.beta(self.alpha, self.beta, size=size)


@dataclass(frozen=True)
class Task:
    """One sampled environment instance."""

    kind: str
    dim: int
    x_star: np.ndarray
    eps: float
    noise_sigma: float = 0.0
    noise_p: float = 0.0
    ackley_params: tuple[float, float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=float))
        if self.kind not in KINDS:
            raise ValueError(f"unknown task kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.x_star.shape != (self.dim,):
            raise ValueError("x_star must have shape (dim,)")
        if np.any(np.abs(self.x_star) > 1.0 + 1e-12):
            raise ValueError("x_star must lie in [-1, 1]^D")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0.0 <= self.noise_p < 0.5:
            raise ValueError("noise_p must lie in [0, 0.5)")
        if self.kind == EPS_BEST_ARM:
            if abs(np.linalg.norm(self.x_star) - 1.0) > 1e-9:
                raise ValueError("eps_best_arm target must be unit-norm")
        if self.kind == ACKLEY:
            if self.ackley_params is None:
                raise ValueError("ackley task requires ackley_params")
            a, b, c = self.ackley_params
            if a != ACKLEY_A:
                raise ValueError(f"ackley amplitude is fixed at {ACKLEY_A}")
            if not ACKLEY_B_RANGE[0] <= b <= ACKLEY_B_RANGE[1]:
                raise ValueError("ackley b outside its sampling range")
            if not ACKLEY_C_RANGE[0] <= c <= ACKLEY_C_RANGE[1]:
                raise ValueError("ackley c outside its sampling range")
        elif self.ackley_params is not None:
            raise ValueError("ackley_params only valid for ackley tasks")

    def to_json(self) -> dict:
        a, b, c = self.ackley_params if self.ackley_params else (None, None, None)
        return {
            "kind": self.kind,
            "dim": self.dim,
            "x_star": [float(v) for v in self.x_star],
            "a": a,
            "b": b,
            "c": c,
            "noise_sigma": self.noise_sigma,
            "noise_p": self.noise_p,
            "eps": self.eps,
        }

    @staticmethod
    def from_json(rec: dict) -> "Task":
        params = None
        if rec.get("a") is not None:
            params = (rec["a"], rec["b"], rec["c"])
        return Task(
            kind=rec["kind"],
            dim=rec["dim"],
            x_star=np.asarray(rec["x_star"], dtype=float),
            eps=rec["eps"],
            noise_sigma=rec.get("noise_sigma", 0.0),
            noise_p=rec.get("noise_p", 0.0),
            ackley_params=params,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def observation_width(kind: str, dim: int) -> int:
    """Width of the observation vector: D for binary search, 1 otherwise."""
    return dim if kind == BINARY_SEARCH else 1


def sample_task(
    kind: str,
    dim: int,
    prior: PriorSpec,
    eps: float,
    rng: np.random.Generator,
    noise_p: float = 0.0,
    noise_sigma: float | None = None,
) -> Task:
    """Draw one task from the prior.

    The target is drawn coordinate-wise from the prior mapped onto [-1, 1]
    (x = 2u - 1). For ``eps_best_arm`` the draw is projected onto the unit
    sphere: a standard-normal draw is normalized when the prior is uniform,
    and a cube draw is normalized otherwise. Ackley's b and c are drawn from
    the prior mapped onto their ranges.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if kind not in KINDS:
        raise ValueError(f"unknown task kind: {kind!r}")

    params = None
    if kind == EPS_BEST_ARM:
        if prior.family == "uniform":
            draw = rng.standard_normal(dim)
        else:
            draw = 2.0 * prior.sample_unit(dim, rng) - 1.0
        norm = np.linalg.norm(draw)
        if norm < 1e-12:
            draw = np.zeros(dim)
            draw[0] = 1.0
            norm = 1.0
        x_star = draw / norm
        sigma = DEFAULT_NOISE_SIGMA if noise_sigma is None else noise_sigma
        p = 0.0
    elif kind == ACKLEY:
        x_star = 2.0 * prior.sample_unit(dim, rng) - 1.0
        b_lo, b_hi = ACKLEY_B_RANGE
        c_lo, c_hi = ACKLEY_C_RANGE
        b = b_lo + (b_hi - b_lo) * float(prior.sample_unit((), rng))
        c = c_lo + (c_hi - c_lo) * float(prior.sample_unit((), rng))
        params = (ACKLEY_A, b, c)
        sigma = DEFAULT_NOISE_SIGMA if noise_sigma is None else noise_sigma
        p = 0.0
    else:
        x_star = 2.0 * prior.sample_unit(dim, rng) - 1.0
        sigma = 0.0 if noise_sigma is None else noise_sigma
        p = noise_p

    return Task(
        kind=kind,
        dim=dim,
        x_star=x_star,
        eps=eps,
        noise_sigma=sigma,
        noise_p=p,
        ackley_params=params,
    )


def initial_observation(task: Task) -> np.ndarray:
    """Fixed all-zeros first observation (uninformative, fixed width)."""
    return np.zeros(observation_width(task.kind, task.dim))


def ackley_raw(z, a: float, b: float, c: float) -> float:
    """Ackley landscape value at offset z; zero iff z = 0, positive elsewhere."""
    z = np.asarray(z, dtype=float)
    d = z.size
    radial = math.sqrt(float(np.sum(z * z)) / d)
    cosine = float(np.sum(np.cos(c * z))) / d
    return -a * math.exp(-b * radial) - math.exp(cosine) + a + math.e


def normalization(dim: int, b: float, c: float) -> float:
    """Empirical scale constant for Ackley observations."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return math.pi - 0.21 * dim + 9.68 * b + 0.04 * c


def step(task: Task, action, rng: np.random.Generator) -> np.ndarray:
    """Query the environment at ``action`` and return the observation.

    Actions must already lie in [-1, 1]^D; callers clip first.
    """
    action = np.asarray(action, dtype=float)
    if action.shape != (task.dim,):
        raise ValueError(f"action must have shape ({task.dim},)")
    if np.any(np.abs(action) > 1.0 + 1e-9):
        raise ValueError("action outside [-1, 1]^D; clip before stepping")

    if task.kind == BINARY_SEARCH:
        signs = np.where(action <= task.x_star, 1.0, -1.0)
        if task.noise_p > 0.0:
            flips = np.where(rng.random(task.dim) < task.noise_p, -1.0, 1.0)
            signs = signs * flips
        return signs

    if task.kind == EPS_BEST_ARM:
        dist = float(np.linalg.norm(task.x_star - action))
        eta = task.noise_sigma * rng.standard_normal() if task.noise_sigma > 0 else 0.0
        return np.array([dist + eta])

    a, b, c = task.ackley_params
    value = ackley_raw(action - task.x_star, a, b, c)
    eta = task.noise_sigma * rng.standard_normal() if task.noise_sigma > 0 else 0.0
    z_norm = normalization(task.dim, b, c)
    return np.array([(-value + eta) / z_norm])


def loss(task: Task, x) -> float:
    """Euclidean distance of the recommendation to the target."""
    x = np.asarray(x, dtype=float)
    if x.shape != (task.dim,):
        raise ValueError(f"recommendation must have shape ({task.dim},)")
    return float(np.linalg.norm(x - task.x_star))


def is_success(task: Task, x) -> bool:
    """True iff the recommendation is within eps of the target (inclusive)."""
    return loss(task, x) <= task.eps
