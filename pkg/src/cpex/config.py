"""Experiment configuration: typed blocks, YAML parsing, field-level errors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import yaml

from . import envs


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class EnvironmentConfig:
    kind: str = envs.BINARY_SEARCH
    dim: int = 2
    eps: float | None = None  # required; validated below
    prior_family: str = "uniform"
    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    noise_p: float = 0.0
    noise_sigma: float | None = None  # None = family default

    def validate(self, prefix="environment"):
        if self.kind not in envs.KINDS:
            raise ConfigError(f"{prefix}.kind", f"must be one of {envs.KINDS}")
        if self.dim < 1:
            raise ConfigError(f"{prefix}.dim", "must be >= 1")
        if self.eps is None:
            raise ConfigError(f"{prefix}.eps", "required field is missing")
        if self.eps <= 0:
            raise ConfigError(f"{prefix}.eps", "must be positive")
        if self.prior_family not in ("uniform", "beta"):
            raise ConfigError(f"{prefix}.prior_family", "must be uniform or beta")
        if self.prior_alpha <= 0 or self.prior_beta <= 0:
            raise ConfigError(f"{prefix}.prior_alpha", "beta parameters must be positive")
        if not 0.0 <= self.noise_p < 0.5:
            raise ConfigError(f"{prefix}.noise_p", "must lie in [0, 0.5)")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ConfigError(f"{prefix}.noise_sigma", "must be nonnegative")

    def prior(self) -> envs.PriorSpec:
        return envs.PriorSpec(self.prior_family, self.prior_alpha, self.prior_beta)

    @property
    def obs_width(self) -> int:
        return envs.observation_width(self.kind, self.dim)


@dataclass
class ModelConfig:
    backbone: str = "attention"
    width: int = 64
    depth: int = 2
    heads: int = 4

    def validate(self, prefix="model"):
        if self.backbone not in ("attention", "lstm"):
            raise ConfigError(f"{prefix}.backbone", "must be attention or lstm")
        if self.width < 1 or self.depth < 1 or self.heads < 1:
            raise ConfigError(f"{prefix}.width", "width/depth/heads must be >= 1")
        if self.width % self.heads != 0:
            raise ConfigError(f"{prefix}.heads", "heads must divide width")


@dataclass
class TrainingConfig:
    total_episodes: int = 20000
    delta: float = 0.1
    t_max: int = 100
    explore: str = "thompson"  # thompson | uniform
    learning_rate: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    warmup_episodes: int = 1000
    eta_inference: float = 0.005
    eta_critic: float = 0.005
    eta_cost: float = 0.01
    c_init: float = 0.05
    cost_window: int = 256
    cost_use_ema: bool = False
    seed: int = 0
    log_every: int = 100

    def validate(self, prefix="training"):
        if not 0.0 < self.delta < 0.5:
            raise ConfigError(f"{prefix}.delta", "must lie in (0, 0.5)")
        if self.t_max < 1:
            raise ConfigError(f"{prefix}.t_max", "must be >= 1")
        if self.total_episodes < 0:
            raise ConfigError(f"{prefix}.total_episodes", "must be >= 0")
        if self.explore not in ("thompson", "uniform"):
            raise ConfigError(f"{prefix}.explore", "must be thompson or uniform")
        for name in ("learning_rate", "eta_inference", "eta_critic", "eta_cost"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{prefix}.{name}", "must be positive")
        if self.batch_size < 1:
            raise ConfigError(f"{prefix}.batch_size", "must be >= 1")
        if self.buffer_capacity < 1:
            raise ConfigError(f"{prefix}.buffer_capacity", "must be >= 1")
        if not 0.0 <= self.c_init <= 1.0:
            raise ConfigError(f"{prefix}.c_init", "must lie in [0, 1]")
        if self.cost_window < 1:
            raise ConfigError(f"{prefix}.cost_window", "must be >= 1")


@dataclass
class EvaluationConfig:
    n_episodes: int = 500
    seeds: list[int] = field(default_factory=lambda: [0, 1])
    beta_sweep: list[list[float]] = field(default_factory=list)
    eval_seed: int = 12345

    def validate(self, prefix="evaluation"):
        if self.n_episodes < 1:
            raise ConfigError(f"{prefix}.n_episodes", "must be >= 1")
        if not self.seeds:
            raise ConfigError(f"{prefix}.seeds", "need at least one seed")
        for pair in self.beta_sweep:
            if len(pair) != 2 or pair[0] <= 0 or pair[1] <= 0:
                raise ConfigError(f"{prefix}.beta_sweep", "entries must be positive (alpha, beta) pairs")


@dataclass
class IOConfig:
    out_dir: str = "runs/default"
    checkpoint_every: int = 5000

    def validate(self, prefix="io"):
        if not self.out_dir:
            raise ConfigError(f"{prefix}.out_dir", "must be a nonempty path")
        if self.checkpoint_every < 1:
            raise ConfigError(f"{prefix}.checkpoint_every", "must be >= 1")


@dataclass
class ExperimentConfig:
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    io: IOConfig = field(default_factory=IOConfig)

    def validate(self) -> "ExperimentConfig":
        self.environment.validate()
        self.model.validate()
        self.training.validate()
        self.evaluation.validate()
        self.io.validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


_BLOCKS = {
    "environment": EnvironmentConfig,
    "model": ModelConfig,
    "training": TrainingConfig,
    "evaluation": EvaluationConfig,
    "io": IOConfig,
}


def _build_block(name: str, cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(name, "must be a mapping")
    known = {f for f in cls.__dataclass_fields__}
    for key in data:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    for key in data:
        if key not in _BLOCKS:
            raise ConfigError(key, "unknown block")
    blocks = {}
    for name, cls in _BLOCKS.items():
        blocks[name] = _build_block(name, cls, data.get(name, {}))
    cfg = ExperimentConfig(**blocks)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(cfg.dumps())
