"""Run configuration, per-task defaults and the key=value config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..envs import ENV_IDS, TASK_TABLE
from ..models import MODEL_IDS


class ConfigError(ValueError):
    pass


DEFAULT_SEEDS = (0, 1, 2, 3, 4)

# (deterministic NN, deterministic ensemble, concrete dropout, anchored ensemble)
_HIDDEN = {
    "pendulum": ((32,) * 2, (32,) * 2, (100,) * 2, (40,) * 2),
    "inverted-pendulum": ((40,) * 2, (40,) * 2, (100,) * 2, (40,) * 2),
    "inverted-double-pendulum": ((100,) * 2, (100,) * 2, (200,) * 2, (100,) * 2),
    "reacher": ((200,) * 2, (200,) * 2, (500,) * 2, (200,) * 2),
    "halfcheetah": ((250,) * 3, (250,) * 3, (1024,) * 3, (500,) * 2),
    "hopper": ((250,) * 3, (250,) * 3, (1024,) * 3, (500,) * 2),
}
_NN_MODELS = ("deterministic-nn", "deterministic-ensemble", "concrete-dropout", "anchored-ensemble")
HIDDEN_SIZES = {(env, m): sizes[i] for env, sizes in _HIDDEN.items() for i, m in enumerate(_NN_MODELS)}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a benchmark run.

    ``None`` for episodes, horizon or hidden sizes selects the per-task default.
    """

    env: str
    model: str
    seeds: tuple = DEFAULT_SEEDS
    episodes: int | None = None
    horizon: int | None = None
    epsilon: float = 0.1
    num_trajectories: int = 500
    planning_horizon: int = 20
    chunk_size: int | None = 100
    workers: int = 1
    num_candidate_actions: int = 100
    buffer_capacity: int = 2000
    hidden_sizes: tuple | None = None
    epochs: int = 60
    lr: float = 1e-3
    batch_size: int = 64
    ensemble_size: int = 5
    mc_samples: int = 20
    data_noise: float = 0.01
    gp_max_points: int = 1000
    gp_hyper_points: int = 300
    out: str = "results"
    record_wall_time: bool = True

    def __post_init__(self):
        if self.env not in ENV_IDS:
            raise ConfigError(f"unknown env {self.env!r}; choose from {', '.join(ENV_IDS)}")
        if self.model not in MODEL_IDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_IDS)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        positive = ["num_trajectories", "planning_horizon", "workers", "num_candidate_actions", "buffer_capacity",
                    "batch_size", "ensemble_size", "mc_samples", "gp_max_points", "gp_hyper_points"]
        for name in positive + ["episodes", "horizon", "chunk_size"]:
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")
        if self.epochs < 0 or self.lr <= 0 or self.data_noise <= 0:
            raise ConfigError("epochs must be >= 0 and lr, data_noise > 0")
        if self.hidden_sizes is not None and any(h < 1 for h in self.hidden_sizes):
            raise ConfigError("hidden sizes must be positive")

    @property
    def task(self):
        return TASK_TABLE[self.env]

    @property
    def num_episodes(self) -> int:
        return self.episodes if self.episodes is not None else self.task[3]

    @property
    def episode_length(self) -> int:
        return self.horizon if self.horizon is not None else self.task[2]

    @property
    def layers(self) -> tuple:
        if self.hidden_sizes is not None:
            return tuple(self.hidden_sizes)
        return HIDDEN_SIZES.get((self.env, self.model), ())

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


def _convert(name, raw: str):
    f = {f.name: f for f in dataclasses.fields(RunConfig)}[name]
    kind = str(f.type)
    try:
        if raw.lower() in ("none", "default") and "None" in kind:
            return None
        if name in ("seeds", "hidden_sizes"):
            return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        if kind.startswith("bool"):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``num_seeds = k`` is shorthand for ``seeds = 0,...,k-1``.
    """
    known = {f.name for f in dataclasses.fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "num_seeds":
            try:
                out["seeds"] = tuple(range(int(raw)))
            except ValueError:
                raise ConfigError(f"line {lineno}: bad num_seeds {raw!r}") from None
            continue
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, raw)
    return out


def load_config(path=None, **overrides) -> RunConfig:
    """Build a RunConfig from an optional file; non-None overrides win."""
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    missing = [k for k in ("env", "model") if k not in values]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join(missing)}")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: RunConfig) -> str:
    """Render every setting as ``key = value``; :func:`parse_config_text` reads it back."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
