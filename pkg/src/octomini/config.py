"""Run configuration: flags > environment (OCTOMINI_*) > config file > defaults."""

import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError

ENV_PREFIX = "OCTOMINI_"
PROFILE_CHOICES = ("tree", "graph", "trace", "counters")


@dataclass
class RunConfig:
    problem: str = "sedov"
    hydro: str = "new"
    subgrid: int = 8
    level: int = 3
    theta: float = 0.5
    steps: int = 0
    end_time: float = 0.0
    workers: int = 2
    lanes: int = 128
    cfl: float = 0.4
    boundary: str = ""  # empty: problem default (sedov reflecting, star outflow)
    profile: tuple = ()
    out: str = "out"
    checkpoint: str = ""
    resume: str = ""
    seed: int = 0
    latency_us: float = 0.0
    kernel_time_us: float = 0.0  # artificial per-kernel busy time
    contact: bool = False
    star_q: float = 0.75
    memory_budget: int = 0

    def validate(self):
        if self.problem not in ("sedov", "star"):
            raise ConfigError("problem", f"must be sedov or star, got {self.problem!r}")
        if self.hydro not in ("old", "new"):
            raise ConfigError("hydro", f"must be old or new, got {self.hydro!r}")
        if self.subgrid not in (8, 16, 32):
            raise ConfigError("subgrid", f"must be one of 8, 16, 32, got {self.subgrid}")
        if self.level < 0 or self.level > 8:
            raise ConfigError("level", f"must lie in [0, 8], got {self.level}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta", f"must lie in [0, 1], got {self.theta}")
        if self.steps < 0:
            raise ConfigError("steps", "must be nonnegative")
        if self.end_time < 0.0:
            raise ConfigError("end_time", "must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers", "need at least one worker")
        if self.lanes < 1:
            raise ConfigError("lanes", "need at least one lane")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl", f"must lie in (0, 1], got {self.cfl}")
        if self.boundary not in ("", "periodic", "reflecting", "outflow"):
            raise ConfigError("boundary", f"unknown boundary {self.boundary!r}")
        for p in self.profile:
            if p not in PROFILE_CHOICES:
                raise ConfigError("profile", f"unknown artifact {p!r}")
        if not 0.0 < self.star_q <= 1.0:
            raise ConfigError("star_q", "axis ratio must lie in (0, 1]")
        return self

    @property
    def boundary_or_default(self):
        if self.boundary:
            return self.boundary
        return "reflecting" if self.problem == "sedov" else "outflow"


_COERCE = {
    int: int,
    float: float,
    str: str,
    bool: lambda v: str(v).lower() in ("1", "true", "yes", "on"),
    tuple: lambda v: tuple(x for x in str(v).split(",") if x),
}


_FIELD_TYPES = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}


def _set_field(cfg, name, raw):
    name = name.strip().replace("-", "_")
    caster = _COERCE.get(_FIELD_TYPES.get(name))
    if caster is None:
        raise ConfigError(name, "unknown configuration key")
    try:
        setattr(cfg, name, caster(raw))
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"bad value {raw!r}: {exc}") from exc


def read_config_file(path, cfg):
    """Line-oriented `key = value` file; unknown keys are errors."""
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("config", f"{path}:{lineno}: expected key = value")
        key, _, value = body.partition("=")
        _set_field(cfg, key, value.strip())
    return cfg


def apply_env(cfg, environ=None):
    env = environ if environ is not None else os.environ
    for f in fields(RunConfig):
        key = ENV_PREFIX + f.name.upper()
        if key in env:
            _set_field(cfg, f.name, env[key])
    return cfg
