"""Run configuration: a flat, commented ``key = value`` document with typed parsing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

# keys that do not influence results and are left out of the config hash
_UNHASHED = {"workers"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # training
    method: str = "dragon"
    m: int = 10
    epochs: int = 10
    seed: int = 0
    init_seed: int = 0
    # data
    dataset: str = "synthetic"
    mnist_images: str = ""
    mnist_labels: str = ""
    train_per_class: int = 20
    test_per_class: int = 5
    data_seed: int = 0
    synthetic_side: int = 8
    synthetic_flip_prob: float = 0.1
    evaluate_test: bool = True
    # network
    n_hidden: int = 32
    n_classes: int = 10
    redundancy: int = 4
    nudge_strength: float = 1.0
    nudge_mode: str = "analytic"
    # learning rates
    delta_W: float = 0.01
    delta_J: float = 0.01
    delta_h: float = 0.002
    delta_o: float = 0.002
    batch_size: int = 1
    fallback_threshold: float = 0.8
    train_error_source: str = "batch"
    # sampler
    sweeps: int = 20
    beta_min: float = 0.1
    beta_max: float = 10.0
    beta_steps: int = 50
    restarts: int = 1
    cycle_depth: float = 0.3
    n_cycles: int = 5
    workers: int = 1
    # backprop baseline
    bp_learning_rate: float = 0.1
    bp_batch_size: int = 16
    # output
    record_wall_time: bool = False

    def __post_init__(self):
        if self.method not in ("eqprop", "dragon", "backprop"):
            raise ConfigError(f"method must be eqprop, dragon or backprop, not {self.method!r}")
        if self.dataset not in ("synthetic", "mnist"):
            raise ConfigError(f"dataset must be synthetic or mnist, not {self.dataset!r}")
        if self.nudge_mode not in ("analytic", "sampled"):
            raise ConfigError("nudge_mode must be analytic or sampled")
        if self.train_error_source not in ("batch", "inference"):
            raise ConfigError("train_error_source must be batch or inference")
        for name in ("m", "epochs", "train_per_class", "test_per_class", "n_hidden",
                     "n_classes", "redundancy", "sweeps", "beta_steps", "restarts",
                     "n_cycles", "workers", "batch_size", "bp_batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        canon = "\n".join(ln for ln in self.dumps().splitlines()
                          if ln.split(" = ")[0] not in _UNHASHED)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _convert(name, typ, raw: str):
    try:
        if typ in ("bool", bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {typ}") from None


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, types[key], raw)
    for key, v in overrides.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r}")
        if v is not None:
            values[key] = v
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    return parse_config(Path(path).read_text(), **overrides)
