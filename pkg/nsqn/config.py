"""
Experiment configuration: a line-oriented `key = value` format with `#` comments
and dotted namespaces (train.*, hp.*, task.*, adam.*, adagrad.*, nag.*, dense.*).

Omitted keys take their documented defaults; some of them (batch size, epochs,
network width, sequence length, sample count) depend on the chosen task.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from nsqn.asnaq import Hyperparams
from nsqn.first_order import AdagradHyper, AdamHyper, NagHyper

logger = logging.getLogger(__name__)

TaskName = Literal["counting", "mnist-row", "mnist-pixel"]
OptimizerName = Literal["asnaq", "adaqn", "adam", "adagrad", "nag", "naq", "bfgs"]

OPTIMIZERS: tuple[str, ...] = ("asnaq", "adaqn", "adam", "adagrad", "nag", "naq", "bfgs")

TASK_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "counting": {
        "train": {"b": 50, "epochs": 75},
        "task": {"n_hidden": 24, "T": 20, "n_samples": 10000},
    },
    "mnist-row": {
        "train": {"b": 128, "epochs": 10},
        "task": {"n_hidden": 100, "n_samples": 5000},
    },
    "mnist-pixel": {
        "train": {"b": 128, "epochs": 10},
        "task": {"n_hidden": 100, "downsample": 14, "n_samples": 2000},
    },
}

_NONE_WORDS = ("none", "null")


class ConfigError(ValueError):
    """Raised for malformed lines and unknown keys."""
    pass


class ConfigValidationError(ConfigError):
    """Raised when a value is outside the range its destination accepts."""
    pass


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    b: int = Field(50, ge=1)
    epochs: int = Field(75, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    log_every: int = Field(0, ge=0)  # 0 = epoch rows only


class TaskConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_hidden: int = Field(24, ge=1)
    T: int | None = Field(None, ge=1)  # counting only; MNIST lengths follow from the images
    downsample: int | None = Field(None, ge=1)
    n_samples: int = Field(10000, ge=1)
    images: str | None = None
    labels: str | None = None


class DenseConfig(BaseModel):
    """Full-batch NAQ/BFGS settings; H starts as the identity."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu: float = Field(0.8, ge=0, lt=1)
    alpha: float = Field(0.1, gt=0)
    steps_per_epoch: int = Field(10, ge=1)
    max_params: int = Field(5000, ge=1)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    task: TaskName = "counting"
    optimizer: OptimizerName = "asnaq"
    out: str | None = None
    train: TrainConfig = TrainConfig()
    hp: Hyperparams = Hyperparams()
    task_opts: TaskConfig = TaskConfig()
    adam: AdamHyper = AdamHyper()
    adagrad: AdagradHyper = AdagradHyper()
    nag: NagHyper = NagHyper()
    dense: DenseConfig = DenseConfig()

    @model_validator(mode="after")
    def _task_consistency(self):
        if self.task == "counting" and self.task_opts.T is None:
            raise ValueError("counting task needs task.T")
        if self.train.b > self.task_opts.n_samples:
            raise ValueError(f"train.b ({self.train.b}) exceeds task.n_samples ({self.task_opts.n_samples})")
        return self

    @property
    def metric(self) -> str:
        return "mse" if self.task == "counting" else "accuracy"

    def output_path(self) -> str:
        return self.out or f"runs/{self.task}_{self.optimizer}_s{self.train.seed}.csv"


# config namespace -> ExperimentConfig field
_SECTIONS = {
    "train": "train",
    "hp": "hp",
    "task": "task_opts",
    "adam": "adam",
    "adagrad": "adagrad",
    "nag": "nag",
    "dense": "dense",
}
_SECTION_MODELS: dict[str, type[BaseModel]] = {
    ns: ExperimentConfig.model_fields[attr].annotation for ns, attr in _SECTIONS.items()
}
_TOP_LEVEL = ("task", "optimizer", "out")


def _parse_value(raw: str) -> str | None:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    if value.lower() in _NONE_WORDS:
        return None
    return value


def _split_line(line: str, where: str) -> tuple[str, str | None] | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
    key, value = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"{where}: missing key")
    return key, _parse_value(value)


@dataclass
class _RawConfig:
    """Unvalidated values, top-level scalars kept apart from dotted sections (`task` is both)."""

    top: dict[str, str | None] = field(default_factory=dict)
    sections: dict[str, dict[str, str | None]] = field(default_factory=dict)


def _place(raw: _RawConfig, key: str, value: str | None, where: str) -> None:
    if key in _TOP_LEVEL:
        raw.top[key] = value
        return
    ns, _, name = key.partition(".")
    model = _SECTION_MODELS.get(ns)
    if model is None or not name or name not in model.model_fields:
        raise ConfigError(f"{where}: unknown key {key!r}")
    raw.sections.setdefault(ns, {})[name] = value


def _build(raw: _RawConfig) -> ExperimentConfig:
    task = raw.top.get("task") or "counting"
    defaults = TASK_DEFAULTS.get(task, {})
    data: dict[str, Any] = {k: v for k, v in raw.top.items() if v is not None}
    for ns, attr in _SECTIONS.items():
        section = dict(defaults.get(ns, {}))
        section.update(raw.sections.get(ns, {}))
        if section:
            data[attr] = section
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']).replace('task_opts', 'task')}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigValidationError(f"invalid config: {problems}") from e


def parse_config(text: str, overrides: list[str] | tuple[str, ...] = ()) -> ExperimentConfig:
    """
    Parse config text, then apply `key=value` overrides on top.
    A key may appear at most once in the text; overrides replace freely.
    """
    raw = _RawConfig()
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        parsed = _split_line(line, f"line {lineno}")
        if parsed is None:
            continue
        key, value = parsed
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        _place(raw, key, value, f"line {lineno}")
    for item in overrides:
        parsed = _split_line(item, f"override {item!r}")
        if parsed is None:
            raise ConfigError(f"empty override {item!r}")
        _place(raw, *parsed, f"override {item!r}")
    return _build(raw)


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Effective config in parse_config's format, every key written out."""
    lines = [f"{key} = {_format_value(getattr(cfg, key))}" for key in _TOP_LEVEL]
    for ns, attr in _SECTIONS.items():
        section: BaseModel = getattr(cfg, attr)
        lines.append("")
        for name in type(section).model_fields:
            lines.append(f"{ns}.{name} = {_format_value(getattr(section, name))}")
    return "\n".join(lines) + "\n"
