"""Flat key=value experiment configuration.

One config file describes an entire run: method hyperparameters, model
architecture, task split, and data source.  Unknown keys are hard errors
because a silently ignored typo corrupts a whole sweep.  The normalized
key->value echo stored in results is itself a valid config, so any run
can be reproduced from its result file.
"""

from dataclasses import dataclass, field

from .data import (
    AugmentorSpec,
    Dataset,
    TaskStream,
    gen_synthetic,
    load_dataset,
    split_blobs,
    split_tasks,
)
from .errors import ConfigError
from .model import ModelConfig
from .rngs import AUGMENT, child_rng
from .training import MethodConfig

_INT_KEYS = {
    "stream_batch",
    "mem_batch",
    "mem_size",
    "offline_epochs",
    "seed",
    "n_tasks",
    "classes_per_task",
    "embed_dim",
    "proj_hidden",
    "proj_dim",
    "classes",
    "dim",
    "per_class_train",
    "per_class_test",
}
_FLOAT_KEYS = {"lr", "tau", "separation", "aug_sigma"}
_STR_KEYS = {"method", "proj_kind", "data", "train_file", "test_file"}
_LIST_KEYS = {"encoder_hidden"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS

_MODEL_KEYS = ("encoder_hidden", "embed_dim", "proj_hidden", "proj_dim", "proj_kind")
_SYNTH_KEYS = ("classes", "dim", "per_class_train", "per_class_test", "separation")

DATA_KINDS = ("split-blobs", "synthetic", "files")


def parse_config(text: str) -> dict:
    """Parse `key = value` lines into a typed mapping.

    Blank lines and lines starting with # are skipped; duplicate or
    unknown keys fail hard.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        value = value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _LIST_KEYS:
                out[key] = [int(v) for v in value.split(",") if v.strip()]
            else:
                out[key] = value
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from None
    return out


@dataclass
class ExperimentConfig:
    """Normalized description of one run, defaults applied."""

    method: MethodConfig
    n_tasks: int = 5
    classes_per_task: int = 2
    model: dict = field(default_factory=dict)
    data: dict = field(default_factory=lambda: {"data": "split-blobs"})
    aug_sigma: float = 0.05

    @classmethod
    def from_mapping(cls, raw: dict, seed_override: int = None) -> "ExperimentConfig":
        raw = dict(raw)
        unknown = set(raw) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        if "method" not in raw:
            raise ConfigError("config must set 'method'")
        seed = seed_override if seed_override is not None else raw.get("seed", 0)
        method = MethodConfig(
            method=raw["method"],
            lr=raw.get("lr", 0.1),
            stream_batch=raw.get("stream_batch", 10),
            mem_batch=raw.get("mem_batch", 100),
            mem_size=raw.get("mem_size", 100),
            tau=raw.get("tau", 0.1),
            offline_epochs=raw.get("offline_epochs", 50),
            seed=int(seed),
        )
        model = {k: raw[k] for k in _MODEL_KEYS if k in raw}
        if "encoder_hidden" in model:
            model["encoder_hidden"] = tuple(model["encoder_hidden"])
        kind = raw.get("data", "split-blobs")
        if kind not in DATA_KINDS:
            raise ConfigError(f"data must be one of {DATA_KINDS}, got {kind!r}")
        data = {"data": kind}
        if kind == "files":
            for k in ("train_file", "test_file"):
                if k not in raw:
                    raise ConfigError(f"data=files requires {k!r}")
                data[k] = raw[k]
            stray = [k for k in _SYNTH_KEYS if k in raw]
            if stray:
                raise ConfigError(f"keys {stray} do not apply to data=files")
        else:
            stray = [k for k in ("train_file", "test_file") if k in raw]
            if stray:
                raise ConfigError(f"keys {stray} only apply to data=files")
            if kind == "synthetic":
                data["classes"] = raw.get("classes", 10)
                data["dim"] = raw.get("dim", 32)
                data["per_class_train"] = raw.get("per_class_train", 500)
                data["per_class_test"] = raw.get("per_class_test", 100)
                data["separation"] = raw.get("separation", 5.0)
            else:
                stray = [k for k in _SYNTH_KEYS if k in raw]
                if stray:
                    raise ConfigError(f"keys {stray} require data=synthetic")
        return cls(
            method=method,
            n_tasks=raw.get("n_tasks", 5),
            classes_per_task=raw.get("classes_per_task", 2),
            model=model,
            data=data,
            aug_sigma=raw.get("aug_sigma", 0.05),
        )

    def echo(self, input_dim: int = None) -> dict:
        """Flat normalized mapping that reproduces this config exactly."""
        m = self.method
        out = {
            "method": m.method,
            "lr": m.lr,
            "stream_batch": m.stream_batch,
            "mem_batch": m.mem_batch,
            "mem_size": m.mem_size,
            "tau": m.tau,
            "offline_epochs": m.offline_epochs,
            "seed": m.seed,
            "n_tasks": self.n_tasks,
            "classes_per_task": self.classes_per_task,
            "aug_sigma": self.aug_sigma,
        }
        for k in _MODEL_KEYS:
            if k in self.model:
                v = self.model[k]
                out[k] = list(v) if k == "encoder_hidden" else v
        out.update(self.data)
        if input_dim is not None:
            out["input_dim"] = input_dim
        return out


def load_config(path, seed_override: int = None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return ExperimentConfig.from_mapping(parse_config(text), seed_override=seed_override)


def echo_to_config_text(echo: dict) -> str:
    """Render a result's config echo back into a loadable config file."""
    lines = []
    for k, v in echo.items():
        if k not in KNOWN_KEYS:
            continue
        if k == "encoder_hidden":
            lines.append(f"{k} = " + ",".join(str(h) for h in v))
        elif isinstance(v, float):
            lines.append(f"{k} = {v!r}")
        else:
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


@dataclass
class RunSetup:
    """Everything run_experiment needs, materialized from an ExperimentConfig."""

    method: MethodConfig
    train: Dataset
    test: Dataset
    stream: TaskStream
    model_config: ModelConfig
    augmentor: AugmentorSpec
    echo: dict


def materialize(ec: ExperimentConfig) -> RunSetup:
    """Load or generate the data, build the stream, model config, and augmentor."""
    seed = ec.method.seed
    kind = ec.data["data"]
    if kind == "split-blobs":
        train, test = split_blobs(seed)
    elif kind == "synthetic":
        train, test = gen_synthetic(
            classes=ec.data["classes"],
            dim=ec.data["dim"],
            per_class_train=ec.data["per_class_train"],
            per_class_test=ec.data["per_class_test"],
            separation=ec.data["separation"],
            seed=seed,
        )
    else:
        train = load_dataset(ec.data["train_file"], split="train")
        test = load_dataset(ec.data["test_file"], split="test")
        if train.flat_dim != test.flat_dim or train.class_count != test.class_count:
            raise ConfigError("train/test files disagree on width or class count")
    stream = split_tasks(
        train, ec.n_tasks, ec.classes_per_task, seed, stream_batch=ec.method.stream_batch
    )
    model_config = ModelConfig(input_dim=train.flat_dim, **ec.model)
    augmentor = AugmentorSpec(
        mode="vector_noise", rng=child_rng(seed, AUGMENT), sigma=ec.aug_sigma
    )
    return RunSetup(
        method=ec.method,
        train=train,
        test=test,
        stream=stream,
        model_config=model_config,
        augmentor=augmentor,
        echo=ec.echo(input_dim=train.flat_dim),
    )
