"""Pipeline configuration: one JSON file, overridable per flag.

Every number that influences an artifact lives here so that identical
config + inputs always reproduce identical outputs. Credentials are never
part of the file; HTTP clients read them from the environment variable
named by ``api_key_env``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .models import ALGORITHMS, ModelSpec
from .trajectory import MODES, WITH_ARGS

CLIENT_TYPES = ("demo", "mock", "http")

DEFAULT_TEMPERATURES = {
    "investigator": 0.7,
    "assistant": 0.0,
    "reverse_engineer": 0.0,
    "judge": 0.0,
}


@dataclass
class ClientConfig:
    type: str = "demo"
    script: str | None = None
    record_script: str | None = None
    transcript_log: str | None = None
    endpoint: str | None = None
    models: dict = field(default_factory=dict)
    api_key_env: str = "TRAJCHECK_API_KEY"
    retry_cap: int = 2
    concurrency: int = 4
    demo_seed: int = 0


@dataclass
class PipelineConfig:
    seed: int = 1
    client: ClientConfig = field(default_factory=ClientConfig)
    temperatures: dict = field(default_factory=lambda: dict(DEFAULT_TEMPERATURES))

    questions_per_pair: int = 10
    mct_runs: int = 5
    step_cap: int = 10
    retry_cap: int = 2
    n_alternates: int = 3
    min_alternates: int | None = None

    feature_mode: str = WITH_ARGS
    aggregation: str = "mean"
    ged_cap: int = 15
    ao_alignment: str = "prefix"
    embedding_provider: str = "hashing"
    embedding_dim: int = 256
    embedding_endpoint: str | None = None
    embedding_model: str | None = None

    eps: float = 0.5
    min_pts: int = 3
    per_cluster: int = 5
    target_dim: int = 2

    classifiers: list[dict] | None = None
    folds: int = 10
    cv_seeds: tuple[int, ...] = (1, 2, 3)
    ablation_folds: int = 5

    judge_system_prompt_on: bool = True
    judge_label_order: str = "zero_first"

    seed_dataset: str | None = None
    annotations: str | None = None
    drop_list: str | None = None
    exemplars: str | None = None
    workdir: str = "out"

    def validate(self) -> "PipelineConfig":
        counts = {
            "questions_per_pair": self.questions_per_pair,
            "mct_runs": self.mct_runs,
            "step_cap": self.step_cap,
            "n_alternates": self.n_alternates,
            "min_pts": self.min_pts,
            "per_cluster": self.per_cluster,
            "embedding_dim": self.embedding_dim,
            "ged_cap": self.ged_cap,
            "client.concurrency": self.client.concurrency,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.retry_cap < 0 or self.client.retry_cap < 0:
            raise ConfigError("retry caps must be >= 0")
        if self.folds < 2 or self.ablation_folds < 2:
            raise ConfigError("fold counts must be >= 2")
        if not self.cv_seeds:
            raise ConfigError("cv_seeds must not be empty")
        if self.feature_mode not in MODES:
            raise ConfigError(f"feature_mode must be one of {MODES}")
        if self.aggregation not in ("mean", "concat"):
            raise ConfigError("aggregation must be 'mean' or 'concat'")
        if self.ao_alignment not in ("prefix", "bag"):
            raise ConfigError("ao_alignment must be 'prefix' or 'bag'")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.client.type not in CLIENT_TYPES:
            raise ConfigError(f"client.type must be one of {CLIENT_TYPES}")
        if self.client.type == "mock" and not self.client.script:
            raise ConfigError("client.type 'mock' requires client.script")
        if self.client.type == "http" and not self.client.endpoint:
            raise ConfigError("client.type 'http' requires client.endpoint")
        if self.judge_label_order not in ("zero_first", "one_first"):
            raise ConfigError("judge_label_order must be 'zero_first' or 'one_first'")
        if self.embedding_provider not in ("hashing", "http"):
            raise ConfigError("embedding_provider must be 'hashing' or 'http'")
        if self.embedding_provider == "http" and not (
            self.embedding_endpoint and self.embedding_model
        ):
            raise ConfigError(
                "embedding_provider 'http' requires embedding_endpoint and embedding_model"
            )
        if self.min_alternates is not None and not (
            1 <= self.min_alternates <= self.n_alternates
        ):
            raise ConfigError("min_alternates must be between 1 and n_alternates")
        for spec in self.classifier_specs():
            if spec.algorithm not in ALGORITHMS:  # pragma: no cover - ModelSpec raises first
                raise ConfigError(f"unknown classifier algorithm {spec.algorithm!r}")
        for name in ("seed_dataset", "annotations", "drop_list", "exemplars"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"paths.{name} does not exist: {value}")
        if self.client.script is not None and not Path(self.client.script).exists():
            raise ConfigError(f"client.script does not exist: {self.client.script}")
        return self

    def classifier_specs(self) -> list[ModelSpec]:
        """The configured classifier specs, or the five documented defaults
        with the k-NN k matched to the feature mode."""
        if self.classifiers is None:
            return default_classifier_specs(self.feature_mode)
        return [
            ModelSpec(
                algorithm=entry["algorithm"],
                hyperparameters=entry.get("hyperparameters", {}),
                seed=entry.get("seed", 0),
                name=entry.get("name"),
            )
            for entry in self.classifiers
        ]


def default_classifier_specs(feature_mode: str = WITH_ARGS) -> list[ModelSpec]:
    """knn (k=4 with arguments, k=5 without) plus the four other models at
    their documented defaults."""
    k = 4 if feature_mode == WITH_ARGS else 5
    return [
        ModelSpec("knn", {"k": k}),
        ModelSpec("logistic_regression"),
        ModelSpec("gaussian_nb"),
        ModelSpec("decision_tree"),
        ModelSpec("random_forest"),
    ]


_SECTION_KEYS = {
    "generation": ("questions_per_pair", "mct_runs", "step_cap", "retry_cap"),
    "verification": ("n_alternates", "min_alternates"),
    "features": (
        "feature_mode",
        "aggregation",
        "ged_cap",
        "ao_alignment",
        "embedding_provider",
        "embedding_dim",
        "embedding_endpoint",
        "embedding_model",
    ),
    "filtering": ("eps", "min_pts", "per_cluster", "target_dim"),
    "evaluation": ("folds", "seeds", "ablation_folds"),
    "judge": ("system_prompt_on", "label_order"),
    "paths": ("seed_dataset", "annotations", "drop_list", "exemplars", "workdir"),
}

# section-local spellings -> flat config fields
_RENAMED = {
    "seeds": "cv_seeds",
    "system_prompt_on": "judge_system_prompt_on",
    "label_order": "judge_label_order",
}

_PATH_FIELDS = ("seed_dataset", "annotations", "drop_list", "exemplars", "workdir")


def config_from_dict(obj: dict, base_dir: Path | None = None) -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    cfg = PipelineConfig()
    known_flat = {f.name for f in fields(PipelineConfig)} - {"client", "temperatures"}
    seen = set()

    def assign(name: str, value):
        name = _RENAMED.get(name, name)
        if name == "cv_seeds":
            value = tuple(int(s) for s in value)
        setattr(cfg, name, value)
        seen.add(name)

    for key, value in obj.items():
        if key == "client":
            if not isinstance(value, dict):
                raise ConfigError("client section must be an object")
            unknown = set(value) - {f.name for f in fields(ClientConfig)}
            if unknown:
                raise ConfigError(f"unknown client settings: {sorted(unknown)}")
            cfg.client = ClientConfig(**value)
        elif key == "temperatures":
            unknown = set(value) - set(DEFAULT_TEMPERATURES)
            if unknown:
                raise ConfigError(f"unknown temperature roles: {sorted(unknown)}")
            cfg.temperatures = {**DEFAULT_TEMPERATURES, **value}
        elif key in _SECTION_KEYS:
            unknown = set(value) - set(_SECTION_KEYS[key])
            if unknown:
                raise ConfigError(f"unknown settings in {key!r}: {sorted(unknown)}")
            for inner, inner_value in value.items():
                assign(inner, inner_value)
        elif key in known_flat:
            assign(key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    if base_dir is not None:
        for name in _PATH_FIELDS:
            value = getattr(cfg, name)
            if value is not None and not Path(value).is_absolute():
                setattr(cfg, name, str(base_dir / value))
        for name in ("script", "record_script", "transcript_log"):
            value = getattr(cfg.client, name)
            if value is not None and not Path(value).is_absolute():
                setattr(cfg.client, name, str(base_dir / value))
    return cfg.validate()


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid config JSON in {path}: {exc}") from None
    return config_from_dict(obj, base_dir=path.parent)
