"""Run configuration: one serializable object shared by every stage.

The config hash is stamped into every stage artifact. Per-stage hashes only
cover the fields a stage actually reads, so changing e.g. the smoothing decay
does not invalidate cached captions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .artifacts import canonical_json, load_json, sha256_text

TASKS = ("middle", "irreg", "jigsaw", "social")
ENCODER_VARIANTS = ("conv_cvt", "hierarchical_former")
CAPTION_TOKEN_PRESETS = (100, 150, 200, 300)


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass
class ClientConfig:
    """How to reach one external model client.

    mode "mock" plays back a JSONL script (or, for the LLM, applies a keyword
    rulebook); mode "http" posts to `endpoint`. Endpoints left empty fall back
    to the conventional environment variables at client construction time.
    """

    mode: str = "mock"
    endpoint: str = ""
    model: str = ""
    script_path: str = ""


@dataclass
class RunConfig:
    # dataset layout
    data_dir: str = "data"
    run_dir: str = "runs/default"
    train_videos: list[str] = field(default_factory=list)
    test_videos: list[str] = field(default_factory=list)
    fps: float = 30.0

    # ingest
    stride: int = 10
    half_window_t: int = 3
    detector_min_confidence: float = 0.3
    resize_interpolation: str = "bilinear"

    # model
    encoder_variant: str = "conv_cvt"
    encoder_channels: list[int] = field(default_factory=lambda: [32, 64, 128])
    encoder_depths: list[int] = field(default_factory=lambda: [1, 1, 2])
    memory_slots: int = 100
    memory_enabled: bool = True
    task_subset: list[str] = field(default_factory=lambda: list(TASKS))
    neighbor_radius: float = 0.25
    neighbor_cap: int = 8

    # training
    gradnorm_alpha: float = 1.5
    gradnorm_lr: float = 0.025
    base_lr: float = 1e-3
    lr_decay: float = 0.1
    lr_decay_every: int = 10
    batch_size: int = 32
    phase_epochs: list[int] = field(default_factory=lambda: [5, 5, 20])
    weight_decay: float = 1e-4

    # proposal
    threshold: float = 0.3
    score_level: str = "object"  # "object" (max over objects) or "frame"

    # semantic stage
    caption_max_tokens: int = 200
    caption_precision: str = "float32"
    chunk_m: int = 3
    chunk_o: int = 1
    pooling: str = "mean"  # or "max"
    refine_mode: str = "local"  # or "global"
    refine_window: int = 10
    rule_sample_count: int = 20
    embed_dim: int = 64

    # smoothing / evaluation
    ems_vote_window: int = 5
    ems_decay: float = 0.9
    eval_threshold: float = 0.5
    memory_propagation: int = 0  # >0 propagates anomaly flags forward k frames

    # clients and execution
    detector: ClientConfig = field(default_factory=ClientConfig)
    captioner: ClientConfig = field(default_factory=ClientConfig)
    llm: ClientConfig = field(default_factory=ClientConfig)
    embedder: ClientConfig = field(default_factory=ClientConfig)
    parallelism: int = 4
    retries: int = 3
    backoff_s: float = 0.05

    seed: int = 0

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.half_window_t < 1:
            raise ConfigError("half_window_t must be >= 1")
        if self.encoder_variant not in ENCODER_VARIANTS:
            raise ConfigError(f"unknown encoder variant: {self.encoder_variant!r}")
        if not (1 <= self.chunk_o < self.chunk_m):
            raise ConfigError("chunk overlap must satisfy 1 <= o < m")
        if self.pooling not in ("mean", "max"):
            raise ConfigError(f"unknown pooling mode: {self.pooling!r}")
        if self.refine_mode not in ("local", "global"):
            raise ConfigError(f"unknown refine mode: {self.refine_mode!r}")
        if self.ems_vote_window % 2 == 0:
            raise ConfigError("ems_vote_window must be odd")
        if not 0.0 < self.ems_decay < 1.0:
            raise ConfigError("ems_decay must lie in (0, 1)")
        unknown = set(self.task_subset) - set(TASKS)
        if unknown:
            raise ConfigError(f"unknown tasks: {sorted(unknown)}")
        if not self.task_subset:
            raise ConfigError("task_subset must not be empty")
        if self.score_level not in ("object", "frame"):
            raise ConfigError(f"unknown score level: {self.score_level!r}")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        data = dict(data)
        for key in ("detector", "captioner", "llm", "embedder"):
            if key in data and isinstance(data[key], dict):
                data[key] = ClientConfig(**data[key])
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(load_json(path))

    def config_hash(self) -> str:
        return sha256_text(canonical_json(self.to_dict()))[:16]

    def stage_hash(self, stage: str) -> str:
        """Hash over only the fields relevant to `stage`."""
        keys = STAGE_CONFIG_KEYS.get(stage)
        if keys is None:
            return self.config_hash()
        data = self.to_dict()
        subset = {k: data[k] for k in sorted(keys)}
        return sha256_text(canonical_json(subset))[:16]

    def replaced(self, **changes: Any) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data)


_DATA_KEYS = {"data_dir", "train_videos", "test_videos", "fps", "seed"}
_INGEST_KEYS = _DATA_KEYS | {
    "stride",
    "half_window_t",
    "detector_min_confidence",
    "resize_interpolation",
    "detector",
    "parallelism",
    "retries",
}
_MODEL_KEYS = {
    "encoder_variant",
    "encoder_channels",
    "encoder_depths",
    "memory_slots",
    "memory_enabled",
    "task_subset",
    "neighbor_radius",
    "neighbor_cap",
    "half_window_t",
}
_TRAIN_KEYS = _INGEST_KEYS | _MODEL_KEYS | {
    "gradnorm_alpha",
    "gradnorm_lr",
    "base_lr",
    "lr_decay",
    "lr_decay_every",
    "batch_size",
    "phase_epochs",
    "weight_decay",
}
_SCORE_KEYS = _TRAIN_KEYS
_PROPOSE_KEYS = _SCORE_KEYS | {"threshold", "score_level"}
_CAPTION_KEYS = _DATA_KEYS | {
    "stride",
    "caption_max_tokens",
    "caption_precision",
    "rule_sample_count",
    "captioner",
    "parallelism",
    "retries",
}
_REFINE_KEYS = _CAPTION_KEYS | {
    "chunk_m",
    "chunk_o",
    "pooling",
    "refine_mode",
    "refine_window",
    "embed_dim",
    "embedder",
}
_RULES_KEYS = _CAPTION_KEYS | {"llm", "rule_sample_count"}
_VERIFY_KEYS = _REFINE_KEYS | _RULES_KEYS | {"llm"}
_SMOOTH_KEYS = {"ems_vote_window", "ems_decay", "memory_propagation", "stride", "seed"}
_EVAL_KEYS = _SMOOTH_KEYS | _DATA_KEYS | {"eval_threshold"}

STAGE_CONFIG_KEYS: dict[str, set[str]] = {
    "ingest": _INGEST_KEYS,
    "train": _TRAIN_KEYS,
    "score": _SCORE_KEYS,
    "propose": _PROPOSE_KEYS,
    "caption": _CAPTION_KEYS,
    "refine": _REFINE_KEYS,
    "rules": _RULES_KEYS,
    "verify": _VERIFY_KEYS,
    "smooth": _SMOOTH_KEYS,
    "evaluate": _EVAL_KEYS,
}
