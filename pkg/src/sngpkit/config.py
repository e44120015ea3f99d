"""Versioned JSON experiment configuration with strict key checking.

Unknown keys anywhere in the document are rejected (typos must fail
loudly, not silently fall back to defaults), and every value range the
components rely on is validated up front.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .exceptions import ConfigError

SCHEMA_VERSION = 1

METHODS = ("baseline", "mc_dropout", "sngp")
ID_KINDS = ("two_moons", "gaussian_blobs")


def _strict(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    return cls(**raw)


@dataclass
class IdDatasetConfig:
    kind: str = "two_moons"
    n: int = 2000
    noise_sigma: float = 0.1
    centers: list = field(default_factory=list)
    sigma: float = 1.0
    n_per_class: int = 500

    def validate(self):
        if self.kind not in ID_KINDS:
            raise ConfigError(f"id_dataset.kind must be one of {ID_KINDS}, got {self.kind!r}")
        if self.kind == "two_moons":
            if self.n < 2:
                raise ConfigError("id_dataset.n must be >= 2")
            if self.noise_sigma < 0:
                raise ConfigError("id_dataset.noise_sigma must be >= 0")
        else:
            if len(self.centers) < 2:
                raise ConfigError("id_dataset.centers needs at least 2 rows")
            if self.sigma <= 0:
                raise ConfigError("id_dataset.sigma must be > 0")
            if self.n_per_class < 1:
                raise ConfigError("id_dataset.n_per_class must be >= 1")


@dataclass
class OodDatasetConfig:
    name: str = "ring"
    kind: str = "ring"
    n: int = 2000
    radius: float = 5.0
    width: float = 1.0
    center: list = field(default_factory=lambda: [0.0, 0.0])

    def validate(self):
        if self.kind != "ring":
            raise ConfigError(f"ood_datasets[].kind must be 'ring', got {self.kind!r}")
        if not self.name:
            raise ConfigError("ood_datasets[].name must be non-empty")
        if self.n < 1:
            raise ConfigError("ood_datasets[].n must be >= 1")
        if self.radius <= 0:
            raise ConfigError("ood_datasets[].radius must be > 0")
        if self.width < 0:
            raise ConfigError("ood_datasets[].width must be >= 0")
        if len(self.center) != 2:
            raise ConfigError("ood_datasets[].center must have 2 entries")


@dataclass
class EncoderConfig:
    hidden_dim: int = 64
    n_residual_blocks: int = 2
    dropout_rate: float = 0.1

    def validate(self):
        if self.hidden_dim < 1:
            raise ConfigError("encoder.hidden_dim must be >= 1")
        if self.n_residual_blocks < 0:
            raise ConfigError("encoder.n_residual_blocks must be >= 0")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError("encoder.dropout_rate must lie in [0, 1)")


@dataclass
class SpectralConfig:
    bound: float = 0.95
    power_iterations: int = 1
    final_iterations: int = 20
    # When true, the encoder's input projection is projected alongside the
    # residual-block weights, capping the whole encoder's Lipschitz constant
    # (not just each block's).  Off by default; the reference experiment
    # enables it so hidden-space distances stay stable under training and
    # the GP kernel lengthscale keeps its meaning far from the data.
    include_input_projection: bool = False

    def validate(self):
        if self.bound <= 0:
            raise ConfigError("spectral.bound must be > 0")
        if self.power_iterations < 1 or self.final_iterations < 1:
            raise ConfigError("spectral iteration counts must be >= 1")
        if not isinstance(self.include_input_projection, bool):
            raise ConfigError("spectral.include_input_projection must be a boolean")


@dataclass
class GpHeadConfig:
    rff_dim: int = 1024
    lengthscale: float = 2.0
    prior_precision: float = 1e-3
    mean_field_lambda: float = 0.39269908169872414  # pi / 8

    def validate(self):
        if self.rff_dim < 1:
            raise ConfigError("gp_head.rff_dim must be >= 1")
        if self.lengthscale <= 0:
            raise ConfigError("gp_head.lengthscale must be > 0")
        if self.prior_precision <= 0:
            raise ConfigError("gp_head.prior_precision must be > 0")
        if self.mean_field_lambda < 0:
            raise ConfigError("gp_head.mean_field_lambda must be >= 0")


@dataclass
class TrainSectionConfig:
    initial_lr: float = 1e-3
    lr_milestones: list = field(default_factory=list)
    lr_gamma: float = 0.1
    max_epochs: int = 30
    batch_size: int = 128
    early_stop_patience: int = 5
    early_stop_metric: str = "val_loss"
    weight_decay: float = 0.0

    def validate(self):
        if self.initial_lr <= 0:
            raise ConfigError("train.initial_lr must be > 0")
        if not 0 < self.lr_gamma <= 1:
            raise ConfigError("train.lr_gamma must lie in (0, 1]")
        ms = list(self.lr_milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError("train.lr_milestones must be strictly increasing")
        if self.max_epochs < 0:
            raise ConfigError("train.max_epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if self.early_stop_patience < 1:
            raise ConfigError("train.early_stop_patience must be >= 1")
        if self.early_stop_metric not in ("val_loss", "val_accuracy"):
            raise ConfigError("train.early_stop_metric must be val_loss or val_accuracy")
        if self.weight_decay < 0:
            raise ConfigError("train.weight_decay must be >= 0")


@dataclass
class McDropoutConfig:
    n_passes: int = 10

    def validate(self):
        if self.n_passes < 1:
            raise ConfigError("mc_dropout.n_passes must be >= 1")


@dataclass
class MetricsConfig:
    ece_bins: int = 15
    entropy_bins: int = 30

    def validate(self):
        if self.ece_bins < 1 or self.entropy_bins < 1:
            raise ConfigError("metrics bin counts must be >= 1")


@dataclass
class LatencyConfig:
    enabled: bool = False
    n_warmup: int = 50
    n_trials: int = 200

    def validate(self):
        if self.n_trials < 10:
            raise ConfigError("latency.n_trials must be >= 10")
        if self.n_warmup < 0:
            raise ConfigError("latency.n_warmup must be >= 0")


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    id_dataset: IdDatasetConfig = field(default_factory=IdDatasetConfig)
    ood_datasets: list[OodDatasetConfig] = field(default_factory=list)
    split_fractions: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    methods: list = field(default_factory=lambda: list(METHODS))
    seeds: list = field(default_factory=lambda: list(range(10)))
    n_eval_samples: int = 1000
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    gp_head: GpHeadConfig = field(default_factory=GpHeadConfig)
    train: TrainSectionConfig = field(default_factory=TrainSectionConfig)
    mc_dropout: McDropoutConfig = field(default_factory=McDropoutConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)

    def validate(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {self.schema_version} (supported: {SCHEMA_VERSION})"
            )
        if len(self.split_fractions) != 3:
            raise ConfigError("split_fractions must have exactly 3 entries (train, val, test)")
        for f in self.split_fractions:
            if not 0 <= f <= 1:
                raise ConfigError("split_fractions entries must lie in [0, 1]")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError("split_fractions must sum to 1 within 1e-9")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r} (choose from {METHODS})")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be distinct")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        for s in self.seeds:
            if not isinstance(s, int) or s < 0:
                raise ConfigError("seeds must be nonnegative integers")
        if self.n_eval_samples < 10:
            raise ConfigError("n_eval_samples must be >= 10")
        names = [o.name for o in self.ood_datasets]
        if len(set(names)) != len(names):
            raise ConfigError("ood_datasets names must be distinct")
        self.id_dataset.validate()
        for o in self.ood_datasets:
            o.validate()
        self.encoder.validate()
        self.spectral.validate()
        self.gp_head.validate()
        self.train.validate()
        self.mc_dropout.validate()
        self.metrics.validate()
        self.latency.validate()

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    raw = dict(raw)
    nested = {
        "id_dataset": IdDatasetConfig,
        "encoder": EncoderConfig,
        "spectral": SpectralConfig,
        "gp_head": GpHeadConfig,
        "train": TrainSectionConfig,
        "mc_dropout": McDropoutConfig,
        "metrics": MetricsConfig,
        "latency": LatencyConfig,
    }
    for key, cls in nested.items():
        if key in raw:
            raw[key] = _strict(cls, raw[key], key)
    if "ood_datasets" in raw:
        if not isinstance(raw["ood_datasets"], list):
            raise ConfigError("ood_datasets must be a list")
        raw["ood_datasets"] = [
            _strict(OodDatasetConfig, o, f"ood_datasets[{i}]")
            for i, o in enumerate(raw["ood_datasets"])
        ]
    cfg = _strict(ExperimentConfig, raw, "config")
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}")
    return config_from_dict(raw)
