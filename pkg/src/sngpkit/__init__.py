"""Single-forward-pass uncertainty-aware classification.

The package trains small residual MLP classifiers on synthetic 2-D
datasets and compares three ways of reporting predictive uncertainty:

- ``DeterministicClassifier`` — softmax confidence from one forward pass;
- ``MCDropoutClassifier`` — probabilities averaged over several
  dropout-active passes;
- ``SNGPClassifier`` — spectral-normalized encoder with a
  random-Fourier-feature Gaussian-process head whose Laplace-approximated
  posterior yields a distance-aware variance, folded into the
  probabilities by a mean-field adjustment.  Still one forward pass.

Everything downstream of numpy is deterministic given a seed: dataset
generation, splits, initialization, training, evaluation draws, and the
CSV/JSON reports produced by :func:`run_protocol` or the ``sngpkit`` CLI.
"""

from .checkpoint import MAGIC, FORMAT_VERSION, load_checkpoint, save_checkpoint
from .config import (
    EncoderConfig,
    ExperimentConfig,
    GpHeadConfig,
    IdDatasetConfig,
    LatencyConfig,
    McDropoutConfig,
    MetricsConfig,
    OodDatasetConfig,
    SpectralConfig,
    TrainSectionConfig,
    config_from_dict,
    load_config,
)
from .data import (
    Dataset,
    Standardizer,
    apply_standardization,
    draw_subset,
    gen_gaussian_blobs,
    gen_ood_ring,
    gen_two_moons,
    load_dataset_csv,
    save_dataset_csv,
    standardize,
    stratified_holdout,
    stratified_split,
)
from .estimators import (
    DeterministicClassifier,
    MCDropoutClassifier,
    PredictionBatch,
    SNGPClassifier,
    mc_dropout_probs,
    measure_latency,
    predict_deterministic,
    predict_mc_dropout,
    predict_sngp,
    predictions_to_csv,
)
from .exceptions import (
    CheckpointError,
    ConfigError,
    CsvFormatError,
    NotFittedError,
    NumericalError,
    PosteriorStateError,
    TrainingError,
)
from .fid import MomentSummary, dataset_fid, fit_moments, frechet_distance, sqrtm_psd
from .gp import (
    MEAN_FIELD_LAMBDA,
    LaplacePosterior,
    RFFProjection,
    gp_logits,
    make_rff_projection,
    mean_field_adjust,
    rff_features,
)
from .metrics import (
    METRIC_NAMES,
    AggregateRecord,
    EntropySummary,
    MetricRecord,
    accuracy,
    aggregate,
    aggregates_to_csv,
    average_ranks,
    brier,
    ece,
    entropy_summary,
    f1_macro,
    format_mean_std,
    metrics_from_csv,
    metrics_to_csv,
    ood_auroc,
    predictive_entropy,
    spearman_rank_correlation,
)
from .network import (
    DenseHeadModel,
    GPHeadModel,
    cross_entropy,
    encoder_forward,
    log_softmax,
    make_encoder,
    relu,
    softmax,
)
from .optim import AdamW, multistep_lr
from .protocol import ProtocolResult, SeedData, build_seed_data, run_protocol
from .rng import derive_seed, make_rng, normals
from .spectral import SpectralNormalizer, power_iteration, project_to_bound
from .training import EpochRecord, TrainConfig, TrainLog, train_model

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "AggregateRecord",
    "CheckpointError",
    "FORMAT_VERSION",
    "MAGIC",
    "ConfigError",
    "CsvFormatError",
    "Dataset",
    "DenseHeadModel",
    "DeterministicClassifier",
    "EncoderConfig",
    "EntropySummary",
    "EpochRecord",
    "ExperimentConfig",
    "GPHeadModel",
    "GpHeadConfig",
    "IdDatasetConfig",
    "LaplacePosterior",
    "LatencyConfig",
    "MCDropoutClassifier",
    "MEAN_FIELD_LAMBDA",
    "METRIC_NAMES",
    "McDropoutConfig",
    "MetricRecord",
    "MetricsConfig",
    "MomentSummary",
    "NotFittedError",
    "NumericalError",
    "OodDatasetConfig",
    "PosteriorStateError",
    "PredictionBatch",
    "ProtocolResult",
    "RFFProjection",
    "SNGPClassifier",
    "SeedData",
    "SpectralConfig",
    "SpectralNormalizer",
    "Standardizer",
    "TrainConfig",
    "TrainLog",
    "TrainSectionConfig",
    "TrainingError",
    "accuracy",
    "aggregate",
    "aggregates_to_csv",
    "apply_standardization",
    "average_ranks",
    "brier",
    "build_seed_data",
    "config_from_dict",
    "cross_entropy",
    "dataset_fid",
    "derive_seed",
    "draw_subset",
    "ece",
    "encoder_forward",
    "entropy_summary",
    "f1_macro",
    "fit_moments",
    "format_mean_std",
    "frechet_distance",
    "gen_gaussian_blobs",
    "gen_ood_ring",
    "gen_two_moons",
    "gp_logits",
    "load_checkpoint",
    "load_config",
    "load_dataset_csv",
    "log_softmax",
    "make_encoder",
    "make_rff_projection",
    "make_rng",
    "mc_dropout_probs",
    "mean_field_adjust",
    "measure_latency",
    "metrics_from_csv",
    "metrics_to_csv",
    "multistep_lr",
    "normals",
    "ood_auroc",
    "power_iteration",
    "predict_deterministic",
    "predict_mc_dropout",
    "predict_sngp",
    "predictions_to_csv",
    "predictive_entropy",
    "project_to_bound",
    "relu",
    "rff_features",
    "run_protocol",
    "save_checkpoint",
    "save_dataset_csv",
    "softmax",
    "spearman_rank_correlation",
    "sqrtm_psd",
    "standardize",
    "stratified_holdout",
    "stratified_split",
    "train_model",
]
