"""End-to-end experiment driver: data -> training -> evaluation -> reports.

One protocol run executes, for every seed in the config: generate the
ID dataset, stratified-split it, standardize on the train split,
generate and standardize the OOD sets, train one dense-head model
(shared by the baseline and MC-dropout methods) and/or one GP-head
model, then evaluate ID metrics on the test split and OOD separation on
fixed-size eval draws.  Per-seed records land in metrics.csv, their
mean/std in aggregates.csv, pooled entropy histograms in
entropy_hist.csv, and a JSON report ties everything together.  Latency,
being wall-clock, goes to latency.csv and never into metrics.csv, so
rerunning a config reproduces the report files byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .data import (
    Dataset,
    Standardizer,
    apply_standardization,
    draw_subset,
    gen_gaussian_blobs,
    gen_ood_ring,
    gen_two_moons,
    standardize,
    stratified_split,
)
from .estimators import (
    DeterministicClassifier,
    MCDropoutClassifier,
    SNGPClassifier,
    measure_latency,
)
from .exceptions import NumericalError, TrainingError
from .fid import dataset_fid
from .metrics import (
    MetricRecord,
    accuracy,
    aggregate,
    aggregates_to_csv,
    brier,
    ece,
    f1_macro,
    format_mean_std,
    metrics_to_csv,
    ood_auroc,
    predictive_entropy,
)
from .rng import STREAM_EVAL, STREAM_MC, STREAM_OOD, derive_seed

REPORT_SCHEMA_VERSION = 1


@dataclass
class SeedData:
    """Standardized splits and OOD sets for one seed."""

    train: Dataset
    val: Dataset
    test: Dataset
    scaler: Standardizer
    oods: dict[str, Dataset]


def generate_id_dataset(config: ExperimentConfig, seed: int) -> Dataset:
    ds = config.id_dataset
    if ds.kind == "two_moons":
        return gen_two_moons(ds.n, ds.noise_sigma, seed)
    return gen_gaussian_blobs(ds.centers, ds.sigma, ds.n_per_class, seed)


def generate_ood_datasets(config: ExperimentConfig, seed: int) -> dict[str, Dataset]:
    out = {}
    for i, o in enumerate(config.ood_datasets):
        out[o.name] = gen_ood_ring(
            o.n, o.radius, o.width, o.center, derive_seed(seed, STREAM_OOD, i)
        )
    return out


def build_seed_data(config: ExperimentConfig, seed: int) -> SeedData:
    full = generate_id_dataset(config, seed)
    train, val, test = stratified_split(full, tuple(config.split_fractions), seed)
    train, scaler = standardize(train)
    val = apply_standardization(val, scaler)
    test = apply_standardization(test, scaler)
    oods = {
        name: apply_standardization(ds, scaler)
        for name, ds in generate_ood_datasets(config, seed).items()
    }
    return SeedData(train, val, test, scaler, oods)


def make_dense_classifier(config: ExperimentConfig, seed: int) -> DeterministicClassifier:
    e, t = config.encoder, config.train
    return DeterministicClassifier(
        hidden_dim=e.hidden_dim,
        n_residual_blocks=e.n_residual_blocks,
        dropout_rate=e.dropout_rate,
        spectral_bound=None,
        initial_lr=t.initial_lr,
        lr_milestones=tuple(t.lr_milestones),
        lr_gamma=t.lr_gamma,
        max_epochs=t.max_epochs,
        batch_size=t.batch_size,
        early_stop_patience=t.early_stop_patience,
        early_stop_metric=t.early_stop_metric,
        weight_decay=t.weight_decay,
        seed=seed,
    )


def make_sngp_classifier(config: ExperimentConfig, seed: int) -> SNGPClassifier:
    e, t, s, g = config.encoder, config.train, config.spectral, config.gp_head
    return SNGPClassifier(
        hidden_dim=e.hidden_dim,
        n_residual_blocks=e.n_residual_blocks,
        dropout_rate=e.dropout_rate,
        spectral_bound=s.bound,
        power_iterations=s.power_iterations,
        spectral_final_iterations=s.final_iterations,
        spectral_input_projection=s.include_input_projection,
        rff_dim=g.rff_dim,
        lengthscale=g.lengthscale,
        prior_precision=g.prior_precision,
        mean_field_lambda=g.mean_field_lambda,
        initial_lr=t.initial_lr,
        lr_milestones=tuple(t.lr_milestones),
        lr_gamma=t.lr_gamma,
        max_epochs=t.max_epochs,
        batch_size=t.batch_size,
        early_stop_patience=t.early_stop_patience,
        early_stop_metric=t.early_stop_metric,
        weight_decay=t.weight_decay,
        seed=seed,
    )


def model_file_tag(method: str) -> str:
    """Checkpoint basename per trained model (baseline and mc_dropout share one)."""
    return "sngp" if method == "sngp" else "dense"


def train_seed_models(config: ExperimentConfig, data: SeedData, seed: int) -> dict:
    """Train the models the configured methods need; keys 'dense' and/or 'sngp'."""
    models = {}
    if any(m in config.methods for m in ("baseline", "mc_dropout")):
        clf = make_dense_classifier(config, seed)
        clf.fit(
            data.train.features,
            data.train.labels,
            data.val.features,
            data.val.labels,
            feature_stats=data.scaler,
        )
        models["dense"] = clf
    if "sngp" in config.methods:
        clf = make_sngp_classifier(config, seed)
        clf.fit(
            data.train.features,
            data.train.labels,
            data.val.features,
            data.val.labels,
            feature_stats=data.scaler,
        )
        models["sngp"] = clf
    return models


def method_predictor(method: str, models: dict, config: ExperimentConfig, seed: int):
    """The fitted estimator answering for a method tag."""
    if method == "baseline":
        return models["dense"]
    if method == "mc_dropout":
        return MCDropoutClassifier.from_fitted(
            models["dense"],
            n_passes=config.mc_dropout.n_passes,
            mc_seed=derive_seed(seed, STREAM_MC),
        )
    if method == "sngp":
        return models["sngp"]
    raise ValueError(f"unknown method {method!r}")


@dataclass
class ProtocolResult:
    records: list[MetricRecord] = field(default_factory=list)
    latency_records: list[MetricRecord] = field(default_factory=list)
    entropy_pools: dict = field(default_factory=dict)  # (method, tag) -> list of arrays
    missing: list = field(default_factory=list)
    kept_models: dict = field(default_factory=dict)  # seed -> {"dense": ..., "sngp": ...}
    n_classes: int = 2


def _pool(result: ProtocolResult, method: str, tag: str, entropies: np.ndarray) -> None:
    result.entropy_pools.setdefault((method, tag), []).append(entropies)


def evaluate_id(clf, method: str, data: SeedData, config: ExperimentConfig, seed: int):
    """ID records on the full test split, plus eval-draw uncertainty arrays.

    Returns ``(records, id_msp, id_entropy)`` where the arrays come from
    the fixed-size eval draw and feed the OOD separation metrics.
    """
    records = []
    probs = clf.predict_proba(data.test.features)
    records.append(MetricRecord(method, "id", seed, "accuracy", accuracy(probs, data.test.labels)))
    records.append(MetricRecord(method, "id", seed, "f1_macro", f1_macro(probs, data.test.labels)))
    records.append(
        MetricRecord(
            method, "id", seed, "ece", ece(probs, data.test.labels, config.metrics.ece_bins)
        )
    )
    records.append(MetricRecord(method, "id", seed, "brier", brier(probs, data.test.labels)))

    id_draw = draw_subset(
        data.test, min(config.n_eval_samples, data.test.n_samples), derive_seed(seed, STREAM_EVAL)
    )
    batch = clf.predict_with_uncertainty(id_draw.features)
    records.append(MetricRecord(method, "id", seed, "mean_entropy", float(batch.entropy.mean())))
    return records, batch.msp_uncertainty, batch.entropy


def evaluate_ood(
    clf,
    method: str,
    data: SeedData,
    config: ExperimentConfig,
    seed: int,
    id_msp: np.ndarray,
    id_entropy: np.ndarray,
):
    """OOD separation records per configured OOD set.

    Returns ``(records, pools)`` with ``pools`` mapping OOD name to the
    eval draw's per-sample predictive entropies.
    """
    records = []
    pools = {}
    for i, (name, ood) in enumerate(data.oods.items()):
        ood_draw = draw_subset(
            ood, min(config.n_eval_samples, ood.n_samples), derive_seed(seed, STREAM_EVAL, i + 1)
        )
        batch = clf.predict_with_uncertainty(ood_draw.features)
        records.append(
            MetricRecord(method, name, seed, "ood_auroc", ood_auroc(id_msp, batch.msp_uncertainty))
        )
        records.append(
            MetricRecord(
                method, name, seed, "ood_auroc_entropy", ood_auroc(id_entropy, batch.entropy)
            )
        )
        records.append(MetricRecord(method, name, seed, "mean_entropy", float(batch.entropy.mean())))
        pools[name] = batch.entropy
    return records, pools


def fid_records(embed, fid_method: str, data: SeedData, seed: int) -> list[MetricRecord]:
    """model_fid rows comparing test-split embeddings against each OOD set."""
    return [
        MetricRecord(
            fid_method, name, seed, "model_fid", dataset_fid(embed, data.test.features, ood.features)
        )
        for name, ood in data.oods.items()
    ]


def run_seed(
    config: ExperimentConfig, seed: int, result: ProtocolResult, out_dir: str | None
) -> dict:
    """One seed's full cell: train, evaluate, record, checkpoint."""
    data = build_seed_data(config, seed)
    result.n_classes = data.train.n_classes
    models = train_seed_models(config, data, seed)

    if out_dir is not None:
        ckpt_dir = os.path.join(out_dir, "checkpoints")
        log_dir = os.path.join(out_dir, "logs")
        os.makedirs(ckpt_dir, exist_ok=True)
        os.makedirs(log_dir, exist_ok=True)
        for tag, clf in models.items():
            save_checkpoint(os.path.join(ckpt_dir, f"{tag}_seed{seed}.ckpt"), clf)
            clf.train_log_.to_csv(os.path.join(log_dir, f"{tag}_seed{seed}_trainlog.csv"))

    for method in config.methods:
        clf = method_predictor(method, models, config, seed)
        id_records, id_msp, id_entropy = evaluate_id(clf, method, data, config, seed)
        result.records.extend(id_records)
        _pool(result, method, "id", id_entropy)

        ood_records, pools = evaluate_ood(clf, method, data, config, seed, id_msp, id_entropy)
        result.records.extend(ood_records)
        for name, entropies in pools.items():
            _pool(result, method, name, entropies)

        if config.latency.enabled:
            ms = measure_latency(
                clf.predict_proba,
                data.test.features[:1],
                config.latency.n_warmup,
                config.latency.n_trials,
            )
            result.latency_records.append(MetricRecord(method, "id", seed, "latency_ms", ms))

    fid_source = "sngp" if "sngp" in models else "dense"
    fid_method = "sngp" if fid_source == "sngp" else "baseline"
    result.records.extend(fid_records(models[fid_source].hidden_features, fid_method, data, seed))
    return models


def run_protocol(
    config: ExperimentConfig, out_dir: str | None = None, keep_models: str = "none"
) -> ProtocolResult:
    """Run every seed, then write metrics/aggregates/histogram/report files.

    ``keep_models``: "none" (default), "last" (retain the final seed's
    fitted estimators in memory), or "all".  A seed whose training or
    posterior fails is recorded under ``missing`` and the run continues.
    """
    if keep_models not in ("none", "last", "all"):
        raise ValueError('keep_models must be "none", "last", or "all"')
    result = ProtocolResult()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    for seed in config.seeds:
        try:
            models = run_seed(config, seed, result, out_dir)
        except (TrainingError, NumericalError) as err:
            result.missing.append({"seed": seed, "error": str(err)})
            continue
        if keep_models == "all" or (keep_models == "last" and seed == config.seeds[-1]):
            result.kept_models[seed] = models
    if out_dir is not None:
        write_reports(config, result, out_dir)
    return result


def entropy_histogram_rows(result: ProtocolResult, n_bins: int) -> list[tuple]:
    """(method, domain_tag, bin_left, bin_right, count) pooled across seeds."""
    hi = float(np.log(result.n_classes)) if result.n_classes > 1 else 1.0
    edges = np.linspace(0.0, hi, n_bins + 1)
    rows = []
    for method, tag in sorted(result.entropy_pools):
        ent = np.concatenate(result.entropy_pools[(method, tag)])
        counts, _ = np.histogram(np.clip(ent, 0.0, hi), bins=edges)
        for b in range(n_bins):
            rows.append((method, tag, edges[b], edges[b + 1], int(counts[b])))
    return rows


def write_reports(config: ExperimentConfig, result: ProtocolResult, out_dir: str) -> None:
    metrics_to_csv(os.path.join(out_dir, "metrics.csv"), result.records)
    aggs = aggregate(result.records)
    aggregates_to_csv(os.path.join(out_dir, "aggregates.csv"), aggs)

    rows = entropy_histogram_rows(result, config.metrics.entropy_bins)
    lines = ["method,domain_tag,bin_left,bin_right,count"]
    for method, tag, left, right, count in rows:
        lines.append(f"{method},{tag},{left:.17g},{right:.17g},{count}")
    with open(os.path.join(out_dir, "entropy_hist.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    if result.latency_records:
        metrics_to_csv(os.path.join(out_dir, "latency.csv"), result.latency_records)

    fid_source = "sngp" if "sngp" in config.methods else "baseline"
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": config.to_dict(),
        "aggregates": [
            {
                "method": a.method,
                "dataset_tag": a.dataset_tag,
                "metric_name": a.metric_name,
                "mean": a.mean,
                "std": a.std,
                "n_seeds": a.n_seeds,
                "formatted": format_mean_std(a.mean, a.std),
            }
            for a in aggs
        ],
        "missing": result.missing,
        "notes": {
            "std_convention": "population standard deviation (ddof=0) across seeds",
            "shared_dense_model": "baseline and mc_dropout reuse one trained model per seed",
            "fid_embedding_source": fid_source,
            "latency": "wall-clock; written to latency.csv only, never metrics.csv",
        },
    }
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
