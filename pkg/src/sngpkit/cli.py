"""Command-line interface.

Subcommands cover the full experiment lifecycle::

    sngpkit gen-data --config cfg.json --seed 0 --out runs/demo
    sngpkit train    --config cfg.json --seed 0 --method sngp --out runs/demo
    sngpkit eval-id  --config cfg.json --seed 0 --method sngp --out runs/demo
    sngpkit eval-ood --config cfg.json --seed 0 --method sngp --out runs/demo
    sngpkit report   --config cfg.json --out runs/demo
    sngpkit run-all  --config cfg.json --out runs/demo

Exit codes: 0 success, 1 usage or configuration errors, 2 runtime or
numerical failures.  Every subcommand regenerates its data
deterministically from the config and seed, so eval steps only need the
checkpoint written by ``train`` (``run-all`` does everything in one go).
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config
from .data import save_dataset_csv
from .estimators import MCDropoutClassifier, measure_latency
from .exceptions import (
    CheckpointError,
    ConfigError,
    CsvFormatError,
    NumericalError,
    PosteriorStateError,
    TrainingError,
)
from .metrics import (
    MetricRecord,
    aggregate,
    aggregates_to_csv,
    format_mean_std,
    metrics_from_csv,
    metrics_to_csv,
)
from .protocol import (
    REPORT_SCHEMA_VERSION,
    build_seed_data,
    evaluate_id,
    evaluate_ood,
    fid_records,
    generate_id_dataset,
    generate_ood_datasets,
    make_dense_classifier,
    make_sngp_classifier,
    model_file_tag,
    run_protocol,
)
from .rng import STREAM_MC, derive_seed

METHOD_CHOICES = ("baseline", "mc_dropout", "sngp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sngpkit",
        description="Single-pass uncertainty-aware classification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, *, seed=False, method=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", default="runs", help="output directory (default: runs)")
        if seed:
            p.add_argument(
                "--seed", type=int, default=None, help="seed (default: first seed in the config)"
            )
        if method:
            p.add_argument("--method", required=True, choices=METHOD_CHOICES)
        return p

    add("gen-data", "write the raw ID and OOD datasets for one seed as CSV", seed=True).set_defaults(
        func=cmd_gen_data
    )
    add("train", "train one model for one seed and save its checkpoint", seed=True, method=True
        ).set_defaults(func=cmd_train)
    add("eval-id", "in-distribution metrics for one trained model", seed=True, method=True
        ).set_defaults(func=cmd_eval_id)
    add("eval-ood", "OOD separation metrics for one trained model", seed=True, method=True
        ).set_defaults(func=cmd_eval_ood)
    add("report", "merge per-cell metric files into metrics/aggregates/report"
        ).set_defaults(func=cmd_report)
    add("run-all", "full protocol: every seed and method, all reports"
        ).set_defaults(func=cmd_run_all)
    return parser


def _resolve_seed(config: ExperimentConfig, args) -> int:
    return config.seeds[0] if args.seed is None else args.seed


def _checkpoint_path(out_dir: str, method: str, seed: int) -> str:
    return os.path.join(out_dir, "checkpoints", f"{model_file_tag(method)}_seed{seed}.ckpt")


def _load_method_classifier(config: ExperimentConfig, method: str, seed: int, out_dir: str):
    path = _checkpoint_path(out_dir, method, seed)
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path} (run `sngpkit train` first)")
    clf = load_checkpoint(path)
    if method == "mc_dropout":
        clf = MCDropoutClassifier.from_fitted(
            clf, n_passes=config.mc_dropout.n_passes, mc_seed=derive_seed(seed, STREAM_MC)
        )
    return clf


def _print_records(records) -> None:
    for r in records:
        print(f"{r.method:<12} {r.dataset_tag:<16} {r.metric_name:<20} {r.value:.6f}")


def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    seed = _resolve_seed(config, args)
    data_dir = os.path.join(args.out, "data")
    os.makedirs(data_dir, exist_ok=True)
    id_path = os.path.join(data_dir, f"id_seed{seed}.csv")
    save_dataset_csv(id_path, generate_id_dataset(config, seed))
    print(f"wrote {id_path}")
    for name, ds in generate_ood_datasets(config, seed).items():
        path = os.path.join(data_dir, f"ood_{name}_seed{seed}.csv")
        save_dataset_csv(path, ds)
        print(f"wrote {path}")
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    seed = _resolve_seed(config, args)
    data = build_seed_data(config, seed)
    tag = model_file_tag(args.method)
    if tag == "dense":
        clf = make_dense_classifier(config, seed)
    else:
        clf = make_sngp_classifier(config, seed)
    clf.fit(
        data.train.features,
        data.train.labels,
        data.val.features,
        data.val.labels,
        feature_stats=data.scaler,
    )
    ckpt_dir = os.path.join(args.out, "checkpoints")
    log_dir = os.path.join(args.out, "logs")
    os.makedirs(ckpt_dir, exist_ok=True)
    os.makedirs(log_dir, exist_ok=True)
    ckpt_path = os.path.join(ckpt_dir, f"{tag}_seed{seed}.ckpt")
    save_checkpoint(ckpt_path, clf)
    clf.train_log_.to_csv(os.path.join(log_dir, f"{tag}_seed{seed}_trainlog.csv"))
    log = clf.train_log_
    last = log.records[-1] if log.records else None
    print(f"trained {tag} model (seed {seed}): {log.n_epochs} epochs", end="")
    if last is not None:
        print(f", best epoch {log.best_epoch}, val_accuracy {last.val_accuracy:.4f}", end="")
    print(f"\nwrote {ckpt_path}")
    if args.method == "mc_dropout" and tag == "dense":
        print("note: mc_dropout reuses the dense checkpoint; evaluation adds the sampling passes")
    return 0


def cmd_eval_id(args) -> int:
    config = load_config(args.config)
    seed = _resolve_seed(config, args)
    data = build_seed_data(config, seed)
    clf = _load_method_classifier(config, args.method, seed, args.out)
    records, _, _ = evaluate_id(clf, args.method, data, config, seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"id_metrics_{args.method}_seed{seed}.csv")
    metrics_to_csv(path, records)
    _print_records(records)
    if config.latency.enabled:
        ms = measure_latency(
            clf.predict_proba,
            data.test.features[:1],
            config.latency.n_warmup,
            config.latency.n_trials,
        )
        latency_record = MetricRecord(args.method, "id", seed, "latency_ms", ms)
        latency_path = os.path.join(args.out, f"latency_{args.method}_seed{seed}.csv")
        metrics_to_csv(latency_path, [latency_record])
        _print_records([latency_record])
        print(f"wrote {latency_path}")
    print(f"wrote {path}")
    return 0


def cmd_eval_ood(args) -> int:
    config = load_config(args.config)
    seed = _resolve_seed(config, args)
    data = build_seed_data(config, seed)
    clf = _load_method_classifier(config, args.method, seed, args.out)
    _, id_msp, id_entropy = evaluate_id(clf, args.method, data, config, seed)
    records, _ = evaluate_ood(clf, args.method, data, config, seed, id_msp, id_entropy)
    records = records + fid_records(clf.hidden_features, args.method, data, seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"ood_metrics_{args.method}_seed{seed}.csv")
    metrics_to_csv(path, records)
    _print_records(records)
    print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    config = load_config(args.config)
    cell_files = sorted(glob.glob(os.path.join(args.out, "id_metrics_*_seed*.csv"))) + sorted(
        glob.glob(os.path.join(args.out, "ood_metrics_*_seed*.csv"))
    )
    records: list[MetricRecord] = []
    if cell_files:
        for path in cell_files:
            records.extend(metrics_from_csv(path))
        source = f"{len(cell_files)} per-cell metric file(s)"
    else:
        merged = os.path.join(args.out, "metrics.csv")
        if not os.path.exists(merged):
            raise FileNotFoundError(
                f"no id_metrics_*/ood_metrics_* files and no metrics.csv under {args.out}; "
                "run eval steps or `sngpkit run-all` first"
            )
        records = metrics_from_csv(merged)
        source = "metrics.csv"
    records.sort(key=lambda r: (r.method, r.dataset_tag, r.seed, r.metric_name))
    metrics_to_csv(os.path.join(args.out, "metrics.csv"), records)
    aggs = aggregate(records)
    aggregates_to_csv(os.path.join(args.out, "aggregates.csv"), aggs)
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
        "missing": [],
        "notes": {
            "source": source,
            "std_convention": "population standard deviation (ddof=0) across seeds",
        },
    }
    report_path = os.path.join(args.out, "report.json")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for a in aggs:
        print(
            f"{a.method:<12} {a.dataset_tag:<16} {a.metric_name:<20} "
            f"{format_mean_std(a.mean, a.std)}  (n={a.n_seeds})"
        )
    print(f"merged {source} -> metrics.csv, aggregates.csv, report.json under {args.out}")
    return 0


def cmd_run_all(args) -> int:
    config = load_config(args.config)
    result = run_protocol(config, args.out)
    aggs = aggregate(result.records)
    for a in aggs:
        print(
            f"{a.method:<12} {a.dataset_tag:<16} {a.metric_name:<20} "
            f"{format_mean_std(a.mean, a.std)}  (n={a.n_seeds})"
        )
    if result.missing:
        for entry in result.missing:
            print(f"seed {entry['seed']} failed: {entry['error']}", file=sys.stderr)
    print(f"wrote metrics.csv, aggregates.csv, entropy_hist.csv, report.json under {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (
        TrainingError,
        NumericalError,
        PosteriorStateError,
        CheckpointError,
        CsvFormatError,
        FileNotFoundError,
        ValueError,
        np.linalg.LinAlgError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
