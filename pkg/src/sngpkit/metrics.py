"""Calibration, accuracy, and OOD-detection metrics, plus record types.

All metrics consume a row-stochastic probability matrix (n, K) and
integer labels; OOD AUROC consumes two uncertainty score vectors.
Everything is float64 and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_labels, as_matrix

METRIC_NAMES = (
    "accuracy",
    "f1_macro",
    "ece",
    "brier",
    "ood_auroc",
    "ood_auroc_entropy",
    "latency_ms",
    "mean_entropy",
    "model_fid",
)


def _check_probs(probs) -> np.ndarray:
    probs = as_matrix(probs, "probs")
    if probs.shape[1] < 2:
        raise ValueError("probs needs at least 2 columns")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probs rows must be nonnegative and sum to 1")
    return probs


def predicted_classes(probs) -> np.ndarray:
    """Row argmax; ties resolve to the lowest class index."""
    return np.argmax(_check_probs(probs), axis=1)


def accuracy(probs, labels) -> float:
    probs = _check_probs(probs)
    labels = as_labels(labels, "labels", n_rows=probs.shape[0])
    return float((predicted_classes(probs) == labels).mean())


def f1_macro(probs, labels) -> float:
    """Unweighted mean of per-class F1 = 2TP / (2TP + FP + FN).

    A class absent from both predictions and labels scores 1.0; a class
    with zero denominator otherwise scores 0.0.
    """
    probs = _check_probs(probs)
    labels = as_labels(labels, "labels", n_rows=probs.shape[0])
    preds = predicted_classes(probs)
    k = probs.shape[1]
    scores = np.empty(k)
    for c in range(k):
        tp = int(np.sum((preds == c) & (labels == c)))
        fp = int(np.sum((preds == c) & (labels != c)))
        fn = int(np.sum((preds != c) & (labels == c)))
        if tp == 0 and fp == 0 and fn == 0:
            scores[c] = 1.0
        elif 2 * tp + fp + fn == 0:
            scores[c] = 0.0
        else:
            scores[c] = 2.0 * tp / (2.0 * tp + fp + fn)
    return float(scores.mean())


def ece(probs, labels, n_bins: int = 15) -> float:
    """Expected calibration error over equal-width confidence bins.

    Confidence is the max probability; bin b covers (b/B, (b+1)/B] with
    right-inclusive edges, so confidence 1.0 falls in the last bin.
    Empty bins contribute nothing.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    probs = _check_probs(probs)
    labels = as_labels(labels, "labels", n_rows=probs.shape[0])
    conf = probs.max(axis=1)
    correct = (predicted_classes(probs) == labels).astype(np.float64)
    idx = np.clip(np.ceil(conf * n_bins).astype(np.int64) - 1, 0, n_bins - 1)
    n = conf.shape[0]
    total = 0.0
    for b in range(n_bins):
        sel = idx == b
        cnt = int(sel.sum())
        if cnt == 0:
            continue
        total += (cnt / n) * abs(correct[sel].mean() - conf[sel].mean())
    return float(total)


def brier(probs, labels) -> float:
    """Mean squared distance between the probability row and the one-hot label."""
    probs = _check_probs(probs)
    labels = as_labels(labels, "labels", n_rows=probs.shape[0])
    onehot = np.zeros_like(probs)
    onehot[np.arange(probs.shape[0]), labels] = 1.0
    return float(((probs - onehot) ** 2).sum(axis=1).mean())


def predictive_entropy(probs) -> np.ndarray:
    """Per-row Shannon entropy in nats, with 0*log(0) = 0."""
    probs = _check_probs(probs)
    plogp = np.where(probs > 0, probs * np.log(np.maximum(probs, 1e-300)), 0.0)
    return -plogp.sum(axis=1)


def average_ranks(x) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    new_group = np.concatenate([[True], sx[1:] != sx[:-1]]) if x.size else np.empty(0, bool)
    gid = np.cumsum(new_group) - 1
    counts = np.bincount(gid) if x.size else np.empty(0, np.int64)
    ends = np.cumsum(counts)
    starts = ends - counts
    avg = (starts + 1 + ends) / 2.0
    ranks = np.empty_like(sx)
    ranks[order] = avg[gid]
    return ranks


def ood_auroc(id_scores, ood_scores) -> float:
    """Probability an OOD sample scores above an ID sample (ties count half).

    Rank-sum (Mann-Whitney) formulation with average ranks for ties;
    OOD is the positive class and higher scores mean more uncertain.
    """
    a = np.asarray(id_scores, dtype=np.float64).reshape(-1)
    b = np.asarray(ood_scores, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("both score vectors must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("scores must be finite")
    ranks = average_ranks(np.concatenate([a, b]))
    r_ood = ranks[a.size :].sum()
    n_ood = b.size
    return float((r_ood - n_ood * (n_ood + 1) / 2.0) / (a.size * n_ood))


def spearman_rank_correlation(x, y) -> float:
    """Pearson correlation of average ranks (0.0 when either side is constant)."""
    rx = average_ranks(x)
    ry = average_ranks(y)
    if rx.shape != ry.shape:
        raise ValueError("x and y must have equal length")
    sx = rx.std()
    sy = ry.std()
    if sx == 0 or sy == 0:
        return 0.0
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


@dataclass(frozen=True)
class EntropySummary:
    mean: float
    counts: np.ndarray  # (n_bins,) histogram counts
    edges: np.ndarray  # (n_bins + 1,) fixed edges on [0, log(K)]


def entropy_summary(probs, n_bins: int = 30) -> EntropySummary:
    """Mean predictive entropy plus a fixed-range histogram on [0, log K]."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    probs = _check_probs(probs)
    ent = predictive_entropy(probs)
    hi = float(np.log(probs.shape[1]))
    edges = np.linspace(0.0, hi, n_bins + 1)
    counts, _ = np.histogram(np.clip(ent, 0.0, hi), bins=edges)
    return EntropySummary(float(ent.mean()), counts.astype(np.int64), edges)


# ---------------------------------------------------------------------------
# records and aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricRecord:
    method: str
    dataset_tag: str
    seed: int
    metric_name: str
    value: float


@dataclass(frozen=True)
class AggregateRecord:
    method: str
    dataset_tag: str
    metric_name: str
    mean: float
    std: float  # population (ddof=0)
    n_seeds: int


def aggregate(records) -> list[AggregateRecord]:
    """Group records by (method, dataset_tag, metric_name); mean and population std."""
    groups: dict[tuple[str, str, str], list[float]] = {}
    for r in records:
        groups.setdefault((r.method, r.dataset_tag, r.metric_name), []).append(r.value)
    out = []
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=np.float64)
        out.append(
            AggregateRecord(
                key[0], key[1], key[2], float(vals.mean()), float(vals.std()), vals.size
            )
        )
    return out


def format_mean_std(mean: float, std: float) -> str:
    """Render as e.g. '0.984 ± 0.003' (three decimals)."""
    return f"{mean:.3f} ± {std:.3f}"


def metrics_to_csv(path, records) -> None:
    recs = sorted(records, key=lambda r: (r.method, r.dataset_tag, r.seed, r.metric_name))
    lines = ["method,dataset_tag,seed,metric_name,value"]
    for r in recs:
        lines.append(f"{r.method},{r.dataset_tag},{r.seed},{r.metric_name},{r.value:.17g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def metrics_from_csv(path) -> list[MetricRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "method,dataset_tag,seed,metric_name,value":
        raise ValueError(f"{path}: not a metrics CSV")
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        method, tag, seed, name, value = line.split(",")
        out.append(MetricRecord(method, tag, int(seed), name, float(value)))
    return out


def aggregates_to_csv(path, aggs) -> None:
    lines = ["method,dataset_tag,metric_name,mean,std,n_seeds,formatted"]
    for a in aggs:
        lines.append(
            f"{a.method},{a.dataset_tag},{a.metric_name},"
            f"{a.mean:.17g},{a.std:.17g},{a.n_seeds},{format_mean_std(a.mean, a.std)}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
