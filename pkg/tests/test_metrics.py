"""Classification and uncertainty metrics against brute-force oracles."""

from __future__ import annotations

import numpy as np
import pytest

import sngpkit as sk
from sngpkit.metrics import METRIC_NAMES, predicted_classes

from reference_impls import (
    accuracy_reference,
    auroc_reference,
    brier_reference,
    ece_reference,
    entropy_reference,
    f1_macro_reference,
    mean_std_reference,
    spearman_reference,
)


def random_probs(rng, n, k):
    raw = rng.random((n, k)) + 1e-9
    return raw / raw.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# oracle agreement
# ---------------------------------------------------------------------------


def test_accuracy_f1_ece_brier_match_oracles(rng):
    for _ in range(25):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(5, 60))
        probs = random_probs(rng, n, k)
        labels = rng.integers(0, k, size=n)
        assert sk.accuracy(probs, labels) == pytest.approx(
            accuracy_reference(probs, labels), abs=1e-12
        )
        assert sk.f1_macro(probs, labels) == pytest.approx(
            f1_macro_reference(probs, labels, k), abs=1e-12
        )
        assert sk.ece(probs, labels, 15) == pytest.approx(
            ece_reference(probs.tolist(), labels.tolist(), 15), abs=1e-12
        )
        assert sk.brier(probs, labels) == pytest.approx(
            brier_reference(probs, labels), abs=1e-12
        )


def test_argmax_tie_goes_to_lowest_class():
    probs = np.array([[0.4, 0.4, 0.2], [0.2, 0.4, 0.4]])
    assert predicted_classes(probs).tolist() == [0, 1]


def test_f1_macro_conventions():
    # Class 2 never appears in truth or prediction -> scores 1.0.
    probs = np.array([[0.9, 0.1, 0.0], [0.1, 0.9, 0.0]])
    labels = np.array([0, 1])
    assert sk.f1_macro(probs, labels) == pytest.approx(1.0)
    # Class 1 exists in truth but never predicted -> F1_1 = 0.
    probs = np.array([[0.9, 0.1], [0.9, 0.1]])
    labels = np.array([0, 1])
    # class0: tp=1 fp=1 fn=0 -> 2/3; class1: tp=0 fp=0 fn=1 -> 0.
    assert sk.f1_macro(probs, labels) == pytest.approx((2.0 / 3.0) / 2.0)


def test_ece_bins_are_right_inclusive():
    # Confidence exactly on a boundary belongs to the lower bin:
    # with 2 bins, 0.5 lands in bin 0.
    probs = np.array([[0.5, 0.5]])
    labels = np.array([0])
    # one sample, conf 0.5, acc 1 (tie predicts class 0) -> |1 - 0.5| = 0.5
    assert sk.ece(probs, labels, 2) == pytest.approx(0.5, abs=1e-15)


def test_ece_perfectly_calibrated_is_zero():
    probs = np.array([[1.0, 0.0]] * 10)
    labels = np.zeros(10, dtype=int)
    assert sk.ece(probs, labels) == pytest.approx(0.0, abs=1e-15)


def test_ood_auroc_matches_pairwise_oracle_with_ties(rng):
    for _ in range(25):
        n_id = int(rng.integers(2, 30))
        n_ood = int(rng.integers(2, 30))
        # Quantized scores force plenty of exact ties.
        id_scores = rng.integers(0, 5, size=n_id) / 5.0
        ood_scores = rng.integers(0, 5, size=n_ood) / 5.0
        assert sk.ood_auroc(id_scores, ood_scores) == pytest.approx(
            auroc_reference(id_scores, ood_scores), abs=1e-12
        )


def test_ood_auroc_extremes():
    assert sk.ood_auroc([0.1, 0.2], [0.8, 0.9]) == pytest.approx(1.0)
    assert sk.ood_auroc([0.8, 0.9], [0.1, 0.2]) == pytest.approx(0.0)
    assert sk.ood_auroc([0.5], [0.5]) == pytest.approx(0.5)


def test_ood_auroc_validation():
    with pytest.raises(ValueError):
        sk.ood_auroc([], [0.5])
    with pytest.raises(ValueError):
        sk.ood_auroc([0.5], [np.nan])


def test_predictive_entropy_matches_oracle(rng):
    probs = random_probs(rng, 40, 4)
    got = sk.predictive_entropy(probs)
    for row, e in zip(probs, got):
        assert e == pytest.approx(entropy_reference(row), abs=1e-12)
    # A hard one-hot row has zero entropy (0 ln 0 := 0).
    assert sk.predictive_entropy(np.array([[1.0, 0.0]]))[0] == 0.0


def test_spearman_matches_oracle_and_constant_rule(rng):
    for _ in range(20):
        n = int(rng.integers(3, 25))
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.integers(0, 6, size=n).astype(float)
        assert sk.spearman_rank_correlation(x, y) == pytest.approx(
            spearman_reference(x.tolist(), y.tolist()), abs=1e-12
        )
    assert sk.spearman_rank_correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0
    assert sk.spearman_rank_correlation([1.0, 2.0], [3.0, 9.0]) == pytest.approx(1.0)


def test_entropy_summary_bins_cover_zero_to_log_k(rng):
    probs = random_probs(rng, 200, 3)
    summary = sk.entropy_summary(probs, n_bins=30)
    assert summary.edges[0] == 0.0
    assert summary.edges[-1] == pytest.approx(np.log(3))
    assert summary.counts.sum() == 200
    assert summary.mean == pytest.approx(float(sk.predictive_entropy(probs).mean()))


# ---------------------------------------------------------------------------
# records and aggregation
# ---------------------------------------------------------------------------


def test_aggregate_matches_two_pass_oracle(rng):
    records = []
    values = {}
    for seed in range(7):
        v = float(rng.random())
        records.append(sk.MetricRecord("sngp", "id", seed, "accuracy", v))
        values.setdefault(("sngp", "id", "accuracy"), []).append(v)
    for seed in range(3):
        v = float(rng.random())
        records.append(sk.MetricRecord("baseline", "ring", seed, "ood_auroc", v))
        values.setdefault(("baseline", "ring", "ood_auroc"), []).append(v)
    aggs = sk.aggregate(records)
    assert [(a.method, a.dataset_tag, a.metric_name) for a in aggs] == sorted(values)
    for a in aggs:
        mean, std = mean_std_reference(values[(a.method, a.dataset_tag, a.metric_name)])
        assert a.mean == pytest.approx(mean, abs=1e-12)
        assert a.std == pytest.approx(std, abs=1e-12)  # population std
        assert a.n_seeds == len(values[(a.method, a.dataset_tag, a.metric_name)])


def test_format_mean_std():
    assert sk.format_mean_std(0.1234, 0.0456) == "0.123 ± 0.046"


def test_metric_names_registry():
    for name in ("accuracy", "f1_macro", "ece", "brier", "ood_auroc", "latency_ms"):
        assert name in METRIC_NAMES


def test_metrics_csv_round_trip(tmp_path):
    records = [
        sk.MetricRecord("sngp", "id", 0, "accuracy", 0.987654321),
        sk.MetricRecord("baseline", "ring", 2, "ood_auroc", 1.0 / 3.0),
    ]
    path = tmp_path / "metrics.csv"
    sk.metrics_to_csv(path, records)
    back = sk.metrics_from_csv(path)
    key = lambda r: (r.method, r.dataset_tag, r.seed, r.metric_name)
    assert sorted(back, key=key) == sorted(records, key=key)  # exact floats via %.17g
    header = path.read_text().splitlines()[0]
    assert header == "method,dataset_tag,seed,metric_name,value"


def test_probability_validation_rejects_bad_rows():
    with pytest.raises(ValueError):
        sk.accuracy(np.array([[0.7, 0.7]]), np.array([0]))
    with pytest.raises(ValueError):
        sk.brier(np.array([[1.2, -0.2]]), np.array([0]))
