"""Dataset generators, standardization, splits, and CSV persistence."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sngpkit as sk
from sngpkit.data import STD_FLOOR, allocate_counts
from sngpkit.exceptions import CsvFormatError

from reference_impls import allocate_counts_reference, moon_arc_residual


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def test_two_moons_shapes_and_balance():
    ds = sk.gen_two_moons(1000, 0.1, seed=0)
    assert ds.features.shape == (1000, 2)
    assert ds.labels.shape == (1000,)
    assert ds.n_classes == 2
    assert ds.class_names == ["moon_upper", "moon_lower"]
    assert int((ds.labels == 0).sum()) == 500
    ds_odd = sk.gen_two_moons(1001, 0.1, seed=0)
    assert int((ds_odd.labels == 0).sum()) == 501  # extra point goes to class 0


def test_two_moons_noiseless_points_lie_on_unit_arcs():
    ds = sk.gen_two_moons(400, 0.0, seed=3)
    for (x, y), label in zip(ds.features, ds.labels):
        assert moon_arc_residual(x, y, label) < 1e-12
    upper = ds.features[ds.labels == 0]
    lower = ds.features[ds.labels == 1]
    assert np.all(upper[:, 1] >= -1e-12)  # upper arc has y >= 0
    assert np.all(lower[:, 1] <= 0.5 + 1e-12)


def test_two_moons_noise_scale_and_determinism():
    a = sk.gen_two_moons(500, 0.1, seed=11)
    b = sk.gen_two_moons(500, 0.1, seed=11)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    resid = [moon_arc_residual(x, y, c) for (x, y), c in zip(a.features, a.labels)]
    # Radial residual of an isotropic 0.1-sigma cloud ~ half-normal.
    assert 0.02 < float(np.mean(resid)) < 0.25


def test_gaussian_blobs_counts_and_centers():
    centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    ds = sk.gen_gaussian_blobs(centers, 0.5, 100, seed=0)
    assert ds.n_samples == 300
    assert ds.n_classes == 3
    assert ds.class_names == ["blob_0", "blob_1", "blob_2"]
    for k, c in enumerate(centers):
        pts = ds.features[ds.labels == k]
        assert pts.shape[0] == 100
        assert np.linalg.norm(pts.mean(axis=0) - np.asarray(c)) < 0.3


def test_gaussian_blobs_rejects_single_center_and_warns_on_duplicates():
    with pytest.raises(ValueError):
        sk.gen_gaussian_blobs([(0.0, 0.0)], 1.0, 10, seed=0)
    with pytest.warns(UserWarning):
        sk.gen_gaussian_blobs([(0.0, 0.0), (0.0, 0.0)], 1.0, 10, seed=0)


def test_ood_ring_geometry():
    ds = sk.gen_ood_ring(2000, radius=5.0, width=1.0, center=(0.5, 0.25), seed=4)
    assert ds.domain_tag == "ood_ring"
    assert np.all(ds.labels == 0)
    assert ds.class_names == ["ood"]
    dist = np.linalg.norm(ds.features - np.array([0.5, 0.25]), axis=1)
    assert np.all(dist >= 5.0 - 0.5 - 1e-12)
    assert np.all(dist <= 5.0 + 0.5 + 1e-12)
    exact = sk.gen_ood_ring(100, radius=2.0, seed=4)  # width 0 -> exact circle
    d = np.linalg.norm(exact.features, axis=1)
    assert np.allclose(d, 2.0, atol=1e-12)


def test_ood_ring_validation():
    with pytest.raises(ValueError):
        sk.gen_ood_ring(0, 1.0)
    with pytest.raises(ValueError):
        sk.gen_ood_ring(10, -1.0)
    with pytest.raises(ValueError):
        sk.gen_ood_ring(10, 1.0, center=(0.0, 0.0, 0.0))


def test_dataset_validates_labels():
    with pytest.raises(ValueError):
        sk.Dataset(np.zeros((3, 2)), np.array([0, 1, 5]), ["a", "b"])


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------


def test_standardizer_zero_mean_unit_std(rng):
    X = rng.normal(3.0, 2.5, size=(500, 4))
    scaler = sk.Standardizer().fit(X)
    Z = scaler.transform(X)
    assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(Z.std(axis=0), 1.0, atol=1e-12)  # population std
    back = scaler.inverse_transform(Z)
    assert np.allclose(back, X, atol=1e-12)


def test_standardizer_constant_column_maps_to_exact_zero():
    X = np.column_stack([np.full(50, 7.25), np.arange(50, dtype=float)])
    scaler = sk.Standardizer().fit(X)
    Z = scaler.transform(X)
    assert np.all(Z[:, 0] == 0.0)
    assert scaler.std_[0] == STD_FLOOR


def test_standardize_applies_train_statistics_to_other_splits():
    ds = sk.gen_two_moons(600, 0.1, seed=1)
    train, val, test = sk.stratified_split(ds, (0.8, 0.1, 0.1), seed=1)
    train_std, scaler = sk.standardize(train)
    val_std = sk.apply_standardization(val, scaler)
    assert np.allclose(train_std.features.mean(axis=0), 0.0, atol=1e-12)
    # The val split keeps the train transform, not its own statistics.
    expected = (val.features - scaler.mean_) / scaler.std_
    assert np.array_equal(val_std.features, expected)


# ---------------------------------------------------------------------------
# split allocation
# ---------------------------------------------------------------------------


def test_allocate_counts_reference_example():
    # 7 samples at (0.5, 0.25, 0.25) must split 4/1/2: cumulative
    # boundaries are round(3.5)=4 (half to even), round(5.25)=5, then 7.
    assert list(allocate_counts(7, (0.5, 0.25, 0.25))) == [4, 1, 2]


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=60),
    weights=st.lists(st.integers(min_value=1, max_value=9), min_size=2, max_size=5),
)
def test_allocate_counts_matches_bankers_round_oracle(n, weights):
    fractions = [w / sum(weights) for w in weights]
    got = list(allocate_counts(n, fractions))
    assert got == allocate_counts_reference(n, fractions)
    assert sum(got) == n
    assert all(c >= 0 for c in got)


def test_stratified_split_partitions_each_class():
    ds = sk.gen_two_moons(1000, 0.1, seed=9)
    train, val, test = sk.stratified_split(ds, (0.8, 0.1, 0.1), seed=9)
    assert train.n_samples + val.n_samples + test.n_samples == 1000
    for part in (train, val, test):
        assert int((part.labels == 0).sum()) == part.n_samples // 2
    # Partition: every original row appears exactly once across parts.
    all_rows = np.concatenate([train.features, val.features, test.features])
    assert np.array_equal(
        np.sort(all_rows.view([("x", float), ("y", float)]).ravel(), order=("x", "y")),
        np.sort(ds.features.view([("x", float), ("y", float)]).ravel(), order=("x", "y")),
    )


def test_stratified_split_deterministic_and_seed_sensitive():
    ds = sk.gen_two_moons(300, 0.1, seed=2)
    a = sk.stratified_split(ds, (0.8, 0.1, 0.1), seed=5)
    b = sk.stratified_split(ds, (0.8, 0.1, 0.1), seed=5)
    c = sk.stratified_split(ds, (0.8, 0.1, 0.1), seed=6)
    assert np.array_equal(a[0].features, b[0].features)
    assert not np.array_equal(a[0].features, c[0].features)


def test_stratified_split_rejects_class_too_small_for_parts():
    ds = sk.Dataset(np.arange(8, dtype=float).reshape(4, 2), np.array([0, 0, 0, 1]), ["a", "b"])
    with pytest.raises(ValueError):
        sk.stratified_split(ds, (0.4, 0.3, 0.3), seed=0)


def test_stratified_holdout_properties():
    y = np.array([0] * 40 + [1] * 60)
    keep, held = sk.stratified_holdout(y, 0.25, seed=0)
    assert sorted(np.concatenate([keep, held]).tolist()) == list(range(100))
    assert held.size == 25
    assert int((y[held] == 0).sum()) == 10  # stratified: 25% of each class
    keep2, held2 = sk.stratified_holdout(y, 0.25, seed=0)
    assert np.array_equal(held, held2)


def test_draw_subset():
    ds = sk.gen_two_moons(100, 0.1, seed=0)
    sub = sk.draw_subset(ds, 30, seed=1)
    assert sub.n_samples == 30
    rows = {tuple(r) for r in ds.features}
    assert all(tuple(r) in rows for r in sub.features)
    again = sk.draw_subset(ds, 30, seed=1)
    assert np.array_equal(sub.features, again.features)
    with pytest.raises(ValueError):
        sk.draw_subset(ds, 101, seed=0)


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------


def test_dataset_csv_round_trip_is_bitwise(tmp_path):
    ds = sk.gen_two_moons(57, 0.1, seed=13)
    path = tmp_path / "moons.csv"
    sk.save_dataset_csv(path, ds)
    back = sk.load_dataset_csv(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)
    assert back.class_names == ds.class_names
    assert back.domain_tag == ds.domain_tag
    assert back.seed == ds.seed


def test_dataset_csv_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("f0,f1,label\n1.0,2.0,0\n1.0,oops,1\n")
    with pytest.raises(CsvFormatError, match="line 3"):
        sk.load_dataset_csv(path)
    path.write_text("f0,f1,label\n1.0,2.0\n")
    with pytest.raises(CsvFormatError, match="line 2"):
        sk.load_dataset_csv(path)
    path.write_text("")
    with pytest.raises(CsvFormatError):
        sk.load_dataset_csv(path)
    path.write_text("f0,f1,label\n1.0,2.0,0.5\n")
    with pytest.raises(CsvFormatError, match="line 2"):
        sk.load_dataset_csv(path)
