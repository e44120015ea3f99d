"""Synthetic datasets, standardization, stratified splitting, and CSV I/O.

Every generator is a pure function of its arguments: the same seed gives
bit-identical arrays (see :mod:`sngpkit.rng` for the generator contract).
Datasets travel as a small record of (features, labels, class names,
domain tag, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import CsvFormatError
from .rng import STREAM_SPLIT, derive_seed, make_rng, normals
from .validation import as_labels, as_matrix, check_fitted

STD_FLOOR = 1e-8


@dataclass
class Dataset:
    """Feature matrix plus integer labels and sidecar metadata.

    Invariants checked at construction: one label per row, labels in
    [0, len(class_names)), finite float64 features.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: list[str] = field(default_factory=list)
    domain_tag: str = "id"
    seed: int = 0

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.labels = as_labels(self.labels, "labels", n_rows=self.features.shape[0])
        if not self.class_names:
            k = int(self.labels.max()) + 1 if self.labels.size else 1
            self.class_names = [f"class_{i}" for i in range(k)]
        self.class_names = [str(c) for c in self.class_names]
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise ValueError("labels must lie in [0, n_classes)")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_two_moons(n: int, noise_sigma: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half-circles with isotropic Gaussian noise.

    Class 0 is the upper moon (cos t, sin t), class 1 the lower moon
    (1 - cos t, 0.5 - sin t), t uniform on [0, pi].  For odd ``n`` the
    extra point goes to class 0.  With ``noise_sigma == 0`` every point
    lies exactly on its moon.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    rng = make_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    t0 = rng.random(n0) * np.pi
    t1 = rng.random(n1) * np.pi
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    pts = np.vstack([upper, lower])
    pts = pts + noise_sigma * normals(rng, pts.shape)
    labels = np.concatenate([np.zeros(n0, np.int64), np.ones(n1, np.int64)])
    return Dataset(pts, labels, ["moon_upper", "moon_lower"], "id", seed)


def gen_gaussian_blobs(
    centers, sigma: float, n_per_class: int, seed: int = 0
) -> Dataset:
    """Isotropic Gaussian blobs, one class per center row."""
    C = as_matrix(centers, "centers")
    k, d = C.shape
    if k < 2:
        raise ValueError(f"need at least 2 centers, got {k}")
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    if len(np.unique(C, axis=0)) < k:
        import warnings

        warnings.warn("duplicate blob centers: classes will overlap", stacklevel=2)
    rng = make_rng(seed)
    blocks = [C[i] + sigma * normals(rng, (n_per_class, d)) for i in range(k)]
    labels = np.repeat(np.arange(k, dtype=np.int64), n_per_class)
    names = [f"blob_{i}" for i in range(k)]
    return Dataset(np.vstack(blocks), labels, names, "id", seed)


def gen_ood_ring(
    n: int, radius: float, width: float = 0.0, center=(0.0, 0.0), seed: int = 0
) -> Dataset:
    """Annulus of out-of-distribution points around ``center`` (2-D only).

    Angles are uniform on [0, 2*pi); radial distance uniform on
    [radius - width/2, radius + width/2].  Labels are a constant 0
    sentinel with a single "ood" class name.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if radius <= 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    if width < 0:
        raise ValueError(f"width must be >= 0, got {width}")
    c = np.asarray(center, dtype=np.float64).reshape(-1)
    if c.shape[0] != 2:
        raise ValueError("ring center must be 2-D")
    rng = make_rng(seed)
    ang = rng.random(n) * (2.0 * np.pi)
    r = radius + (rng.random(n) - 0.5) * width
    pts = np.column_stack([c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)])
    return Dataset(pts, np.zeros(n, np.int64), ["ood"], "ood_ring", seed)


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-feature affine map to zero mean and unit population std.

    The scale is the population standard deviation (ddof=0) floored at
    ``STD_FLOOR`` so constant columns never divide by zero.  A column
    whose values are all exactly equal stores that value as its mean, so
    the transformed column is exactly zero.

    Attributes
    ----------
    mean_ : ndarray of shape (n_features,)
    std_ : ndarray of shape (n_features,)
        Floored population standard deviation.
    """

    def fit(self, X, y=None):
        X = as_matrix(X, "X", min_rows=2)
        mean = X.mean(axis=0)
        constant = X.max(axis=0) == X.min(axis=0)
        if constant.any():
            mean = np.where(constant, X[0], mean)
        std = np.sqrt(np.mean((X - mean) ** 2, axis=0))
        self.mean_ = mean
        self.std_ = np.maximum(std, STD_FLOOR)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_fitted(self, ["mean_", "std_"])
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, Standardizer was fit with {self.n_features_in_}"
            )
        return (X - self.mean_) / self.std_

    def inverse_transform(self, X):
        check_fitted(self, ["mean_", "std_"])
        X = as_matrix(X, "X")
        return X * self.std_ + self.mean_


def standardize(train: Dataset) -> tuple[Dataset, Standardizer]:
    """Fit a Standardizer on ``train`` and return (transformed train, stats)."""
    scaler = Standardizer().fit(train.features)
    return apply_standardization(train, scaler), scaler


def apply_standardization(ds: Dataset, scaler: Standardizer) -> Dataset:
    """Apply previously fitted standardization stats to a dataset."""
    return replace(ds, features=scaler.transform(ds.features))


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def allocate_counts(n: int, fractions) -> list[int]:
    """Partition ``n`` items into len(fractions) groups.

    Group boundaries are the cumulative fractions times ``n``, rounded
    half-to-even; counts are consecutive differences.  Counts are
    nonnegative, sum to ``n``, and each is within 1 of ``n * fraction``.
    """
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.ndim != 1 or fr.size < 1:
        raise ValueError("fractions must be a 1-D sequence")
    if np.any(fr < 0) or np.any(fr > 1):
        raise ValueError(f"fractions must lie in [0, 1], got {fr.tolist()}")
    if abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1 within 1e-9, got sum {fr.sum()!r}")
    bounds = np.round(np.cumsum(fr) * n).astype(np.int64)
    bounds[-1] = n
    counts = np.diff(bounds, prepend=0)
    return [int(c) for c in counts]


def stratified_split(
    ds: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0
) -> tuple[Dataset, ...]:
    """Split a dataset into per-class proportional parts (train/val/test).

    Each class's rows are shuffled with a seeded generator and cut by
    :func:`allocate_counts`; the parts are then concatenated across
    classes and shuffled once more per part.  Every class must have at
    least as many samples as there are nonzero fractions.
    """
    fr = list(fractions)
    n_parts = len(fr)
    n_nonzero = sum(1 for f in fr if f > 0)
    rng = make_rng(derive_seed(seed, STREAM_SPLIT))
    part_indices: list[list[np.ndarray]] = [[] for _ in range(n_parts)]
    classes = np.unique(ds.labels)
    for cls in classes:
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size < n_nonzero:
            raise ValueError(
                f"class {cls} has {idx.size} samples, fewer than the "
                f"{n_nonzero} nonzero split fractions"
            )
        idx = idx[rng.permutation(idx.size)]
        counts = allocate_counts(idx.size, fr)
        start = 0
        for part, cnt in enumerate(counts):
            part_indices[part].append(idx[start : start + cnt])
            start += cnt
    out = []
    for part in range(n_parts):
        merged = np.concatenate(part_indices[part]) if part_indices[part] else np.empty(0, np.int64)
        merged = merged[rng.permutation(merged.size)]
        out.append(
            replace(ds, features=ds.features[merged], labels=ds.labels[merged])
        )
    return tuple(out)


def stratified_holdout(y: np.ndarray, fraction: float, seed: int = 0):
    """Index split (keep, held_out) with a per-class proportional held-out part.

    Same shuffling and allocation rule as :func:`stratified_split` with
    fractions (1 - fraction, fraction).
    """
    if not 0 < fraction < 1:
        raise ValueError(f"holdout fraction must lie in (0, 1), got {fraction}")
    y = as_labels(y, "y")
    rng = make_rng(derive_seed(seed, STREAM_SPLIT))
    keep_parts, held_parts = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < 2:
            raise ValueError(f"class {cls} has {idx.size} samples, needs at least 2")
        idx = idx[rng.permutation(idx.size)]
        n_keep, _ = allocate_counts(idx.size, (1.0 - fraction, fraction))
        keep_parts.append(idx[:n_keep])
        held_parts.append(idx[n_keep:])
    keep = np.concatenate(keep_parts)
    held = np.concatenate(held_parts)
    return keep[rng.permutation(keep.size)], held[rng.permutation(held.size)]


def draw_subset(ds: Dataset, n: int, seed: int = 0) -> Dataset:
    """Deterministically draw ``n`` distinct rows (for fixed-size eval draws)."""
    if n > ds.n_samples:
        raise ValueError(
            f"cannot draw {n} samples from a dataset of {ds.n_samples}"
        )
    idx = make_rng(seed).permutation(ds.n_samples)[:n]
    return replace(ds, features=ds.features[idx], labels=ds.labels[idx])


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_dataset_csv(path, ds: Dataset) -> None:
    """Write ``f0,...,fD-1,label`` rows with metadata header comments.

    Floats are written with 17 significant digits, so reading the file
    back reproduces the exact float64 values.
    """
    d = ds.n_features
    lines = [
        f"# class_names: {json.dumps(ds.class_names)}",
        f"# domain_tag: {ds.domain_tag}",
        f"# seed: {ds.seed}",
        ",".join([f"f{j}" for j in range(d)] + ["label"]),
    ]
    for row, lab in zip(ds.features, ds.labels):
        lines.append(",".join([_fmt(v) for v in row] + [str(int(lab))]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset_csv`.

    Raises CsvFormatError naming the offending 1-based line for ragged
    rows, non-numeric features, non-integer labels, or a missing header.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    meta: dict[str, str] = {}
    header_at = None
    for i, line in enumerate(raw):
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                meta[key.strip()] = val.strip()
            continue
        if line.strip() == "":
            continue
        header_at = i
        break
    if header_at is None:
        raise CsvFormatError("no header row found")
    header = raw[header_at].split(",")
    if header[-1] != "label" or any(
        h != f"f{j}" for j, h in enumerate(header[:-1])
    ):
        raise CsvFormatError(
            f"header must be f0,...,fD-1,label, got {raw[header_at]!r}",
            line=header_at + 1,
        )
    d = len(header) - 1
    feats: list[list[float]] = []
    labels: list[int] = []
    for i in range(header_at + 1, len(raw)):
        line = raw[i]
        if line.strip() == "":
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise CsvFormatError(
                f"expected {d + 1} fields, got {len(parts)}", line=i + 1
            )
        try:
            feats.append([float(p) for p in parts[:-1]])
        except ValueError:
            raise CsvFormatError(f"non-numeric feature value in {line!r}", line=i + 1)
        try:
            labels.append(int(parts[-1]))
        except ValueError:
            raise CsvFormatError(f"non-integer label {parts[-1]!r}", line=i + 1)
    class_names = json.loads(meta["class_names"]) if "class_names" in meta else []
    features = (
        np.asarray(feats, dtype=np.float64)
        if feats
        else np.zeros((0, d), dtype=np.float64)
    )
    return Dataset(
        features,
        np.asarray(labels, dtype=np.int64),
        class_names,
        meta.get("domain_tag", "id"),
        int(meta.get("seed", 0)),
    )
