"""Frechet distance between Gaussian moment summaries of embeddings.

Embeddings are the trained model's own encoder output (penultimate
features), so the distances index distribution shift as the model sees
it; absolute values are not comparable across encoders, orderings are.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .validation import as_matrix


@dataclass(frozen=True)
class MomentSummary:
    mean: np.ndarray  # (d,)
    cov: np.ndarray  # (d, d), symmetrized sample covariance


def fit_moments(X) -> MomentSummary:
    """Mean and 1/(n-1) covariance, symmetrized as (C + C^T) / 2."""
    X = as_matrix(X, "X", min_rows=2)
    n, d = X.shape
    if n < d + 1:
        warnings.warn(
            f"covariance of {n} samples in {d} dimensions is rank-deficient",
            stacklevel=2,
        )
    mu = X.mean(axis=0)
    Z = X - mu
    C = (Z.T @ Z) / (n - 1)
    return MomentSummary(mu, 0.5 * (C + C.T))


def sqrtm_psd(A, *, asym_tol: float = 1e-6) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues driven slightly negative by rounding are clamped to
    zero.  Asymmetry beyond ``asym_tol`` (max abs difference) is an
    error rather than something to silently average away.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got {A.shape}")
    if np.max(np.abs(A - A.T)) > asym_tol:
        raise ValueError("A is not symmetric within tolerance")
    w, Q = np.linalg.eigh(0.5 * (A + A.T))
    w = np.maximum(w, 0.0)
    return (Q * np.sqrt(w)) @ Q.T


def frechet_distance(a: MomentSummary, b: MomentSummary) -> float:
    """||mu_a - mu_b||^2 + tr(C_a + C_b - 2 (C_a^1/2 C_b C_a^1/2)^1/2).

    The symmetric-product form keeps the inner matrix PSD, so no complex
    arithmetic appears.  Rounding can push the result slightly below
    zero — near-singular covariances (embeddings on a low-dimensional
    manifold) lose about half the float mantissa through the square
    roots, so errors up to ~1e-6 of the trace scale are legitimate.
    Values in [-1e-6, 0) clamp to 0; anything more negative is treated
    as a numerical failure.
    """
    if a.mean.shape != b.mean.shape:
        raise ValueError("moment summaries have mismatched dimensions")
    dmu = a.mean - b.mean
    ra = sqrtm_psd(a.cov)
    inner = sqrtm_psd(ra @ b.cov @ ra)
    d2 = float(dmu @ dmu + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(inner))
    if d2 < 0:
        if d2 < -1e-6:
            raise ValueError(f"Frechet distance came out negative ({d2:.3e})")
        d2 = 0.0
    return d2


def dataset_fid(embed_fn, features_a, features_b) -> float:
    """Frechet distance between two feature sets under one embedding map.

    ``embed_fn`` maps raw feature rows to embedding rows (typically a
    fitted classifier's ``hidden_features``).  Both inputs must already
    be standardized the way the model expects.
    """
    ea = as_matrix(embed_fn(features_a), "embeddings_a", min_rows=2)
    eb = as_matrix(embed_fn(features_b), "embeddings_b", min_rows=2)
    if ea.shape[1] != eb.shape[1]:
        raise ValueError("embeddings disagree on dimension")
    return frechet_distance(fit_moments(ea), fit_moments(eb))
