"""Random-Fourier-feature GP output layer with a Laplace posterior.

The feature map Phi(h) = sqrt(2/D) * cos(h @ W_r.T / lengthscale + b_r),
with W_r ~ N(0, 1) and b_r ~ U[0, 2*pi) drawn once and frozen, gives
E[Phi(x) @ Phi(y)] = exp(-||x - y||^2 / (2 * lengthscale^2)), the RBF
kernel.  Class logits are a linear map beta over Phi; after training, a
single pass over the training set accumulates the Laplace precision

    P = prior_precision * I + sum_i p_i * (1 - p_i) * phi_i phi_i^T

(p_i the max predicted probability, one covariance shared by all
classes), and the predictive variance of a new point is phi^T P^-1 phi.
Logits are shrunk by the mean-field rule logit / sqrt(1 + lam * var)
before the softmax, so far-from-data points decay toward a uniform
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError, PosteriorStateError
from .rng import make_rng, normals
from .validation import as_matrix

MEAN_FIELD_LAMBDA = np.pi / 8.0


@dataclass(frozen=True)
class RFFProjection:
    """Frozen random projection defining the feature map."""

    w: np.ndarray  # (D, hidden) standard normal
    b: np.ndarray  # (D,) uniform phase on [0, 2*pi)
    lengthscale: float

    def __post_init__(self):
        # Derived, not fields: (hidden, D) projection with the lengthscale
        # folded in (one matmul per call) and the cosine amplitude.
        object.__setattr__(
            self, "scaled_wt", np.ascontiguousarray(self.w.T / self.lengthscale)
        )
        object.__setattr__(self, "amp", float(np.sqrt(2.0 / self.w.shape[0])))

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w.shape[1]


def make_rff_projection(
    input_dim: int, rff_dim: int, lengthscale: float, seed: int = 0
) -> RFFProjection:
    if input_dim < 1 or rff_dim < 1:
        raise ValueError(f"dimensions must be >= 1, got ({input_dim}, {rff_dim})")
    if lengthscale <= 0:
        raise ValueError(f"lengthscale must be > 0, got {lengthscale}")
    rng = make_rng(seed)
    w = normals(rng, (rff_dim, input_dim))
    b = rng.random(rff_dim) * (2.0 * np.pi)
    return RFFProjection(w, b, float(lengthscale))


def rff_features(H, proj: RFFProjection, return_arg: bool = False):
    """Map hidden features to Phi; optionally also return the cos argument.

    Each row of Phi has squared norm at most 2 (entries are bounded by
    sqrt(2/D) in magnitude).
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != proj.input_dim:
        raise ValueError(
            f"H must be 2-D with {proj.input_dim} columns, got shape {H.shape}"
        )
    arg = H @ proj.scaled_wt + proj.b
    phi = proj.amp * np.cos(arg)
    return (phi, arg) if return_arg else phi


def gp_logits(phi: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Class logits Phi @ beta.T; beta is (n_classes, D) with n_classes >= 2."""
    if beta.ndim != 2 or beta.shape[0] < 2:
        raise ValueError("beta must be (n_classes, D) with n_classes >= 2")
    if phi.shape[1] != beta.shape[1]:
        raise ValueError(
            f"phi has {phi.shape[1]} features, beta expects {beta.shape[1]}"
        )
    return phi @ beta.T


class LaplacePosterior:
    """Class-agnostic Laplace covariance over the RFF weight space.

    Lifecycle: construct -> accumulate(phi, probs) any number of times ->
    finalize() exactly once -> predictive_variance(phi).  Calls out of
    order raise PosteriorStateError.
    """

    def __init__(self, dim: int, prior_precision: float = 1e-3):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if prior_precision <= 0:
            raise ValueError(f"prior_precision must be > 0, got {prior_precision}")
        self.dim = int(dim)
        self.prior_precision = float(prior_precision)
        self.precision = np.zeros((dim, dim), dtype=np.float64)
        self.covariance = None
        self.finalized = False

    def accumulate(self, phi, probs) -> None:
        """Add sum_i p_i (1 - p_i) phi_i phi_i^T, p_i = max predicted prob."""
        if self.finalized:
            raise PosteriorStateError("cannot accumulate after finalize()")
        phi = as_matrix(phi, "phi")
        probs = as_matrix(probs, "probs")
        if phi.shape[0] != probs.shape[0]:
            raise ValueError("phi and probs must have the same number of rows")
        if phi.shape[1] != self.dim:
            raise ValueError(f"phi has {phi.shape[1]} columns, expected {self.dim}")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
            raise ValueError("probs rows must sum to 1")
        p = probs.max(axis=1)
        w = p * (1.0 - p)
        G = (phi * w[:, None]).T @ phi
        self.precision += 0.5 * (G + G.T)

    def finalize(self) -> None:
        """Add the prior ridge and invert the precision via Cholesky."""
        if self.finalized:
            raise PosteriorStateError("finalize() called twice")
        self.precision = self.precision + self.prior_precision * np.eye(self.dim)
        try:
            L = np.linalg.cholesky(self.precision)
        except np.linalg.LinAlgError:
            min_eig = float(np.linalg.eigvalsh(self.precision)[0])
            raise NumericalError(
                "posterior precision is not positive definite "
                f"(min eigenvalue ~ {min_eig:.3e})"
            )
        Linv = np.linalg.solve(L, np.eye(self.dim))
        cov = Linv.T @ Linv
        self.covariance = 0.5 * (cov + cov.T)
        self.finalized = True

    def predictive_variance(self, phi) -> np.ndarray:
        """Per-row variance phi^T Sigma phi (nonnegative)."""
        if not self.finalized:
            raise PosteriorStateError("predictive_variance() requires finalize()")
        phi = np.asarray(phi, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != self.dim:
            raise ValueError(
                f"phi must be 2-D with {self.dim} columns, got shape {phi.shape}"
            )
        var = np.einsum("ij,ij->i", phi @ self.covariance, phi)
        return np.maximum(var, 0.0)


def mean_field_adjust(logits, variance, lam: float = MEAN_FIELD_LAMBDA) -> np.ndarray:
    """Scale each logit row by 1 / sqrt(1 + lam * variance).

    With variance 0 (or lam 0) the logits pass through unchanged; large
    variance drives the softmax toward uniform while never reordering
    classes within a row.
    """
    logits = np.asarray(logits, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64).reshape(-1)
    if logits.ndim != 2 or variance.shape[0] != logits.shape[0]:
        raise ValueError("variance must have one entry per logit row")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    return logits / np.sqrt(1.0 + lam * variance)[:, None]
