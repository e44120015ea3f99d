"""Residual MLP encoder with manual forward/backward passes.

Architecture: a linear input projection to the hidden width, then n
residual blocks h <- h + dropout(relu(W h + b)).  Dropout is inverted
(mask scaled by 1/(1-p)) so the expected activation is unchanged; it is
active only when a training pass asks for it.  All parameters live in
plain float64 arrays addressed by name, and backward() returns a
gradient per parameter name, so the optimizer and the spectral
projection hook can treat models uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gp
from .rng import STREAM_INIT, STREAM_RFF, derive_seed, make_rng, normals
from .validation import as_labels, as_matrix


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max subtraction); rows sum to 1."""
    logits = as_matrix(logits, "logits")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    The gradient is (softmax(logits) - onehot) / n, the convention the
    whole backward pass is built on.
    """
    logits = as_matrix(logits, "logits")
    n, k = logits.shape
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    labels = as_labels(labels, "labels", n_rows=n)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("labels out of range for logits")
    logp = log_softmax(logits)
    loss = -float(logp[np.arange(n), labels].mean())
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def he_normal(rng, out_dim: int, in_dim: int) -> np.ndarray:
    # std sqrt(2 / fan_in), fan_in = in_dim
    return normals(rng, (out_dim, in_dim)) * np.sqrt(2.0 / in_dim)


@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class Encoder:
    in_proj: DenseLayer
    blocks: list[DenseLayer]
    dropout_rate: float = 0.0

    @property
    def hidden_dim(self) -> int:
        return self.in_proj.W.shape[0]

    @property
    def input_dim(self) -> int:
        return self.in_proj.W.shape[1]


def make_encoder(
    input_dim: int,
    hidden_dim: int,
    n_blocks: int,
    dropout_rate: float = 0.0,
    seed: int = 0,
) -> Encoder:
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError("input_dim and hidden_dim must be >= 1")
    if n_blocks < 0:
        raise ValueError(f"n_blocks must be >= 0, got {n_blocks}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")
    rng = make_rng(derive_seed(seed, STREAM_INIT))
    in_proj = DenseLayer(he_normal(rng, hidden_dim, input_dim), np.zeros(hidden_dim))
    blocks = [
        DenseLayer(he_normal(rng, hidden_dim, hidden_dim), np.zeros(hidden_dim))
        for _ in range(n_blocks)
    ]
    return Encoder(in_proj, blocks, float(dropout_rate))


@dataclass
class EncoderCache:
    X: np.ndarray
    h_in: list  # block inputs
    z: list  # pre-activations per block
    masks: list  # scaled dropout masks per block (None when inactive)
    H: np.ndarray


def encoder_forward(
    enc: Encoder, X, *, dropout_active: bool = False, rng=None
) -> tuple[np.ndarray, EncoderCache]:
    """Forward pass; with zero blocks the output is the input projection."""
    X = as_matrix(X, "X")
    if X.shape[1] != enc.input_dim:
        raise ValueError(
            f"X has {X.shape[1]} features, encoder expects {enc.input_dim}"
        )
    use_dropout = dropout_active and enc.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ValueError("dropout_active requires an rng")
    h = X @ enc.in_proj.W.T + enc.in_proj.b
    h_in, zs, masks = [], [], []
    p = enc.dropout_rate
    for layer in enc.blocks:
        h_in.append(h)
        z = h @ layer.W.T + layer.b
        zs.append(z)
        a = relu(z)
        if use_dropout:
            mask = (rng.random(a.shape) >= p) / (1.0 - p)
            masks.append(mask)
            a = a * mask
        else:
            masks.append(None)
        h = h + a
    return h, EncoderCache(X, h_in, zs, masks, h)


def encoder_backward(
    enc: Encoder, cache: EncoderCache, dH: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients for every encoder parameter plus the input gradient."""
    grads: dict[str, np.ndarray] = {}
    d = dH
    for i in range(len(enc.blocks) - 1, -1, -1):
        layer = enc.blocks[i]
        da = d if cache.masks[i] is None else d * cache.masks[i]
        dz = da * (cache.z[i] > 0)
        grads[f"encoder.block{i}.W"] = dz.T @ cache.h_in[i]
        grads[f"encoder.block{i}.b"] = dz.sum(axis=0)
        d = d + dz @ layer.W  # skip path + branch path
    grads["encoder.in_proj.W"] = d.T @ cache.X
    grads["encoder.in_proj.b"] = d.sum(axis=0)
    dX = d @ enc.in_proj.W
    return grads, dX


def encoder_params(enc: Encoder) -> dict[str, np.ndarray]:
    params = {"encoder.in_proj.W": enc.in_proj.W, "encoder.in_proj.b": enc.in_proj.b}
    for i, layer in enumerate(enc.blocks):
        params[f"encoder.block{i}.W"] = layer.W
        params[f"encoder.block{i}.b"] = layer.b
    return params


def encoder_spectral_targets(enc: Encoder, include_input_projection: bool) -> list[str]:
    """Parameter names subject to the spectral-norm projection.

    By default only the residual-block weights are bounded.  Including the
    input projection bounds the whole encoder's Lipschitz constant, which
    keeps hidden-space distances stable under training (the distance the GP
    kernel sees cannot stretch arbitrarily between epochs).
    """
    names = ["encoder.in_proj.W"] if include_input_projection else []
    names += [f"encoder.block{i}.W" for i in range(len(enc.blocks))]
    return names


class DenseHeadModel:
    """Encoder plus a linear softmax head (the deterministic architecture)."""

    head_kind = "dense"

    def __init__(self, encoder: Encoder, head: DenseLayer):
        self.encoder = encoder
        self.head = head

    @classmethod
    def build(
        cls,
        input_dim: int,
        hidden_dim: int,
        n_blocks: int,
        n_classes: int,
        dropout_rate: float = 0.0,
        seed: int = 0,
    ) -> "DenseHeadModel":
        if n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {n_classes}")
        enc = make_encoder(input_dim, hidden_dim, n_blocks, dropout_rate, seed)
        rng = make_rng(derive_seed(seed, STREAM_INIT, 1))
        head = DenseLayer(he_normal(rng, n_classes, hidden_dim), np.zeros(n_classes))
        return cls(enc, head)

    @property
    def n_classes(self) -> int:
        return self.head.W.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        p = encoder_params(self.encoder)
        p["head.W"] = self.head.W
        p["head.b"] = self.head.b
        return p

    def spectral_targets(self, include_input_projection: bool = False) -> list[str]:
        return encoder_spectral_targets(self.encoder, include_input_projection)

    def forward(self, X, *, dropout_active: bool = False, rng=None):
        H, cache = encoder_forward(
            self.encoder, X, dropout_active=dropout_active, rng=rng
        )
        logits = H @ self.head.W.T + self.head.b
        return logits, (cache, H)

    def backward(self, cache, dlogits) -> dict[str, np.ndarray]:
        enc_cache, H = cache
        grads = {"head.W": dlogits.T @ H, "head.b": dlogits.sum(axis=0)}
        dH = dlogits @ self.head.W
        enc_grads, _ = encoder_backward(self.encoder, enc_cache, dH)
        grads.update(enc_grads)
        return grads

    def hidden(self, X) -> np.ndarray:
        H, _ = encoder_forward(self.encoder, X)
        return H


class GPHeadModel:
    """Encoder plus the RFF-GP output layer.

    During training only ``beta`` and the encoder receive gradients; the
    random projection stays frozen.  After fitting, ``posterior`` holds
    the finalized Laplace covariance used for predictive variance.
    """

    head_kind = "gp"

    def __init__(self, encoder: Encoder, rff: gp.RFFProjection, beta: np.ndarray):
        if beta.shape != (beta.shape[0], rff.dim) or beta.shape[0] < 2:
            raise ValueError("beta must be (n_classes >= 2, rff_dim)")
        self.encoder = encoder
        self.rff = rff
        self.beta = beta
        self.posterior: gp.LaplacePosterior | None = None

    @classmethod
    def build(
        cls,
        input_dim: int,
        hidden_dim: int,
        n_blocks: int,
        n_classes: int,
        rff_dim: int = 1024,
        lengthscale: float = 2.0,
        dropout_rate: float = 0.0,
        seed: int = 0,
    ) -> "GPHeadModel":
        if n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {n_classes}")
        enc = make_encoder(input_dim, hidden_dim, n_blocks, dropout_rate, seed)
        rff = gp.make_rff_projection(
            hidden_dim, rff_dim, lengthscale, derive_seed(seed, STREAM_RFF)
        )
        beta = np.zeros((n_classes, rff_dim), dtype=np.float64)
        return cls(enc, rff, beta)

    @property
    def n_classes(self) -> int:
        return self.beta.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        p = encoder_params(self.encoder)
        p["gp.beta"] = self.beta
        return p

    def spectral_targets(self, include_input_projection: bool = False) -> list[str]:
        return encoder_spectral_targets(self.encoder, include_input_projection)

    def forward(self, X, *, dropout_active: bool = False, rng=None):
        H, enc_cache = encoder_forward(
            self.encoder, X, dropout_active=dropout_active, rng=rng
        )
        phi, arg = gp.rff_features(H, self.rff, return_arg=True)
        logits = phi @ self.beta.T
        return logits, (enc_cache, phi, arg)

    def backward(self, cache, dlogits) -> dict[str, np.ndarray]:
        enc_cache, phi, arg = cache
        grads = {"gp.beta": dlogits.T @ phi}
        dphi = dlogits @ self.beta
        scale = np.sqrt(2.0 / self.rff.dim)
        darg = dphi * (-scale * np.sin(arg))
        dH = darg @ (self.rff.w / self.rff.lengthscale)
        enc_grads, _ = encoder_backward(self.encoder, enc_cache, dH)
        grads.update(enc_grads)
        return grads

    def hidden(self, X) -> np.ndarray:
        H, _ = encoder_forward(self.encoder, X)
        return H

    def features(self, X) -> np.ndarray:
        """RFF features of the encoder output (dropout off)."""
        return gp.rff_features(self.hidden(X), self.rff)
