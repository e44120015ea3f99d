"""Uncertainty-aware classifiers with a scikit-learn estimator API.

Three methods share one encoder architecture and training loop:

* ``DeterministicClassifier``: single forward pass, softmax confidence.
* ``MCDropoutClassifier``: the same architecture predicted with dropout
  left active, averaging the probabilities of ``n_passes`` stochastic
  passes.  Usually built over an already-fitted deterministic model via
  :meth:`MCDropoutClassifier.from_fitted` so both methods share weights.
* ``SNGPClassifier``: spectral-normalized encoder weights plus a
  random-Fourier-feature GP head with a Laplace posterior; a single
  forward pass yields both calibrated probabilities and a
  distance-aware predictive variance.

All of them implement ``fit`` / ``predict`` / ``predict_proba`` /
``get_params`` and validate inputs at the boundary.  Features are
expected already standardized (see :class:`sngpkit.data.Standardizer`);
the fitted scaler can be attached at fit time so checkpoints carry it.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import gp
from .data import Standardizer, stratified_holdout
from .metrics import predictive_entropy
from .network import DenseHeadModel, GPHeadModel, softmax
from .rng import STREAM_HOLDOUT, derive_seed, make_rng
from .spectral import SpectralNormalizer
from .training import TrainConfig, train_model
from .validation import as_labels, as_matrix, check_fitted, check_n_features


@dataclass(frozen=True)
class PredictionBatch:
    """Per-sample probabilities plus derived uncertainty scores.

    ``variance`` is the GP predictive variance when the method provides
    one, else None.  ``msp_uncertainty`` is 1 - max probability and
    ``entropy`` the Shannon entropy of each row, both recomputable from
    ``probs``.
    """

    probs: np.ndarray
    variance: np.ndarray | None = None

    @property
    def msp_uncertainty(self) -> np.ndarray:
        return 1.0 - self.probs.max(axis=1)

    @property
    def entropy(self) -> np.ndarray:
        return predictive_entropy(self.probs)

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]


def predictions_to_csv(path, batch: PredictionBatch, labels=None, domain_tag: str = "") -> None:
    """sample_id, domain_tag, label, p_0..p_{K-1}, msp_uncertainty, entropy, variance."""
    k = batch.n_classes
    header = ["sample_id", "domain_tag", "label"]
    header += [f"p_{i}" for i in range(k)]
    header += ["msp_uncertainty", "entropy", "variance"]
    msp = batch.msp_uncertainty
    ent = batch.entropy
    lines = [",".join(header)]
    for i in range(batch.n_samples):
        row = [str(i), domain_tag, "" if labels is None else str(int(labels[i]))]
        row += [format(v, ".17g") for v in batch.probs[i]]
        row.append(format(msp[i], ".17g"))
        row.append(format(ent[i], ".17g"))
        row.append("" if batch.variance is None else format(batch.variance[i], ".17g"))
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


class _BaseClassifier(ClassifierMixin, BaseEstimator):
    """Shared fit plumbing: label encoding, validation split, training loop."""

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            initial_lr=self.initial_lr,
            lr_milestones=tuple(self.lr_milestones),
            lr_gamma=self.lr_gamma,
            max_epochs=self.max_epochs,
            batch_size=self.batch_size,
            early_stop_patience=self.early_stop_patience,
            early_stop_metric=self.early_stop_metric,
            weight_decay=self.weight_decay,
            seed=self.seed,
        )

    def _prepare_fit(self, X, y, X_val, y_val, feature_stats):
        X = as_matrix(X, "X", min_rows=2)
        y = as_labels(y, "y", n_rows=X.shape[0])
        classes, y_enc = np.unique(y, return_inverse=True)
        if classes.size < 2:
            raise ValueError("fit needs at least 2 distinct classes")
        if X_val is None and y_val is None:
            if not 0 < self.val_fraction < 1:
                raise ValueError(
                    "no validation set given and val_fraction is "
                    f"{self.val_fraction}; pass X_val/y_val or set val_fraction in (0, 1)"
                )
            keep, held = stratified_holdout(
                y_enc, self.val_fraction, derive_seed(self.seed, STREAM_HOLDOUT)
            )
            X_val, y_val_enc = X[held], y_enc[held]
            X, y_enc = X[keep], y_enc[keep]
        elif X_val is None or y_val is None:
            raise ValueError("pass both X_val and y_val or neither")
        else:
            X_val = as_matrix(X_val, "X_val", min_rows=1)
            y_val = as_labels(y_val, "y_val", n_rows=X_val.shape[0])
            y_val_enc = np.searchsorted(classes, y_val)
            if np.any(y_val_enc >= classes.size) or np.any(
                classes[np.minimum(y_val_enc, classes.size - 1)] != y_val
            ):
                raise ValueError("y_val contains labels unseen in y")
        if feature_stats is not None and not isinstance(feature_stats, Standardizer):
            raise ValueError("feature_stats must be a fitted Standardizer or None")
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.feature_stats_ = feature_stats
        return X, y_enc, X_val, y_val_enc

    def _forward_probs(self, X) -> np.ndarray:
        logits, _ = self.model_.forward(X)
        return softmax(logits)

    def predict_proba(self, X):
        check_fitted(self, "model_")
        X = as_matrix(X, "X")
        check_n_features(X, self.n_features_in_)
        return self._forward_probs(X)

    def predict(self, X):
        # predict_proba runs first so an unfitted estimator raises
        # NotFittedError rather than AttributeError on classes_.
        idx = np.argmax(self.predict_proba(X), axis=1)
        return self.classes_[idx]

    def predict_with_uncertainty(self, X) -> PredictionBatch:
        return PredictionBatch(self.predict_proba(X))

    def hidden_features(self, X) -> np.ndarray:
        """Encoder output (penultimate features), dropout off."""
        check_fitted(self, "model_")
        X = as_matrix(X, "X")
        check_n_features(X, self.n_features_in_)
        return self.model_.hidden(X)


class DeterministicClassifier(_BaseClassifier):
    """Residual MLP with a linear softmax head (single-pass baseline).

    Parameters
    ----------
    hidden_dim : width of the residual trunk.
    n_residual_blocks : number of blocks h <- h + dropout(relu(W h + b)).
    dropout_rate : inverted-dropout rate inside each block (train time only).
    spectral_bound : optional spectral-norm bound for block weights;
        None disables the projection (the usual baseline setting).
    power_iterations, spectral_final_iterations : per-step and
        finalization power-iteration counts when the bound is set.
    spectral_input_projection : when True the encoder's input projection
        is bounded as well, capping the full encoder Lipschitz constant.
    initial_lr, lr_milestones, lr_gamma : multi-step LR schedule.
    max_epochs, batch_size, early_stop_patience, early_stop_metric,
    weight_decay : training loop knobs (AdamW).
    val_fraction : stratified carve-out used when fit() gets no
        explicit validation set.
    seed : master seed; all internal streams derive from it.

    Attributes
    ----------
    classes_, n_features_in_, model_, train_log_, feature_stats_,
    converged_sigmas_ (when spectral_bound is set).
    """

    method_tag = "baseline"

    def __init__(
        self,
        hidden_dim: int = 64,
        n_residual_blocks: int = 2,
        dropout_rate: float = 0.1,
        spectral_bound: float | None = None,
        power_iterations: int = 1,
        spectral_final_iterations: int = 20,
        spectral_input_projection: bool = False,
        initial_lr: float = 1e-3,
        lr_milestones: tuple[int, ...] = (),
        lr_gamma: float = 0.1,
        max_epochs: int = 30,
        batch_size: int = 128,
        early_stop_patience: int = 5,
        early_stop_metric: str = "val_loss",
        weight_decay: float = 0.0,
        val_fraction: float = 0.15,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.n_residual_blocks = n_residual_blocks
        self.dropout_rate = dropout_rate
        self.spectral_bound = spectral_bound
        self.power_iterations = power_iterations
        self.spectral_final_iterations = spectral_final_iterations
        self.spectral_input_projection = spectral_input_projection
        self.initial_lr = initial_lr
        self.lr_milestones = lr_milestones
        self.lr_gamma = lr_gamma
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.early_stop_patience = early_stop_patience
        self.early_stop_metric = early_stop_metric
        self.weight_decay = weight_decay
        self.val_fraction = val_fraction
        self.seed = seed

    def _build_model(self, n_features: int, n_classes: int):
        return DenseHeadModel.build(
            n_features,
            self.hidden_dim,
            self.n_residual_blocks,
            n_classes,
            self.dropout_rate,
            self.seed,
        )

    def fit(self, X, y, X_val=None, y_val=None, feature_stats=None):
        X, y_enc, X_val, y_val_enc = self._prepare_fit(X, y, X_val, y_val, feature_stats)
        self.model_ = self._build_model(X.shape[1], self.classes_.size)
        normalizer = None
        targets = None
        if self.spectral_bound is not None:
            normalizer = SpectralNormalizer(
                self.spectral_bound,
                self.power_iterations,
                self.spectral_final_iterations,
                self.seed,
            )
            targets = self.model_.spectral_targets(self.spectral_input_projection)
        self.train_log_ = train_model(
            self.model_,
            X,
            y_enc,
            X_val,
            y_val_enc,
            self._train_config(),
            normalizer,
            spectral_targets=targets,
        )
        if normalizer is not None:
            self.converged_sigmas_ = normalizer.finalize(
                self.model_.params(), targets
            )
        return self


class MCDropoutClassifier(DeterministicClassifier):
    """Monte-Carlo-dropout inference over the deterministic architecture.

    ``predict_proba`` averages the softmax outputs of ``n_passes``
    forward passes with dropout active; pass t draws its masks from the
    generator seeded with ``mc_seed XOR t``.  Requires a positive
    dropout rate to differ from the deterministic method (a zero rate
    warns and degrades to a single clean pass).
    """

    method_tag = "mc_dropout"

    def __init__(
        self,
        hidden_dim: int = 64,
        n_residual_blocks: int = 2,
        dropout_rate: float = 0.1,
        spectral_bound: float | None = None,
        power_iterations: int = 1,
        spectral_final_iterations: int = 20,
        spectral_input_projection: bool = False,
        initial_lr: float = 1e-3,
        lr_milestones: tuple[int, ...] = (),
        lr_gamma: float = 0.1,
        max_epochs: int = 30,
        batch_size: int = 128,
        early_stop_patience: int = 5,
        early_stop_metric: str = "val_loss",
        weight_decay: float = 0.0,
        val_fraction: float = 0.15,
        seed: int = 0,
        n_passes: int = 10,
        mc_seed: int = 0,
    ):
        super().__init__(
            hidden_dim=hidden_dim,
            n_residual_blocks=n_residual_blocks,
            dropout_rate=dropout_rate,
            spectral_bound=spectral_bound,
            power_iterations=power_iterations,
            spectral_final_iterations=spectral_final_iterations,
            spectral_input_projection=spectral_input_projection,
            initial_lr=initial_lr,
            lr_milestones=lr_milestones,
            lr_gamma=lr_gamma,
            max_epochs=max_epochs,
            batch_size=batch_size,
            early_stop_patience=early_stop_patience,
            early_stop_metric=early_stop_metric,
            weight_decay=weight_decay,
            val_fraction=val_fraction,
            seed=seed,
        )
        self.n_passes = n_passes
        self.mc_seed = mc_seed

    @classmethod
    def from_fitted(
        cls, fitted: DeterministicClassifier, n_passes: int = 10, mc_seed: int = 0
    ) -> "MCDropoutClassifier":
        """Share a fitted deterministic model instead of training again."""
        check_fitted(fitted, "model_")
        base_params = {
            k: v
            for k, v in fitted.get_params().items()
            if k not in ("n_passes", "mc_seed")
        }
        clf = cls(**base_params, n_passes=n_passes, mc_seed=mc_seed)
        clf.model_ = fitted.model_
        clf.classes_ = fitted.classes_
        clf.n_features_in_ = fitted.n_features_in_
        clf.train_log_ = fitted.train_log_
        clf.feature_stats_ = fitted.feature_stats_
        if getattr(fitted, "converged_sigmas_", None) is not None:
            clf.converged_sigmas_ = fitted.converged_sigmas_
        return clf

    def _forward_probs(self, X) -> np.ndarray:
        return mc_dropout_probs(self.model_, X, self.n_passes, self.mc_seed)


def mc_dropout_probs(model, X, n_passes: int, seed: int) -> np.ndarray:
    """Probability-space average of ``n_passes`` dropout-active passes.

    Pass t uses the generator seeded with ``seed XOR t``, so the T-pass
    average equals the mean of T single-pass calls seeded the same way.
    """
    if n_passes < 1:
        raise ValueError(f"n_passes must be >= 1, got {n_passes}")
    if model.encoder.dropout_rate <= 0.0:
        warnings.warn(
            "MC dropout with dropout_rate 0 degrades to a deterministic pass",
            stacklevel=2,
        )
        logits, _ = model.forward(X)
        return softmax(logits)
    acc = None
    for t in range(n_passes):
        rng = make_rng(derive_seed(seed, 0, t))
        logits, _ = model.forward(X, dropout_active=True, rng=rng)
        probs = softmax(logits)
        acc = probs if acc is None else acc + probs
    return acc / n_passes


class SNGPClassifier(_BaseClassifier):
    """Spectral-normalized residual MLP with an RFF GP head.

    fit() trains the encoder and GP weights ``beta`` by cross-entropy
    (spectral projection after every step), then makes one pass over the
    training set to accumulate the Laplace precision and inverts it.
    predict_proba() runs a single forward pass, computes the predictive
    variance phi^T Sigma phi, shrinks the logits by the mean-field rule
    1/sqrt(1 + lambda * variance), and applies the softmax, so
    uncertainty grows with distance from the training data at the cost
    of one extra matrix product.

    Parameters are those of :class:`DeterministicClassifier` plus
    rff_dim (random feature count D), lengthscale (RBF kernel scale),
    prior_precision (ridge added at finalization) and mean_field_lambda.

    Attributes include ``posterior_`` (the finalized Laplace state) and
    ``converged_sigmas_`` (post-projection spectral norms per block).
    """

    method_tag = "sngp"

    def __init__(
        self,
        hidden_dim: int = 64,
        n_residual_blocks: int = 2,
        dropout_rate: float = 0.1,
        spectral_bound: float | None = 0.95,
        power_iterations: int = 1,
        spectral_final_iterations: int = 20,
        spectral_input_projection: bool = False,
        rff_dim: int = 1024,
        lengthscale: float = 2.0,
        prior_precision: float = 1e-3,
        mean_field_lambda: float = gp.MEAN_FIELD_LAMBDA,
        initial_lr: float = 1e-3,
        lr_milestones: tuple[int, ...] = (),
        lr_gamma: float = 0.1,
        max_epochs: int = 30,
        batch_size: int = 128,
        early_stop_patience: int = 5,
        early_stop_metric: str = "val_loss",
        weight_decay: float = 0.0,
        val_fraction: float = 0.15,
        seed: int = 0,
    ):
        self.hidden_dim = hidden_dim
        self.n_residual_blocks = n_residual_blocks
        self.dropout_rate = dropout_rate
        self.spectral_bound = spectral_bound
        self.power_iterations = power_iterations
        self.spectral_final_iterations = spectral_final_iterations
        self.spectral_input_projection = spectral_input_projection
        self.rff_dim = rff_dim
        self.lengthscale = lengthscale
        self.prior_precision = prior_precision
        self.mean_field_lambda = mean_field_lambda
        self.initial_lr = initial_lr
        self.lr_milestones = lr_milestones
        self.lr_gamma = lr_gamma
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.early_stop_patience = early_stop_patience
        self.early_stop_metric = early_stop_metric
        self.weight_decay = weight_decay
        self.val_fraction = val_fraction
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None, feature_stats=None):
        X, y_enc, X_val, y_val_enc = self._prepare_fit(X, y, X_val, y_val, feature_stats)
        self.model_ = GPHeadModel.build(
            X.shape[1],
            self.hidden_dim,
            self.n_residual_blocks,
            self.classes_.size,
            self.rff_dim,
            self.lengthscale,
            self.dropout_rate,
            self.seed,
        )
        normalizer = None
        targets = None
        if self.spectral_bound is not None:
            normalizer = SpectralNormalizer(
                self.spectral_bound,
                self.power_iterations,
                self.spectral_final_iterations,
                self.seed,
            )
            targets = self.model_.spectral_targets(self.spectral_input_projection)
        self.train_log_ = train_model(
            self.model_,
            X,
            y_enc,
            X_val,
            y_val_enc,
            self._train_config(),
            normalizer,
            spectral_targets=targets,
        )
        if normalizer is not None:
            self.converged_sigmas_ = normalizer.finalize(
                self.model_.params(), targets
            )
        posterior = gp.LaplacePosterior(self.rff_dim, self.prior_precision)
        logits, (_, phi, _) = self.model_.forward(X)
        posterior.accumulate(phi, softmax(logits))
        posterior.finalize()
        self.model_.posterior = posterior
        self.posterior_ = posterior
        return self

    def _phi(self, X) -> np.ndarray:
        logits, (_, phi, _) = self.model_.forward(X)
        return phi

    def predict_variance(self, X) -> np.ndarray:
        """Predictive variance phi^T Sigma phi per row."""
        check_fitted(self, ["model_", "posterior_"])
        X = as_matrix(X, "X")
        check_n_features(X, self.n_features_in_)
        return self.posterior_.predictive_variance(self.model_.features(X))

    def _forward_probs(self, X) -> np.ndarray:
        logits, (_, phi, _) = self.model_.forward(X)
        var = self.posterior_.predictive_variance(phi)
        return softmax(gp.mean_field_adjust(logits, var, self.mean_field_lambda))

    def predict_with_uncertainty(self, X) -> PredictionBatch:
        check_fitted(self, ["model_", "posterior_"])
        X = as_matrix(X, "X")
        check_n_features(X, self.n_features_in_)
        logits, (_, phi, _) = self.model_.forward(X)
        var = self.posterior_.predictive_variance(phi)
        probs = softmax(gp.mean_field_adjust(logits, var, self.mean_field_lambda))
        return PredictionBatch(probs, var)


# ---------------------------------------------------------------------------
# functional prediction surface
# ---------------------------------------------------------------------------


def predict_deterministic(clf, X) -> PredictionBatch:
    """Single clean forward pass through a fitted classifier."""
    check_fitted(clf, "model_")
    X = as_matrix(X, "X")
    check_n_features(X, clf.n_features_in_)
    logits, _ = clf.model_.forward(X)
    return PredictionBatch(softmax(logits))


def predict_mc_dropout(clf, X, n_passes: int = 10, seed: int = 0) -> PredictionBatch:
    """Average of ``n_passes`` dropout-active passes (pass t seeded seed XOR t)."""
    check_fitted(clf, "model_")
    X = as_matrix(X, "X")
    check_n_features(X, clf.n_features_in_)
    return PredictionBatch(mc_dropout_probs(clf.model_, X, n_passes, seed))


def predict_sngp(clf: SNGPClassifier, X) -> PredictionBatch:
    """Mean-field-adjusted GP prediction with per-sample variance."""
    return clf.predict_with_uncertainty(X)


def measure_latency(predict_fn, x_row, n_warmup: int = 50, n_trials: int = 200) -> float:
    """Median wall-clock milliseconds per single-sample prediction.

    ``predict_fn`` is called with a (1, d) array; ``n_warmup`` calls run
    untimed first.  At least 10 trials are required for a stable median.
    """
    if n_trials < 10:
        raise ValueError(f"n_trials must be >= 10, got {n_trials}")
    if n_warmup < 0:
        raise ValueError(f"n_warmup must be >= 0, got {n_warmup}")
    x = as_matrix(x_row, "x_row")
    if x.shape[0] != 1:
        raise ValueError(f"x_row must be a single row, got {x.shape[0]}")
    for _ in range(n_warmup):
        predict_fn(x)
    samples = np.empty(n_trials)
    for i in range(n_trials):
        t0 = time.perf_counter_ns()
        predict_fn(x)
        samples[i] = time.perf_counter_ns() - t0
    return float(np.median(samples) / 1e6)
