"""Mini-batch training loop with early stopping and best-weight restore."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import TrainingError
from .network import cross_entropy
from .optim import AdamW, multistep_lr
from .rng import STREAM_TRAIN, derive_seed, make_rng
from .validation import as_labels, as_matrix

_TIE_EPS = 1e-12

EARLY_STOP_METRICS = ("val_loss", "val_accuracy")


@dataclass
class TrainConfig:
    initial_lr: float = 1e-3
    lr_milestones: tuple[int, ...] = ()
    lr_gamma: float = 0.1
    max_epochs: int = 30
    batch_size: int = 128
    early_stop_patience: int = 5
    early_stop_metric: str = "val_loss"
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.early_stop_patience < 1:
            raise ValueError(
                f"early_stop_patience must be >= 1, got {self.early_stop_patience}"
            )
        if self.early_stop_metric not in EARLY_STOP_METRICS:
            raise ValueError(
                f"early_stop_metric must be one of {EARLY_STOP_METRICS}, "
                f"got {self.early_stop_metric!r}"
            )
        # delegate range checks for lr/gamma/milestones
        multistep_lr(self.initial_lr, self.lr_milestones, self.lr_gamma, 0)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def n_epochs(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        lines = ["epoch,train_loss,val_loss,val_accuracy,lr"]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.train_loss:.17g},{r.val_loss:.17g},"
                f"{r.val_accuracy:.17g},{r.lr:.17g}"
            )
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _evaluate(model, X, y) -> tuple[float, float]:
    logits, _ = model.forward(X)
    loss, _ = cross_entropy(logits, y)
    acc = float((logits.argmax(axis=1) == y).mean())
    return loss, acc


def train_model(
    model,
    X_train,
    y_train,
    X_val,
    y_val,
    config: TrainConfig,
    spectral=None,
    spectral_targets: list[str] | None = None,
) -> TrainLog:
    """Train in place; returns the per-epoch log.

    Each epoch shuffles with a generator derived from config.seed,
    walks consecutive batches, and applies one AdamW step per batch
    followed by the spectral projection hook (when given).  The hook
    touches ``spectral_targets`` (default: the model's residual-block
    weights).  Validation drives early stopping: runs whose metric
    fails to improve (ties within 1e-12 count as no improvement) for
    ``early_stop_patience`` consecutive epochs stop, and the
    best-validation weights are restored either way.  Non-finite losses
    or gradients abort with a TrainingError naming the epoch and batch.
    """
    X_train = as_matrix(X_train, "X_train", min_rows=1)
    y_train = as_labels(y_train, "y_train", n_rows=X_train.shape[0])
    X_val = as_matrix(X_val, "X_val", min_rows=1)
    y_val = as_labels(y_val, "y_val", n_rows=X_val.shape[0])

    log = TrainLog()
    if config.max_epochs == 0:
        return log

    rng = make_rng(derive_seed(config.seed, STREAM_TRAIN))
    params = model.params()
    optimizer = AdamW(
        lr=config.initial_lr,
        weight_decay=config.weight_decay,
    )
    targets = []
    if spectral is not None:
        targets = (
            spectral_targets
            if spectral_targets is not None
            else model.spectral_targets()
        )

    sign = 1.0 if config.early_stop_metric == "val_loss" else -1.0
    best = np.inf
    best_params: dict[str, np.ndarray] | None = None
    since_best = 0
    n = X_train.shape[0]

    for epoch in range(config.max_epochs):
        lr = multistep_lr(
            config.initial_lr, config.lr_milestones, config.lr_gamma, epoch
        )
        optimizer.lr = lr
        perm = rng.permutation(n)
        loss_sum = 0.0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            try:
                logits, cache = model.forward(
                    X_train[idx], dropout_active=True, rng=rng
                )
                loss, dlogits = cross_entropy(logits, y_train[idx])
            except ValueError as err:
                # Inputs were validated up front, so a ValueError here means
                # the forward pass itself produced non-finite values.
                raise TrainingError(f"epoch {epoch}, batch {bi}: {err}") from None
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, batch {bi}"
                )
            try:
                grads = model.backward(cache, dlogits)
                optimizer.step(params, grads)
            except TrainingError as err:
                raise TrainingError(f"epoch {epoch}, batch {bi}: {err}") from None
            if targets:
                spectral.step(params, targets)
            loss_sum += loss * idx.size
        train_loss = loss_sum / n

        val_loss, val_acc = _evaluate(model, X_val, y_val)
        log.records.append(EpochRecord(epoch, train_loss, val_loss, val_acc, lr))

        metric = sign * (val_loss if config.early_stop_metric == "val_loss" else val_acc)
        if metric < best - _TIE_EPS:
            best = metric
            best_params = {k: v.copy() for k, v in params.items()}
            log.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.early_stop_patience:
                log.stopped_early = True
                break

    if best_params is not None:
        for k, v in params.items():
            v[...] = best_params[k]
    return log
