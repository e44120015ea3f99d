"""Independent brute-force reference implementations used as test oracles.

Everything here is written against the metric definitions directly --
plain Python loops, no vectorization, no imports from the package under
test -- so agreement is evidence of correctness rather than shared code.
"""

from __future__ import annotations

import math


def ece_reference(probs, labels, n_bins: int) -> float:
    """Expected calibration error with right-inclusive equal-width bins.

    Bin i covers (i/B, (i+1)/B]; confidence 0 falls into bin 0.
    """
    n = len(probs)
    bin_conf = [0.0] * n_bins
    bin_acc = [0.0] * n_bins
    bin_count = [0] * n_bins
    for row, label in zip(probs, labels):
        conf = max(row)
        pred = min(k for k in range(len(row)) if row[k] == conf)
        b = 0
        while b < n_bins - 1 and conf > (b + 1) / n_bins:
            b += 1
        bin_conf[b] += conf
        bin_acc[b] += 1.0 if pred == label else 0.0
        bin_count[b] += 1
    total = 0.0
    for b in range(n_bins):
        if bin_count[b] == 0:
            continue
        gap = abs(bin_acc[b] / bin_count[b] - bin_conf[b] / bin_count[b])
        total += (bin_count[b] / n) * gap
    return total


def auroc_reference(id_scores, ood_scores) -> float:
    """Pairwise AUROC: P(ood > id) + 0.5 P(ood == id), OOD positive."""
    wins = 0.0
    for o in ood_scores:
        for i in id_scores:
            if o > i:
                wins += 1.0
            elif o == i:
                wins += 0.5
    return wins / (len(id_scores) * len(ood_scores))


def f1_macro_reference(probs, labels, n_classes: int) -> float:
    """Macro F1; a class absent from truth and predictions scores 1.0."""
    preds = []
    for row in probs:
        conf = max(row)
        preds.append(min(k for k in range(len(row)) if row[k] == conf))
    total = 0.0
    for k in range(n_classes):
        tp = sum(1 for p, t in zip(preds, labels) if p == k and t == k)
        fp = sum(1 for p, t in zip(preds, labels) if p == k and t != k)
        fn = sum(1 for p, t in zip(preds, labels) if p != k and t == k)
        if tp == 0 and fp == 0 and fn == 0:
            total += 1.0
        elif 2 * tp + fp + fn == 0:
            total += 0.0
        else:
            total += 2 * tp / (2 * tp + fp + fn)
    return total / n_classes


def brier_reference(probs, labels) -> float:
    """Mean squared distance between probability rows and one-hot labels."""
    total = 0.0
    for row, label in zip(probs, labels):
        for k, p in enumerate(row):
            target = 1.0 if k == label else 0.0
            total += (p - target) ** 2
    return total / len(probs)


def accuracy_reference(probs, labels) -> float:
    hits = 0
    for row, label in zip(probs, labels):
        conf = max(row)
        pred = min(k for k in range(len(row)) if row[k] == conf)
        hits += 1 if pred == label else 0
    return hits / len(probs)


def entropy_reference(row) -> float:
    """Predictive entropy -sum p ln p with 0 ln 0 = 0."""
    total = 0.0
    for p in row:
        if p > 0.0:
            total -= p * math.log(p)
    return total


def mean_std_reference(values):
    """Two-pass mean and population (ddof=0) standard deviation."""
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def spearman_reference(x, y) -> float:
    """Pearson correlation of average ranks; 0.0 if either input is constant."""

    def ranks(vals):
        out = []
        for v in vals:
            smaller = sum(1 for w in vals if w < v)
            equal = sum(1 for w in vals if w == v)
            out.append(smaller + (equal + 1) / 2)
        return out

    rx, ry = ranks(x), ranks(y)
    mx, _ = mean_std_reference(rx)
    my, _ = mean_std_reference(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    denx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    deny = math.sqrt(sum((b - my) ** 2 for b in ry))
    if denx == 0.0 or deny == 0.0:
        return 0.0
    return num / (denx * deny)


def allocate_counts_reference(n: int, fractions) -> list[int]:
    """Per-part counts from banker's-rounded cumulative boundaries."""
    bounds = []
    cum = 0.0
    for f in fractions:
        cum += f
        bounds.append(round(cum * n))  # Python round: half to even
    bounds[-1] = n
    counts = []
    prev = 0
    for b in bounds:
        counts.append(b - prev)
        prev = b
    return counts


def rbf_kernel_reference(x, y, lengthscale: float) -> float:
    """exp(-||x - y||^2 / (2 lengthscale^2))."""
    sq = sum((a - b) ** 2 for a, b in zip(x, y))
    return math.exp(-sq / (2.0 * lengthscale**2))


def adamw_single_step_reference(p, g, lr, beta1, beta2, eps, weight_decay):
    """One AdamW step from fresh state on scalars: returns the new value.

    Decoupled decay first (p -= lr*wd*p), then Adam with bias correction
    at t=1.
    """
    p = p - lr * weight_decay * p
    m = (1 - beta1) * g
    v = (1 - beta2) * g * g
    m_hat = m / (1 - beta1)
    v_hat = v / (1 - beta2)
    return p - lr * m_hat / (math.sqrt(v_hat) + eps)


def multistep_lr_reference(initial_lr, milestones, gamma, epoch):
    """initial_lr * gamma^(number of milestones <= epoch)."""
    drops = sum(1 for m in milestones if m <= epoch)
    return initial_lr * gamma**drops


def moon_arc_residual(x, y, label) -> float:
    """Distance of a noiseless two-moons point from its class's unit arc.

    Class 0 lies on the unit circle centered at the origin (upper half);
    class 1 on the unit circle centered at (1, 0.5) (lower half).
    """
    if label == 0:
        return abs(math.hypot(x, y) - 1.0)
    return abs(math.hypot(x - 1.0, y - 0.5) - 1.0)


def finite_difference_gradients(loss_fn, params, eps: float = 1e-6):
    """Central-difference gradient of ``loss_fn()`` wrt each array in ``params``.

    ``params`` maps name -> numpy array mutated in place; ``loss_fn``
    recomputes the scalar loss from current parameter values.  Returns
    name -> array of the same shape.
    """
    import numpy as np

    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * eps)
        grads[name] = g
    return grads


def relative_error(a, b, floor: float = 1e-8) -> float:
    """max |a-b| / max(floor, |a|, |b|) over all entries."""
    import numpy as np

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))
