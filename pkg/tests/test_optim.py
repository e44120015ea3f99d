"""AdamW update rule and the multi-step LR schedule against loop oracles."""

import numpy as np
import pytest

from sngpkit.exceptions import TrainingError
from sngpkit.optim import AdamW, multistep_lr

from reference_impls import adamw_single_step_reference


# ---------------------------------------------------------------------------
# multistep_lr
# ---------------------------------------------------------------------------


def test_multistep_lr_no_milestones_is_constant():
    for epoch in (0, 5, 100):
        assert multistep_lr(1e-3, [], 0.1, epoch) == 1e-3


def test_multistep_lr_inclusive_boundary():
    # the drop applies at the milestone epoch itself
    assert multistep_lr(1.0, [3], 0.1, 2) == 1.0
    assert multistep_lr(1.0, [3], 0.1, 3) == pytest.approx(0.1)
    assert multistep_lr(1.0, [3], 0.1, 4) == pytest.approx(0.1)


def test_multistep_lr_stacks_milestones():
    assert multistep_lr(1.0, [2, 5], 0.5, 6) == pytest.approx(0.25)
    assert multistep_lr(1.0, [2, 5], 0.5, 4) == pytest.approx(0.5)


def test_multistep_lr_matches_loop_oracle():
    from reference_impls import multistep_lr_reference

    for epoch in range(12):
        got = multistep_lr(0.02, [1, 4, 9], 0.3, epoch)
        want = multistep_lr_reference(0.02, [1, 4, 9], 0.3, epoch)
        assert got == pytest.approx(want, abs=1e-15)


def test_multistep_lr_validation():
    with pytest.raises(ValueError):
        multistep_lr(0.0, [], 0.1, 0)
    with pytest.raises(ValueError):
        multistep_lr(1e-3, [], 0.0, 0)
    with pytest.raises(ValueError):
        multistep_lr(1e-3, [], 1.5, 0)
    with pytest.raises(ValueError):
        multistep_lr(1e-3, [5, 5], 0.1, 0)
    with pytest.raises(ValueError):
        multistep_lr(1e-3, [5, 3], 0.1, 0)


# ---------------------------------------------------------------------------
# AdamW
# ---------------------------------------------------------------------------


def test_adamw_first_step_matches_reference(rng):
    # The update is elementwise, so the scalar oracle applies per entry.
    p = rng.normal(size=(4, 3))
    g = rng.normal(size=(4, 3))
    got = p.copy()
    opt = AdamW(lr=0.01, weight_decay=0.1)
    opt.step({"w": got}, {"w": g.copy()})
    want = np.array(
        [
            adamw_single_step_reference(
                pi, gi, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.1
            )
            for pi, gi in zip(p.ravel(), g.ravel())
        ]
    ).reshape(p.shape)
    assert np.allclose(got, want, atol=1e-15)


def test_adamw_zero_grad_is_pure_decay(rng):
    p = rng.normal(size=(3,))
    got = p.copy()
    AdamW(lr=0.1, weight_decay=0.5).step({"w": got}, {"w": np.zeros(3)})
    assert np.allclose(got, p * (1 - 0.1 * 0.5), atol=1e-15)


def test_adamw_no_decay_first_step_has_unit_scale(rng):
    # with fresh moments, m_hat/sqrt(v_hat) = sign(g) up to eps
    p = np.zeros(5)
    g = rng.normal(size=5)
    AdamW(lr=0.01).step({"w": p}, {"w": g})
    assert np.allclose(p, -0.01 * np.sign(g), atol=1e-6)


def test_adamw_moments_accumulate_across_steps(rng):
    p = rng.normal(size=(2, 2))
    g1, g2 = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))

    opt = AdamW(lr=0.05, weight_decay=0.02)
    got = p.copy()
    opt.step({"w": got}, {"w": g1})
    opt.step({"w": got}, {"w": g2})

    # two-step loop oracle
    b1, b2, eps, lr, wd = 0.9, 0.999, 1e-8, 0.05, 0.02
    w = p.copy()
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t, g in ((1, g1), (2, g2)):
        w = w - lr * wd * w
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    assert np.allclose(got, w, atol=1e-15)


def test_adamw_updates_in_place_per_parameter(rng):
    a, b = rng.normal(size=(2,)), rng.normal(size=(3,))
    params = {"a": a, "b": b}
    AdamW(lr=0.01).step(params, {"a": np.ones(2), "b": np.ones(3)})
    assert params["a"] is a and params["b"] is b


def test_adamw_rejects_non_finite_gradient():
    p = np.ones(3)
    with pytest.raises(TrainingError, match="non-finite"):
        AdamW().step({"w": p}, {"w": np.array([1.0, np.nan, 0.0])})
    with pytest.raises(TrainingError, match="w"):
        AdamW().step({"w": p}, {"w": np.array([np.inf, 0.0, 0.0])})


def test_adamw_validation():
    with pytest.raises(ValueError):
        AdamW(lr=0.0)
    with pytest.raises(ValueError):
        AdamW(betas=(1.0, 0.999))
    with pytest.raises(ValueError):
        AdamW(weight_decay=-1e-3)


def test_adamw_step_count_advances():
    opt = AdamW()
    assert opt.t == 0
    opt.step({"w": np.ones(1)}, {"w": np.ones(1)})
    assert opt.t == 1
    opt.step({"w": np.ones(1)}, {"w": np.ones(1)})
    assert opt.t == 2
