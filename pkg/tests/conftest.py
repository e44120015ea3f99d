"""Shared fixtures: deterministic RNGs and small standardized datasets."""

from __future__ import annotations

import numpy as np
import pytest

import sngpkit as sk


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Registry the acceptance tests append their pass/fail lines to."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def moons_split():
    """A small standardized two-moons train/val/test triple (seed 7)."""
    ds = sk.gen_two_moons(1200, 0.1, seed=7)
    train, val, test = sk.stratified_split(ds, (0.8, 0.1, 0.1), seed=7)
    train, scaler = sk.standardize(train)
    val = sk.apply_standardization(val, scaler)
    test = sk.apply_standardization(test, scaler)
    return train, val, test, scaler


@pytest.fixture(scope="session")
def fitted_sngp(moons_split):
    """A quickly trained SNGP classifier shared by read-only tests."""
    train, val, test, scaler = moons_split
    clf = sk.SNGPClassifier(rff_dim=64, max_epochs=8, seed=3)
    clf.fit(train.features, train.labels, val.features, val.labels, feature_stats=scaler)
    return clf


@pytest.fixture(scope="session")
def fitted_dense(moons_split):
    """A quickly trained deterministic classifier shared by read-only tests."""
    train, val, test, scaler = moons_split
    clf = sk.DeterministicClassifier(max_epochs=8, seed=3)
    clf.fit(train.features, train.labels, val.features, val.labels, feature_stats=scaler)
    return clf
