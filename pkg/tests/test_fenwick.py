"""Partial-sum tree vs a naive cumulative-sum oracle."""

import numpy as np
import pytest

from crystalsurf.fenwick import FenwickTree


class NaiveSums:
    def __init__(self, values):
        self.values = np.asarray(values, dtype=float).copy()

    def set(self, idx, value):
        self.values[idx] = value

    def prefix(self, idx):
        return float(self.values[:idx].sum())

    @property
    def total(self):
        return float(self.values.sum())

    def find(self, target):
        c = np.cumsum(self.values)
        return int(np.searchsorted(c, target, side="right"))


def test_prefix_sums_match_naive():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 7, 16, 33, 100):
        vals = rng.random(n)
        tree = FenwickTree(vals)
        naive = NaiveSums(vals)
        for idx in range(n + 1):
            assert tree.prefix(idx) == pytest.approx(naive.prefix(idx), rel=1e-12)
        assert tree.total == pytest.approx(naive.total, rel=1e-12)


def test_updates_match_naive():
    rng = np.random.default_rng(1)
    n = 37
    vals = rng.random(n)
    tree = FenwickTree(vals)
    naive = NaiveSums(vals)
    for _ in range(500):
        idx = int(rng.integers(0, n))
        v = float(rng.random())
        tree.set(idx, v)
        naive.set(idx, v)
        probe = int(rng.integers(0, n + 1))
        assert tree.prefix(probe) == pytest.approx(naive.prefix(probe), rel=1e-12)


def test_find_matches_naive_on_random_targets():
    rng = np.random.default_rng(2)
    for n in (2, 5, 20, 64, 129):
        vals = rng.random(n)
        vals[rng.random(n) < 0.3] = 0.0  # include zero-weight leaves
        if vals.sum() == 0:
            vals[0] = 1.0
        tree = FenwickTree(vals)
        naive = NaiveSums(vals)
        for _ in range(200):
            u = float(rng.random() * naive.total)
            assert tree.find(u) == naive.find(u)


def test_find_boundaries_select_correct_leaf():
    vals = [0.5, 0.0, 1.5, 2.0]
    tree = FenwickTree(vals)
    # cumulative boundaries: 0.5, 0.5, 2.0, 4.0
    assert tree.find(0.0) == 0
    assert tree.find(0.49999) == 0
    assert tree.find(0.5) == 2  # zero-weight leaf 1 is skipped
    assert tree.find(1.999) == 2
    assert tree.find(2.0) == 3
    assert tree.find(3.999) == 3


def test_find_never_selects_zero_weight_leaf():
    rng = np.random.default_rng(3)
    vals = np.array([0.0, 1.0, 0.0, 0.0, 2.0, 0.0])
    tree = FenwickTree(vals)
    for _ in range(1000):
        u = float(rng.random() * tree.total)
        assert vals[tree.find(u)] > 0


def test_rebuild_restores_total():
    rng = np.random.default_rng(4)
    vals = rng.random(50)
    tree = FenwickTree(vals)
    for _ in range(10000):
        tree.set(int(rng.integers(0, 50)), float(rng.random()))
    drift_total = tree.total
    tree.rebuild()
    exact = float(np.sum(tree.leaves))
    assert tree.total == pytest.approx(exact, rel=1e-12)
    assert drift_total == pytest.approx(exact, rel=1e-9)


def test_sampling_frequencies_match_weights():
    # chi-squared style check that inverse-CDF search samples proportionally
    rng = np.random.default_rng(5)
    weights = np.array([1.0, 3.0, 0.5, 5.5])
    tree = FenwickTree(weights)
    draws = 200_000
    counts = np.zeros(4)
    us = rng.random(draws) * tree.total
    for u in us:
        counts[tree.find(float(u))] += 1
    probs = weights / weights.sum()
    for k in range(4):
        se = np.sqrt(draws * probs[k] * (1 - probs[k]))
        assert abs(counts[k] - draws * probs[k]) < 4 * se
