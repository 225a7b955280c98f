"""Binary indexed tree over nonnegative float weights.

Supports O(log n) point updates, prefix sums, and inverse-CDF search, which
is all the event-selection step of the simulator needs.  The functions below
operate on plain arrays so the compiled simulation kernel can reuse them; the
:class:`FenwickTree` class is a thin wrapper for interactive use and tests.

Layout: ``tree`` is 1-indexed with ``tree[i]`` holding the sum of leaves
``i - lowbit(i) + 1 .. i``; ``leaves`` holds the current point values.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True, nogil=True)
def fenwick_init(leaves, tree):
    """Fill ``tree`` (size n+1, zeroed by caller) from ``leaves`` (size n)."""
    n = leaves.size
    for i in range(1, n + 1):
        tree[i] += leaves[i - 1]
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@njit(cache=True, nogil=True)
def fenwick_set(leaves, tree, idx, value):
    """Set leaf ``idx`` (0-based) to ``value``."""
    delta = value - leaves[idx]
    leaves[idx] = value
    j = idx + 1
    n = leaves.size
    while j <= n:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True, nogil=True)
def fenwick_prefix(tree, idx):
    """Sum of leaves 0 .. idx-1 (0-based, idx in 0..n)."""
    s = 0.0
    j = idx
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(cache=True, nogil=True)
def fenwick_total(tree):
    n = tree.size - 1
    return fenwick_prefix(tree, n)


@njit(cache=True, nogil=True)
def fenwick_find(tree, target):
    """Smallest 0-based index whose cumulative sum exceeds ``target``.

    For ``target`` drawn uniformly from [0, total), this selects leaf i with
    probability leaves[i] / total.  Zero-weight leaves are never selected.
    The index is clamped to n-1 to absorb end-of-range rounding.
    """
    n = tree.size - 1
    pos = 0
    bitmask = 1
    while (bitmask << 1) <= n:
        bitmask <<= 1
    rem = target
    while bitmask > 0:
        nxt = pos + bitmask
        if nxt <= n and tree[nxt] <= rem:
            rem -= tree[nxt]
            pos = nxt
        bitmask >>= 1
    if pos >= n:
        pos = n - 1
    return pos


class FenwickTree:
    """Cumulative-weight table over ``n`` nonnegative float entries."""

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("need a non-empty 1-d weight vector")
        self.leaves = values.copy()
        self.tree = np.zeros(values.size + 1, dtype=np.float64)
        fenwick_init(self.leaves, self.tree)

    def __len__(self) -> int:
        return self.leaves.size

    def __getitem__(self, idx: int) -> float:
        return float(self.leaves[idx])

    def set(self, idx: int, value: float) -> None:
        fenwick_set(self.leaves, self.tree, idx, value)

    def prefix(self, idx: int) -> float:
        return float(fenwick_prefix(self.tree, idx))

    @property
    def total(self) -> float:
        return float(fenwick_total(self.tree))

    def find(self, target: float) -> int:
        return int(fenwick_find(self.tree, target))

    def rebuild(self) -> None:
        """Recompute internal sums from the leaves, washing out drift."""
        self.tree[:] = 0.0
        fenwick_init(self.leaves, self.tree)
