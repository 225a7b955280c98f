"""Microscopic state space, Hamiltonian, jump moves and their rates.

A configuration is a vector of N integer column heights on a periodic ring.
The surface energy is the sum of squared slopes,

    H(h) = sum_i (h[i+1] - h[i])**2   (indices mod N),

and a particle hop from site i to an adjacent site j changes exactly two
heights (h[i] -= 1, h[j] += 1).  Hops occur at rate exp(-beta/2 * dH), which
puts the chain in detailed balance with the Gibbs weight exp(-beta * H).

Slopes live on bonds: bond b joins sites b and b+1 and carries
z[b] = h[b+1] - h[b].  A hop across bond b touches only slopes b-1, b, b+1,
which is what makes incremental energy and rate updates O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidEventError, RateOverflowError

# exp() overflows just above 709; stay a little inside.
EXPONENT_GUARD = 700.0


@dataclass
class MicroState:
    """Integer height profile with cached slopes and energy.

    The caches are maintained incrementally by :func:`apply_jump`; they can
    always be recomputed from scratch, which the tests use as the oracle.
    """

    heights: np.ndarray
    slopes: np.ndarray
    energy: int

    @classmethod
    def from_heights(cls, heights) -> "MicroState":
        h = np.asarray(heights, dtype=np.int64).copy()
        if h.ndim != 1 or h.size < 3:
            raise ValueError("need a 1-d height profile with at least 3 sites")
        z = np.roll(h, -1) - h
        energy = int(np.sum(z * z))
        return cls(heights=h, slopes=z, energy=energy)

    @property
    def n_sites(self) -> int:
        return self.heights.size

    def copy(self) -> "MicroState":
        return MicroState(self.heights.copy(), self.slopes.copy(), self.energy)

    def recompute(self) -> "MicroState":
        """Rebuild caches from the heights alone (scratch oracle)."""
        return MicroState.from_heights(self.heights)

    def validate(self) -> None:
        fresh = self.recompute()
        if not np.array_equal(fresh.slopes, self.slopes):
            raise AssertionError("cached slopes out of sync with heights")
        if fresh.energy != self.energy:
            raise AssertionError("cached energy out of sync with heights")
        if int(self.slopes.sum()) != 0:
            raise AssertionError("slopes do not sum to zero (broken periodicity)")


@dataclass(frozen=True)
class JumpEvent:
    """A particle hop from ``from_site`` to the adjacent ``to_site``."""

    from_site: int
    to_site: int

    def direction(self, n_sites: int) -> int:
        """+1 for a rightward hop, -1 for a leftward hop."""
        if (self.from_site + 1) % n_sites == self.to_site:
            return 1
        if (self.from_site - 1) % n_sites == self.to_site:
            return -1
        raise InvalidEventError(
            f"sites {self.from_site} -> {self.to_site} are not adjacent mod {n_sites}"
        )

    def bond(self, n_sites: int) -> int:
        """The bond the particle crosses: b joins sites b and b+1."""
        if self.direction(n_sites) == 1:
            return self.from_site % n_sites
        return self.to_site % n_sites


def _check_event(state: MicroState, event: JumpEvent) -> tuple[int, int]:
    n = state.n_sites
    i, j = event.from_site % n, event.to_site % n
    if (i + 1) % n != j and (i - 1) % n != j:
        raise InvalidEventError(f"sites {i} -> {j} are not adjacent mod {n}")
    return i, j


def slope_curvature(state: MicroState, bond: int) -> int:
    """Second difference of slopes around a bond: z[b-1] - 2 z[b] + z[b+1]."""
    z = state.slopes
    n = state.n_sites
    b = bond % n
    return int(z[b - 1]) - 2 * int(z[b]) + int(z[(b + 1) % n])


def delta_energy(state: MicroState, event: JumpEvent) -> int:
    """Energy change H(J h) - H(h) of a hop, without mutating the state.

    Expanding the three affected squared slopes gives, for a rightward hop
    across bond b, dH = 6 - 2*(z[b-1] - 2 z[b] + z[b+1]); the leftward hop
    across the same bond flips the sign of the curvature term.
    """
    n = state.n_sites
    _check_event(state, event)
    b = event.bond(n)
    d = slope_curvature(state, b)
    if event.direction(n) == 1:
        return 6 - 2 * d
    return 6 + 2 * d


def apply_jump(state: MicroState, event: JumpEvent) -> MicroState:
    """Return the post-hop state with caches updated incrementally."""
    out = state.copy()
    apply_jump_inplace(out, event)
    return out


def apply_jump_inplace(state: MicroState, event: JumpEvent) -> int:
    """Apply a hop to an exclusively owned state; returns the energy change."""
    n = state.n_sites
    i, j = _check_event(state, event)
    d_h = delta_energy(state, event)
    state.heights[i] -= 1
    state.heights[j] += 1
    b = event.bond(n)
    s = event.direction(n)
    z = state.slopes
    z[b - 1] -= s
    z[b] += 2 * s
    z[(b + 1) % n] -= s
    state.energy += d_h
    return d_h


def jump_rate(
    state: MicroState,
    event: JumpEvent,
    beta: float,
    guard: float = EXPONENT_GUARD,
) -> float:
    """Metropolis-type hop rate exp(-beta/2 * dH).

    The exponent is guarded: magnitudes beyond ``guard`` raise
    :class:`RateOverflowError` rather than silently producing inf/0.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    x = -0.5 * beta * delta_energy(state, event)
    if abs(x) > guard:
        raise RateOverflowError(x, guard)
    return math.exp(x)


def local_current(state: MicroState, i: int, beta: float) -> float:
    """Net particle flow rate across bond (i, i+1): r(i->i+1) - r(i+1->i)."""
    n = state.n_sites
    i = i % n
    right = JumpEvent(i, (i + 1) % n)
    left = JumpEvent((i + 1) % n, i)
    return jump_rate(state, right, beta) - jump_rate(state, left, beta)


def negate(state: MicroState) -> MicroState:
    """Mirror the profile through zero height; the energy is unchanged."""
    return MicroState(
        heights=-state.heights,
        slopes=-state.slopes,
        energy=state.energy,
    )
