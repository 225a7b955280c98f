"""Lattice-level energetics: incremental updates vs scratch recomputation."""

import itertools
import math

import numpy as np
import pytest

from crystalsurf.errors import InvalidEventError, RateOverflowError
from crystalsurf.lattice import (
    JumpEvent,
    MicroState,
    apply_jump,
    delta_energy,
    jump_rate,
    local_current,
    negate,
)


def scratch_energy(heights):
    """Independent oracle: recompute H = sum of squared slopes from scratch."""
    h = [int(v) for v in heights]
    n = len(h)
    return sum((h[(i + 1) % n] - h[i]) ** 2 for i in range(n))


def all_events(n):
    for i in range(n):
        yield JumpEvent(i, (i + 1) % n)
        yield JumpEvent(i, (i - 1) % n)


def random_state(rng, n, zmax=3):
    # draw a height profile directly; slopes are bounded by 2*zmax
    h = rng.integers(-zmax, zmax + 1, size=n)
    return MicroState.from_heights(h)


def test_flat_jump_example():
    # flat 4-site state, hop 0 -> 1: frozen from the scratch oracle
    state = MicroState.from_heights([0, 0, 0, 0])
    after = apply_jump(state, JumpEvent(0, 1))
    assert after.heights.tolist() == [-1, 1, 0, 0]
    assert scratch_energy(after.heights) - scratch_energy(state.heights) == 6
    assert after.energy - state.energy == 6


def test_inverse_jumps_restore_state():
    rng = np.random.default_rng(7)
    for _ in range(50):
        state = random_state(rng, 6)
        i = int(rng.integers(0, 6))
        fwd = JumpEvent(i, (i + 1) % 6)
        back = JumpEvent((i + 1) % 6, i)
        roundtrip = apply_jump(apply_jump(state, fwd), back)
        assert np.array_equal(roundtrip.heights, state.heights)
        assert roundtrip.energy == state.energy


def test_single_bump_left_jump():
    state = MicroState.from_heights([0, 1, 0, 0])
    after = apply_jump(state, JumpEvent(1, 0))
    assert after.heights.tolist() == [1, 0, 0, 0]
    d_scratch = scratch_energy(after.heights) - scratch_energy(state.heights)
    assert after.energy - state.energy == d_scratch
    assert delta_energy(state, JumpEvent(1, 0)) == d_scratch


def test_delta_energy_exhaustive_small_states():
    # every state with N=4, |h| <= 2, every event: incremental == scratch
    for heights in itertools.product(range(-2, 3), repeat=4):
        state = MicroState.from_heights(heights)
        for ev in all_events(4):
            after = apply_jump(state, ev)
            d_scratch = scratch_energy(after.heights) - scratch_energy(heights)
            assert delta_energy(state, ev) == d_scratch
            assert after.energy == state.energy + d_scratch
            after.validate()


def test_delta_energy_flat_and_linear():
    # zero curvature: dH = 6 regardless of the constant slope
    for c in (-3, 0, 2):
        n = 6
        h = [c * i for i in range(n)]
        # wrap-around breaks global linearity; test an interior bond only
        state = MicroState.from_heights(h)
        ev = JumpEvent(2, 3)
        assert delta_energy(state, ev) == 6
        after = apply_jump(state, ev)
        assert after.energy - state.energy == 6


def test_left_jump_is_energy_reversal():
    rng = np.random.default_rng(11)
    for _ in range(100):
        state = random_state(rng, 8)
        i = int(rng.integers(0, 8))
        fwd = JumpEvent(i, (i + 1) % 8)
        after = apply_jump(state, fwd)
        back = JumpEvent((i + 1) % 8, i)
        assert delta_energy(after, back) == -delta_energy(state, fwd)


def test_invalid_event_rejected():
    state = MicroState.from_heights([0, 0, 0, 0, 0])
    with pytest.raises(InvalidEventError):
        delta_energy(state, JumpEvent(0, 2))
    with pytest.raises(InvalidEventError):
        apply_jump(state, JumpEvent(1, 4))


def test_flat_rate_value():
    state = MicroState.from_heights([0, 0, 0, 0])
    rate = jump_rate(state, JumpEvent(2, 3), beta=0.5)
    assert rate == pytest.approx(math.exp(-1.5), rel=1e-15)


def test_rate_beta_to_zero_limit():
    rng = np.random.default_rng(3)
    state = random_state(rng, 6)
    for ev in all_events(6):
        assert jump_rate(state, ev, beta=1e-14) == pytest.approx(1.0, abs=1e-10)


def test_detailed_balance_identity():
    # r(h -> Jh) e^{-beta H(h)} == r(Jh -> h) e^{-beta H(Jh)}
    rng = np.random.default_rng(23)
    for beta in (0.01, 0.25, 1.0):
        for _ in range(200):
            state = random_state(rng, 8)
            i = int(rng.integers(0, 8))
            j = (i + (1 if rng.random() < 0.5 else -1)) % 8
            ev = JumpEvent(i, j)
            after = apply_jump(state, ev)
            rev = JumpEvent(j, i)
            lhs = jump_rate(state, ev, beta) * math.exp(-beta * state.energy)
            rhs = jump_rate(after, rev, beta) * math.exp(-beta * after.energy)
            assert lhs == pytest.approx(rhs, rel=1e-12)


def test_rate_overflow_guard():
    # a huge slope makes the exponent blow past the guard
    state = MicroState.from_heights([0, 10**9, 0, 0])
    with pytest.raises(RateOverflowError) as err:
        jump_rate(state, JumpEvent(1, 0), beta=1.0)
    assert abs(err.value.exponent) > 700


def test_local_current_flat_and_linear():
    flat = MicroState.from_heights([0] * 8)
    for i in range(8):
        assert local_current(flat, i, beta=0.3) == 0.0
    # constant-slope interior bond: both hop energies are 6, so no current
    ramp = MicroState.from_heights([0, 2, 4, 6, 8, 6, 4, 2])
    assert local_current(ramp, 1, beta=0.4) == pytest.approx(0.0, abs=1e-16)


def test_current_mirror_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(50):
        state = random_state(rng, 10)
        neg = negate(state)
        for i in range(10):
            assert local_current(neg, i, 0.7) == pytest.approx(
                -local_current(state, i, 0.7), rel=1e-14, abs=1e-300
            )


def test_negate_basics():
    state = MicroState.from_heights([1, -2, 1, 0])
    neg = negate(state)
    assert neg.heights.tolist() == [-1, 2, -1, 0]
    assert neg.energy == state.energy
    again = negate(neg)
    assert np.array_equal(again.heights, state.heights)


def test_negate_swaps_rates():
    rng = np.random.default_rng(17)
    for _ in range(50):
        state = random_state(rng, 7)
        neg = negate(state)
        for i in range(7):
            fwd = JumpEvent(i, (i + 1) % 7)
            rev = JumpEvent((i + 1) % 7, i)
            assert jump_rate(neg, fwd, 0.6) == pytest.approx(
                jump_rate(state, rev, 0.6), rel=1e-14
            )


def test_energy_shift_invariance():
    rng = np.random.default_rng(29)
    state = random_state(rng, 9)
    for c in (-5, 1, 40):
        shifted = MicroState.from_heights(state.heights + c)
        assert shifted.energy == state.energy


def test_mass_and_slope_sum_preserved():
    rng = np.random.default_rng(31)
    state = random_state(rng, 8)
    total = state.heights.sum()
    for ev in all_events(8):
        after = apply_jump(state, ev)
        assert after.heights.sum() == total
        assert after.slopes.sum() == 0
