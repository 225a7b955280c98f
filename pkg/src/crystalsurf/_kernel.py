"""Compiled inner loop of the jump-process simulation.

All functions are numba-jitted (with a transparent pure-Python fallback) and
operate on preallocated arrays so a trajectory can run millions of events
without touching the interpreter.  The Python-level engine in kmc.py shares
these helpers for its single-step path, which keeps the two paths
bit-identical.

Rate layout: leaf 2*b is the rightward hop across bond b (site b -> b+1),
leaf 2*b+1 the leftward hop (site b+1 -> b).  Both read only the slope
curvature d = z[b-1] - 2 z[b] + z[b+1]:

    right = exp(-3 beta) * exp(+beta d),   left = exp(-3 beta) * exp(-beta d).

exp(+-beta d) comes from a lookup table over integer d (bit-identical to
recomputation and much faster); |d| beyond the table falls back to exp with
the overflow guard.
"""

from __future__ import annotations

import numpy as np

from .fenwick import fenwick_find, fenwick_init, fenwick_prefix, fenwick_set, njit

STATUS_DONE = 0
STATUS_NEED_UNIFORMS = 1
STATUS_EVENT_CAP = 2
STATUS_OVERFLOW = 3
STATUS_FROZEN = 4

# indices into the int64 scratch vector
I_EVENTS = 0
I_UIDX = 1
I_NEXT_CHK = 2
I_NEXT_SNAP = 3
I_SINCE_REBUILD = 4
I_ENERGY = 5
N_ISTATE = 6

# indices into the float64 scratch vector
F_CLOCK = 0
F_DIAG = 1
N_FSTATE = 2


@njit(cache=True, nogil=True)
def bond_rates(slopes, b, beta, exp_m3b, table_pos, table_neg, halfwidth,
               guard, slope_cap):
    """(right, left, ok) hop rates across bond b; ok=False on guard overflow."""
    n = slopes.size
    zm = slopes[(b - 1) % n]
    z0 = slopes[b]
    zp = slopes[(b + 1) % n]
    d = zm - 2 * z0 + zp
    if -halfwidth <= d <= halfwidth:
        ep = table_pos[d + halfwidth]
        em = table_neg[d + halfwidth]
    else:
        x = beta * d
        if abs(x) + 3.0 * beta > guard:
            return 0.0, 0.0, False
        ep = np.exp(x)
        em = np.exp(-x)
    right = exp_m3b * ep
    left = exp_m3b * em
    if slope_cap >= 0:
        # reject hops that would push any slope past the cap
        if (abs(zm - 1) > slope_cap or abs(z0 + 2) > slope_cap
                or abs(zp - 1) > slope_cap):
            right = 0.0
        if (abs(zm + 1) > slope_cap or abs(z0 - 2) > slope_cap
                or abs(zp + 1) > slope_cap):
            left = 0.0
    return right, left, True


@njit(cache=True, nogil=True)
def fill_rates(slopes, leaves, beta, exp_m3b, table_pos, table_neg, halfwidth,
               guard, slope_cap):
    """Recompute every leaf rate from the slopes; returns False on overflow."""
    n = slopes.size
    for b in range(n):
        r, l, ok = bond_rates(slopes, b, beta, exp_m3b, table_pos, table_neg,
                              halfwidth, guard, slope_cap)
        if not ok:
            return False
        leaves[2 * b] = r
        leaves[2 * b + 1] = l
    return True


@njit(cache=True, nogil=True)
def rebuild_tree(leaves, tree):
    tree[:] = 0.0
    fenwick_init(leaves, tree)


@njit(cache=True, nogil=True)
def _flush_all(leaves, acc_int, acc_last, t):
    for k in range(leaves.size):
        acc_int[k] += leaves[k] * (t - acc_last[k])
        acc_last[k] = t


@njit(cache=True, nogil=True)
def run_events(
    heights,
    slopes,
    leaves,
    tree,
    acc_int,
    acc_last,
    uniforms,
    fstate,
    istate,
    t_end,
    event_cap,
    rebuild_interval,
    chk_times,
    chk_out,
    snap_times,
    snap_out,
    beta,
    exp_m3b,
    table_pos,
    table_neg,
    halfwidth,
    guard,
    slope_cap,
):
    """Advance the chain until t_end, the event cap, or buffer exhaustion.

    Returns a STATUS_* code.  On STATUS_NEED_UNIFORMS the caller refills the
    uniform buffer (preserving unconsumed draws) and re-enters; all other
    state lives in the passed arrays, so re-entry is seamless.
    """
    n = heights.size
    n_leaves = 2 * n
    n_uni = uniforms.size
    clock = fstate[F_CLOCK]
    uidx = istate[I_UIDX]

    while True:
        if istate[I_EVENTS] >= event_cap:
            fstate[F_CLOCK] = clock
            istate[I_UIDX] = uidx
            return STATUS_EVENT_CAP

        idx0 = uidx
        total = fenwick_prefix(tree, n_leaves)
        if total <= 0.0:
            fstate[F_CLOCK] = clock
            istate[I_UIDX] = uidx
            return STATUS_FROZEN

        # waiting time: Exp(total); redraw on a degenerate zero
        if uidx >= n_uni:
            istate[I_UIDX] = idx0
            fstate[F_CLOCK] = clock
            return STATUS_NEED_UNIFORMS
        u = uniforms[uidx]
        uidx += 1
        while u == 0.0:
            if uidx >= n_uni:
                istate[I_UIDX] = idx0
                fstate[F_CLOCK] = clock
                return STATUS_NEED_UNIFORMS
            u = uniforms[uidx]
            uidx += 1
        dt = -np.log(u) / total
        t_next = clock + dt

        # record crossings of checkpoint / snapshot times before committing
        while (istate[I_NEXT_CHK] < chk_times.size
               and chk_times[istate[I_NEXT_CHK]] <= t_next):
            tau = chk_times[istate[I_NEXT_CHK]]
            c = istate[I_NEXT_CHK]
            for k in range(n_leaves):
                chk_out[c, k] = acc_int[k] + leaves[k] * (tau - acc_last[k])
            istate[I_NEXT_CHK] += 1
        while (istate[I_NEXT_SNAP] < snap_times.size
               and snap_times[istate[I_NEXT_SNAP]] < t_next):
            s = istate[I_NEXT_SNAP]
            for k in range(n):
                snap_out[s, k] = heights[k]
            istate[I_NEXT_SNAP] += 1

        if t_next > t_end:
            # final interval truncated at t_end; the drawn hop is discarded
            fstate[F_CLOCK] = t_end
            istate[I_UIDX] = uidx
            return STATUS_DONE

        # select the hop proportionally to its rate
        if uidx >= n_uni:
            istate[I_UIDX] = idx0
            fstate[F_CLOCK] = clock
            return STATUS_NEED_UNIFORMS
        u2 = uniforms[uidx]
        uidx += 1
        entry = fenwick_find(tree, u2 * total)
        while entry > 0 and leaves[entry] == 0.0:
            entry -= 1  # absorb end-of-range rounding onto a live leaf

        b = entry >> 1
        rightward = (entry & 1) == 0
        if rightward:
            site_from = b
            site_to = (b + 1) % n
            sgn = 1
        else:
            site_from = (b + 1) % n
            site_to = b
            sgn = -1

        zm_i = (b - 1) % n
        zp_i = (b + 1) % n
        d = slopes[zm_i] - 2 * slopes[b] + slopes[zp_i]
        if rightward:
            istate[I_ENERGY] += 6 - 2 * d
        else:
            istate[I_ENERGY] += 6 + 2 * d

        heights[site_from] -= 1
        heights[site_to] += 1
        slopes[zm_i] -= sgn
        slopes[b] += 2 * sgn
        slopes[zp_i] -= sgn

        # refresh the rates that read any of the three changed slopes
        for off in range(-2, 3):
            bb = (b + off) % n
            r, l, ok = bond_rates(slopes, bb, beta, exp_m3b, table_pos,
                                  table_neg, halfwidth, guard, slope_cap)
            if not ok:
                zmb = slopes[(bb - 1) % n]
                z0b = slopes[bb]
                zpb = slopes[(bb + 1) % n]
                fstate[F_DIAG] = beta * (zmb - 2 * z0b + zpb)
                fstate[F_CLOCK] = clock
                istate[I_UIDX] = uidx
                return STATUS_OVERFLOW
            for k, v in ((2 * bb, r), (2 * bb + 1, l)):
                acc_int[k] += leaves[k] * (t_next - acc_last[k])
                acc_last[k] = t_next
                fenwick_set(leaves, tree, k, v)

        clock = t_next
        istate[I_EVENTS] += 1
        istate[I_SINCE_REBUILD] += 1
        if istate[I_SINCE_REBUILD] >= rebuild_interval:
            _flush_all(leaves, acc_int, acc_last, clock)
            ok = fill_rates(slopes, leaves, beta, exp_m3b, table_pos,
                            table_neg, halfwidth, guard, slope_cap)
            if not ok:
                fstate[F_CLOCK] = clock
                istate[I_UIDX] = uidx
                return STATUS_OVERFLOW
            rebuild_tree(leaves, tree)
            istate[I_SINCE_REBUILD] = 0
