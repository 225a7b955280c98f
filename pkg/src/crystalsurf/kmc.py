"""Continuous-time simulation of the surface hopping process.

Gillespie-style: waiting times are exponential in the total rate, events are
selected proportionally to their rates through a partial-sum tree, and after
each hop only the O(1) neighbourhood of rates is refreshed.  A full table
rebuild every ``rebuild_interval`` events washes out floating-point drift.

Each trajectory owns one counter-based random stream (Philox) seeded from
(master_seed, replica_index), so replicas are independent and a run is
reproducible regardless of how replicas are scheduled.  The heavy loop is
delegated to the compiled kernel in _kernel.py; the single-step path here
shares the kernel's rate helpers, keeping both paths bit-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .errors import RateOverflowError, RunawaySimulationError
from .fenwick import FenwickTree
from .lattice import EXPONENT_GUARD, JumpEvent, MicroState
from ._kernel import (
    STATUS_DONE,
    STATUS_EVENT_CAP,
    STATUS_FROZEN,
    STATUS_NEED_UNIFORMS,
    STATUS_OVERFLOW,
    bond_rates,
    fill_rates,
)

_TABLE_HALFWIDTH = 4096
_UNIFORM_BLOCK = 1 << 16


def replica_rng(master_seed: int, replica_index: int = 0) -> np.random.Generator:
    """Independent counter-based stream for one replica."""
    seq = np.random.SeedSequence((int(master_seed), int(replica_index)))
    return np.random.Generator(np.random.Philox(seq))


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def init_microstate(profile, n_sites: int) -> MicroState:
    """Lattice heights N^3 * h0(j/N), rounded half away from zero.

    ``profile`` is any callable mapping positions in [0, 1) to heights; the
    rescaled result differs from h0 by at most N^-3 pointwise.
    """
    if n_sites < 4:
        raise ValueError("need at least 4 lattice sites")
    x = np.arange(n_sites) / n_sites
    target = float(n_sites) ** 3 * np.asarray(profile(x), dtype=float)
    heights = round_half_away(target).astype(np.int64)
    return MicroState.from_heights(heights)


@dataclass
class RescaledProfile:
    """Macroscopic view of a microscopic snapshot."""

    x_grid: np.ndarray
    values: np.ndarray
    macro_time: float


def rescale(heights, n_sites: int, clock: float = 0.0) -> RescaledProfile:
    """Heights / N^3 on the grid j/N at macroscopic time clock / N^4."""
    h = np.asarray(heights, dtype=float)
    n = float(n_sites)
    return RescaledProfile(
        x_grid=np.arange(n_sites) / n,
        values=h / n**3,
        macro_time=float(clock) / n**4,
    )


class RateTable:
    """All 2N hop rates with a partial-sum tree for O(log N) selection.

    Leaf 2b is the rightward hop across bond b (site b -> b+1) and leaf
    2b+1 the leftward hop (site b+1 -> b); a hop across bond b only touches
    bonds b-2..b+2.  ``slope_cap`` (validation aid) zeroes the rate of any
    hop that would push a slope past the cap, which restricts the chain to
    a finite state space while preserving detailed balance.
    """

    def __init__(self, state: MicroState, beta: float,
                 guard: float = EXPONENT_GUARD, slope_cap: int | None = None):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.beta = float(beta)
        self.guard = float(guard)
        self.slope_cap = -1 if slope_cap is None else int(slope_cap)
        self.exp_m3b = math.exp(-3.0 * self.beta)
        hw = _TABLE_HALFWIDTH
        self.halfwidth = hw
        d = np.arange(-hw, hw + 1, dtype=float)
        with np.errstate(over="ignore"):
            self.table_pos = np.exp(self.beta * d)
            self.table_neg = self.table_pos[::-1].copy()
        self._fenwick = FenwickTree(np.zeros(2 * state.n_sites))
        self.rebuild(state)

    @property
    def leaves(self) -> np.ndarray:
        return self._fenwick.leaves

    @property
    def tree(self) -> np.ndarray:
        return self._fenwick.tree

    @property
    def total(self) -> float:
        return self._fenwick.total

    def rate(self, entry: int) -> float:
        return float(self.leaves[entry])

    def rebuild(self, state: MicroState) -> None:
        ok = fill_rates(state.slopes, self.leaves, self.beta, self.exp_m3b,
                        self.table_pos, self.table_neg, self.halfwidth,
                        self.guard, self.slope_cap)
        if not ok:
            self._raise_overflow(state)
        self._fenwick.rebuild()

    def update_after_jump(self, state: MicroState, bond: int) -> None:
        n = state.n_sites
        for off in range(-2, 3):
            bb = (bond + off) % n
            r, l, ok = bond_rates(state.slopes, bb, self.beta, self.exp_m3b,
                                  self.table_pos, self.table_neg,
                                  self.halfwidth, self.guard, self.slope_cap)
            if not ok:
                self._raise_overflow(state)
            self._fenwick.set(2 * bb, r)
            self._fenwick.set(2 * bb + 1, l)

    def _raise_overflow(self, state: MicroState) -> None:
        z = state.slopes
        d = np.roll(z, 1) - 2 * z + np.roll(z, -1)
        worst = float(self.beta * np.max(np.abs(d)) + 3 * self.beta)
        raise RateOverflowError(worst, self.guard)

    def sample(self, target: float) -> int:
        """Entry whose cumulative rate bracket contains ``target``."""
        entry = self._fenwick.find(target)
        while entry > 0 and self.leaves[entry] == 0.0:
            entry -= 1
        return entry

    def event_for_entry(self, entry: int, n_sites: int) -> JumpEvent:
        b = entry >> 1
        if entry & 1:
            return JumpEvent((b + 1) % n_sites, b)
        return JumpEvent(b, (b + 1) % n_sites)


def step(state: MicroState, table: RateTable, rng: np.random.Generator):
    """One exact KMC step; mutates the (engine-owned) state and table.

    Returns (event, waiting_time).  Draw order: waiting time first
    (redrawing a degenerate zero), then selection, matching the compiled
    kernel's consumption of the stream.
    """
    total = table.total
    if total <= 0:
        raise RunawaySimulationError("all rates are zero; chain is frozen",
                                     0, 0.0, 0.0)
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    dt = -math.log(u) / total
    entry = table.sample(rng.random() * total)
    n = state.n_sites
    event = table.event_for_entry(entry, n)
    bond = entry >> 1
    sgn = 1 if (entry & 1) == 0 else -1
    d = int(state.slopes[(bond - 1) % n]) - 2 * int(state.slopes[bond]) \
        + int(state.slopes[(bond + 1) % n])
    state.heights[event.from_site] -= 1
    state.heights[event.to_site] += 1
    state.slopes[(bond - 1) % n] -= sgn
    state.slopes[bond] += 2 * sgn
    state.slopes[(bond + 1) % n] -= sgn
    state.energy += 6 - 2 * d if sgn == 1 else 6 + 2 * d
    table.update_after_jump(state, bond)
    return event, dt


@dataclass
class Schedule:
    """Observation plan for a trajectory, in microscopic time.

    ``snapshot_times`` record the height profile (state at the last event
    at or before the requested time); ``integral_times`` record cumulative
    per-hop rate integrals int_0^tau r_k(s) ds for all 2N hop channels,
    from which windowed time averages are formed by differencing.
    """

    snapshot_times: tuple = ()
    integral_times: tuple = ()

    def validated(self, t_end: float) -> "Schedule":
        snaps = tuple(sorted(float(t) for t in self.snapshot_times))
        ints = tuple(sorted(float(t) for t in self.integral_times))
        for t in snaps + ints:
            if t < 0 or t > t_end:
                raise ValueError(f"scheduled time {t:g} outside [0, {t_end:g}]")
        return Schedule(snaps, ints)


@dataclass
class Trajectory:
    """Result of one trajectory run."""

    initial: MicroState
    final: MicroState
    beta: float
    n_events: int
    clock: float
    snapshots: list = field(default_factory=list)
    integral_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rate_integrals: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def n_sites(self) -> int:
        return self.initial.n_sites


def run_until(
    state: MicroState,
    beta: float,
    t_end: float,
    schedule: Schedule | None = None,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    event_cap: int = 500_000_000,
    rebuild_interval: int = 1_000_000,
    slope_cap: int | None = None,
    use_kernel: bool = True,
) -> Trajectory:
    """Simulate from microscopic time 0 to t_end.

    The final inter-event interval is truncated at t_end: snapshots and rate
    integrals never see past it, and the returned state is the one whose
    holding interval contains t_end.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if rng is None:
        rng = replica_rng(0 if seed is None else seed)
    schedule = (schedule or Schedule()).validated(t_end)

    initial = state.copy()
    work = state.copy()
    table = RateTable(work, beta, slope_cap=slope_cap)

    n = work.n_sites
    chk_times = np.asarray(schedule.integral_times, dtype=float)
    snap_times = np.asarray(schedule.snapshot_times, dtype=float)
    chk_out = np.zeros((chk_times.size, 2 * n))
    snap_out = np.zeros((snap_times.size, n), dtype=np.int64)
    acc_int = np.zeros(2 * n)
    acc_last = np.zeros(2 * n)

    fstate = np.zeros(_kernel.N_FSTATE)
    istate = np.zeros(_kernel.N_ISTATE, dtype=np.int64)
    istate[_kernel.I_ENERGY] = work.energy

    if use_kernel:
        uniforms = rng.random(_UNIFORM_BLOCK)
        while True:
            status = _kernel.run_events(
                work.heights, work.slopes, table.leaves, table.tree,
                acc_int, acc_last, uniforms, fstate, istate,
                float(t_end), int(event_cap), int(rebuild_interval),
                chk_times, chk_out, snap_times, snap_out,
                table.beta, table.exp_m3b, table.table_pos, table.table_neg,
                table.halfwidth, table.guard, table.slope_cap,
            )
            if status == STATUS_NEED_UNIFORMS:
                leftovers = uniforms[istate[_kernel.I_UIDX]:]
                uniforms = np.concatenate([leftovers, rng.random(_UNIFORM_BLOCK)])
                istate[_kernel.I_UIDX] = 0
                continue
            break
    else:
        status = _python_loop(work, table, rng, t_end, event_cap,
                              rebuild_interval, chk_times, chk_out,
                              snap_times, snap_out, acc_int, acc_last,
                              fstate, istate)

    work.energy = int(istate[_kernel.I_ENERGY])
    n_events = int(istate[_kernel.I_EVENTS])
    clock = float(fstate[_kernel.F_CLOCK])

    if status == STATUS_OVERFLOW:
        raise RateOverflowError(float(fstate[_kernel.F_DIAG]), table.guard)
    if status == STATUS_EVENT_CAP:
        raise RunawaySimulationError("event cap exceeded", n_events, clock, t_end)
    if status == STATUS_FROZEN:
        raise RunawaySimulationError("all rates are zero; chain is frozen",
                                     n_events, clock, t_end)
    assert status == STATUS_DONE

    snapshots = [(float(t), snap_out[i].copy()) for i, t in enumerate(snap_times)]
    return Trajectory(
        initial=initial,
        final=work,
        beta=beta,
        n_events=n_events,
        clock=clock,
        snapshots=snapshots,
        integral_times=chk_times.copy(),
        rate_integrals=chk_out,
    )


def _python_loop(work, table, rng, t_end, event_cap, rebuild_interval,
                 chk_times, chk_out, snap_times, snap_out, acc_int, acc_last,
                 fstate, istate):
    """Interpreter fallback mirroring the kernel's control flow exactly."""
    clock = 0.0
    n = work.n_sites
    next_chk = 0
    next_snap = 0
    since_rebuild = 0
    n_events = 0
    while True:
        if n_events >= event_cap:
            break
        total = table.total
        if total <= 0:
            fstate[_kernel.F_CLOCK] = clock
            istate[_kernel.I_EVENTS] = n_events
            istate[_kernel.I_ENERGY] = work.energy
            return STATUS_FROZEN
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        dt = -math.log(u) / total
        t_next = clock + dt
        while next_chk < chk_times.size and chk_times[next_chk] <= t_next:
            tau = chk_times[next_chk]
            chk_out[next_chk, :] = acc_int + table.leaves * (tau - acc_last)
            next_chk += 1
        while next_snap < snap_times.size and snap_times[next_snap] < t_next:
            snap_out[next_snap, :] = work.heights
            next_snap += 1
        if t_next > t_end:
            fstate[_kernel.F_CLOCK] = t_end
            istate[_kernel.I_EVENTS] = n_events
            istate[_kernel.I_ENERGY] = work.energy
            return STATUS_DONE
        entry = table.sample(rng.random() * total)
        bond = entry >> 1
        old = [(k, table.rate(k)) for k in _touched_entries(bond, n)]
        event = table.event_for_entry(entry, n)
        sgn = 1 if (entry & 1) == 0 else -1
        d = int(work.slopes[(bond - 1) % n]) - 2 * int(work.slopes[bond]) \
            + int(work.slopes[(bond + 1) % n])
        work.heights[event.from_site] -= 1
        work.heights[event.to_site] += 1
        work.slopes[(bond - 1) % n] -= sgn
        work.slopes[bond] += 2 * sgn
        work.slopes[(bond + 1) % n] -= sgn
        work.energy += 6 - 2 * d if sgn == 1 else 6 + 2 * d
        for k, r_old in old:
            acc_int[k] += r_old * (t_next - acc_last[k])
            acc_last[k] = t_next
        table.update_after_jump(work, bond)
        clock = t_next
        n_events += 1
        since_rebuild += 1
        if since_rebuild >= rebuild_interval:
            acc_int += table.leaves * (clock - acc_last)
            acc_last[:] = clock
            table.rebuild(work)
            since_rebuild = 0
    fstate[_kernel.F_CLOCK] = clock
    istate[_kernel.I_EVENTS] = n_events
    istate[_kernel.I_ENERGY] = work.energy
    return STATUS_EVENT_CAP


def _touched_entries(bond, n):
    out = []
    for off in range(-2, 3):
        bb = (bond + off) % n
        out.append(2 * bb)
        out.append(2 * bb + 1)
    return out


def time_averaged_rate(
    traj: Trajectory,
    site: int,
    t_center: float,
    delta: float,
    direction: str = "right",
) -> float:
    """Windowed time average of one hop rate from stored integrals.

    The window is [N^4 (T - delta), N^4 (T + delta)] in microscopic time
    (T and delta are macroscopic); both endpoints must have been scheduled
    as integral times.  Site i's rightward hop lives on bond i, its
    leftward hop on bond i-1.
    """
    n = traj.n_sites
    scale = float(n) ** 4
    t1 = scale * (t_center - delta)
    t2 = scale * (t_center + delta)
    if direction == "right":
        entry = 2 * (site % n)
    elif direction == "left":
        entry = 2 * ((site - 1) % n) + 1
    else:
        raise ValueError("direction must be 'right' or 'left'")
    i1 = _find_time(traj.integral_times, t1)
    i2 = _find_time(traj.integral_times, t2)
    return float(
        (traj.rate_integrals[i2, entry] - traj.rate_integrals[i1, entry])
        / (t2 - t1)
    )


def _find_time(times: np.ndarray, t: float) -> int:
    if times.size == 0:
        raise ValueError("trajectory recorded no integral checkpoints")
    i = int(np.argmin(np.abs(times - t)))
    tol = 1e-9 * max(1.0, abs(t))
    if abs(times[i] - t) > tol:
        raise ValueError(f"time {t:g} was not scheduled as an integral checkpoint")
    return i


def run_replicas(
    state: MicroState,
    beta: float,
    t_end: float,
    n_replicas: int,
    master_seed: int,
    schedule: Schedule | None = None,
    max_workers: int | None = None,
    **kwargs,
) -> list[Trajectory]:
    """Independent replicas of the same initial state, in parallel.

    Replica k uses the stream seeded from (master_seed, k); results are
    collected in replica order, so the output is deterministic no matter
    how many worker threads execute the (GIL-releasing) kernels.
    """

    def one(k: int) -> Trajectory:
        return run_until(state.copy(), beta, t_end, schedule=schedule,
                         rng=replica_rng(master_seed, k), **kwargs)

    if n_replicas == 1:
        return [one(0)]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, range(n_replicas)))
