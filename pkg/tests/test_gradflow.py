"""Proximal stepping, minimizing movements, and convexity diagnostics."""

import math

import numpy as np
import pytest

from crystalsurf.gradflow import (
    DecayReport,
    ProximalProblem,
    decay_diagnostics,
    evi_residual,
    l2_norm,
    local_slope,
    minimizing_movement,
    phi_gradient,
    prox_step,
)
from crystalsurf.pde import (
    MacroProfile,
    SolverConfig,
    energy,
    evolve,
    poincare_rate,
    poincare_rate_discrete,
    rhs_slope,
)


def grid(n):
    return np.arange(n) / n


def mean_zero_profile(values):
    v = np.asarray(values, dtype=float)
    return MacroProfile(v - v.mean())


def smooth_random(n, rng, amplitude, modes=2):
    x = grid(n)
    v = np.zeros(n)
    for k in range(1, modes + 1):
        v += rng.standard_normal() * np.sin(2 * np.pi * k * x)
        v += rng.standard_normal() * np.cos(2 * np.pi * k * x)
    v -= v.mean()
    return amplitude * v / max(1.0, np.max(np.abs(v)))


# ---------------------------------------------------------------------------
# local slope
# ---------------------------------------------------------------------------


def test_local_slope_zero_at_minimizer():
    assert local_slope(MacroProfile(np.zeros(32))) == 0.0


def test_local_slope_linearized_value():
    n = 128
    eps = 1e-4
    p = MacroProfile(eps * np.sin(2 * np.pi * grid(n)))
    # linearization: |D2 sinh(D2 .)| ~ mu1^2 * h, so norm ~ eps mu1^2 / sqrt(2)
    want = eps * poincare_rate_discrete(n) / math.sqrt(2)
    assert local_slope(p) == pytest.approx(want, rel=1e-2)
    # continuum constant agrees to discretization accuracy
    assert local_slope(p) == pytest.approx(eps * poincare_rate() / math.sqrt(2), rel=1e-2)


def test_local_slope_equals_rhs_norm():
    rng = np.random.default_rng(0)
    p = mean_zero_profile(smooth_random(64, rng, 0.03))
    r = rhs_slope(p.values, p.dx)
    assert local_slope(p) == l2_norm(r, p.dx)


# ---------------------------------------------------------------------------
# prox step
# ---------------------------------------------------------------------------


def test_prox_fixed_point_at_zero():
    out = prox_step(ProximalProblem(MacroProfile(np.zeros(32)), tau=0.01))
    assert np.max(np.abs(out.values)) < 1e-12


def test_prox_decreases_objective():
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = mean_zero_profile(smooth_random(48, rng, 0.02))
        tau = 10 ** rng.uniform(-6, -3)
        out = prox_step(ProximalProblem(a, tau))
        lhs = energy(out) + l2_norm(out.values - a.values, a.dx) ** 2 / (2 * tau)
        assert lhs <= energy(a) + 1e-12
        assert abs(out.mean()) < 1e-12


def test_prox_small_tau_follows_negative_gradient():
    # gentle single-mode profile: nonlinear harmonics above the tau*mu_k^2
    # resolution scale would otherwise dominate the consistency error
    a = MacroProfile(0.01 * np.sin(2 * np.pi * grid(48)))
    tau = 1e-8
    out = prox_step(ProximalProblem(a, tau))
    move = (out.values - a.values) / tau
    want = -phi_gradient(a.values, a.dx)
    err = l2_norm(move - want, a.dx) / l2_norm(want, a.dx)
    assert err < 0.05


def test_prox_contraction_bound():
    # ||prox(a) - prox(b)|| <= ||a - b|| / (1 + tau lam)
    rng = np.random.default_rng(3)
    n = 48
    lam = poincare_rate_discrete(n)
    for _ in range(5):
        a = mean_zero_profile(smooth_random(n, rng, 0.02))
        b = mean_zero_profile(smooth_random(n, rng, 0.02))
        tau = 10 ** rng.uniform(-5, -3)
        pa = prox_step(ProximalProblem(a, tau))
        pb = prox_step(ProximalProblem(b, tau))
        lhs = l2_norm(pa.values - pb.values, pa.dx)
        rhs = l2_norm(a.values - b.values, a.dx) / (1 + tau * lam)
        assert lhs <= rhs + 1e-10


def test_discrete_lambda_convexity():
    # phi((1-t)u + tv) <= (1-t)phi(u) + t phi(v) - lam/2 t(1-t)||u-v||^2
    rng = np.random.default_rng(4)
    n = 40
    lam = poincare_rate_discrete(n)
    for _ in range(20):
        u = mean_zero_profile(smooth_random(n, rng, 0.03))
        v = mean_zero_profile(smooth_random(n, rng, 0.03))
        d2 = l2_norm(u.values - v.values, u.dx) ** 2
        for t in (0.25, 0.5, 0.75):
            mix = MacroProfile((1 - t) * u.values + t * v.values)
            lhs = energy(mix)
            rhs = (1 - t) * energy(u) + t * energy(v) - 0.5 * lam * t * (1 - t) * d2
            assert lhs <= rhs + 1e-12


# ---------------------------------------------------------------------------
# minimizing movement
# ---------------------------------------------------------------------------


def test_minimizing_movement_zero_initial():
    traj = minimizing_movement(MacroProfile(np.zeros(32)), 1e-3, 4)
    assert len(traj) == 5
    for p in traj:
        assert np.max(np.abs(p.values)) < 1e-12


def test_minimizing_movement_energy_monotone():
    rng = np.random.default_rng(5)
    h0 = mean_zero_profile(smooth_random(64, rng, 0.03))
    traj = minimizing_movement(h0, 2e-4, 16)
    phis = [energy(p) for p in traj]
    assert all(b <= a + 1e-12 for a, b in zip(phis, phis[1:]))
    for p in traj:
        assert abs(p.mean()) < 1e-12


def test_minimizing_movement_converges_to_pde():
    # PDE solve as the independent oracle; gap shrinks under step doubling
    n = 64
    h0 = MacroProfile(0.01 * np.sin(2 * np.pi * grid(n)))
    t_end = 5e-5
    ref = evolve(h0, t_end, SolverConfig(rel_tol=1e-11, abs_tol=1e-14)).profile
    gaps = []
    for steps in (4, 8, 16, 32):
        mm = minimizing_movement(h0, t_end, steps)[-1]
        gaps.append(l2_norm(mm.values - ref.values, ref.dx))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    # first-order in tau: halving the step roughly halves the gap
    ratios = [a / b for a, b in zip(gaps, gaps[1:])]
    assert all(1.5 < r < 2.5 for r in ratios)


def test_energy_inequality_against_candidates():
    # phi(h(t)) <= phi(v) + ||v - h0||^2 / (2 t) for v in {h0, 0}
    rng = np.random.default_rng(6)
    h0 = mean_zero_profile(smooth_random(48, rng, 0.03))
    t_end = 1e-4
    traj = minimizing_movement(h0, t_end, 32)
    final = traj[-1]
    phi_final = energy(final)
    for v in (h0, MacroProfile(np.zeros(48))):
        bound = energy(v) + l2_norm(v.values - h0.values, h0.dx) ** 2 / (2 * t_end)
        assert phi_final <= bound + 1e-10


# ---------------------------------------------------------------------------
# EVI residuals and decay diagnostics
# ---------------------------------------------------------------------------


def _pde_trajectory(h0, t_end, n_snap=40):
    times = np.linspace(h0.time, t_end, n_snap)
    res = evolve(h0, t_end, SolverConfig(rel_tol=1e-10, abs_tol=1e-13),
                 snapshot_times=times)
    return times, res.snapshots


def test_evi_residual_nonpositive_along_pde_flow():
    rng = np.random.default_rng(7)
    h0 = MacroProfile(0.02 * np.sin(2 * np.pi * grid(64)))
    times, snaps = _pde_trajectory(h0, 4e-4)
    for v in (MacroProfile(np.zeros(64)),
              mean_zero_profile(smooth_random(64, rng, 0.03)),
              mean_zero_profile(smooth_random(64, rng, 0.01))):
        res = evi_residual(times, snaps, v)
        scale = max(abs(energy(v) - 1.0), 1e-3)
        assert np.all(res <= 1e-3 * scale + 1e-9)


def test_evi_residual_at_v_equal_snapshot():
    h0 = MacroProfile(0.01 * np.sin(2 * np.pi * grid(48)))
    times, snaps = _pde_trajectory(h0, 2e-4, n_snap=20)
    v = snaps[10]
    vv = MacroProfile(v.values - v.values.mean())
    res = evi_residual(times, snaps, vv)
    # at the matching time the inequality degenerates to ~0 <= 0
    assert res[9] <= 1e-6


def test_decay_diagnostics_linearized_rates():
    n = 128
    eps = 1e-4
    h0 = MacroProfile(eps * np.sin(2 * np.pi * grid(n)))
    t_end = 2e-3
    times, snaps = _pde_trajectory(h0, t_end, n_snap=60)
    rep = decay_diagnostics(times, snaps)
    lam_d = poincare_rate_discrete(n)
    # smallest mode saturates the bounds: phi-gap decays at 2 lam, norms at lam
    assert rep.rate_phi == pytest.approx(2 * lam_d, rel=0.05)
    assert rep.rate_slope == pytest.approx(lam_d, rel=0.05)
    assert rep.rate_l2 == pytest.approx(lam_d, rel=0.05)
    assert rep.rate_l2 == pytest.approx(poincare_rate(), rel=0.05)
    assert rep.phi_bound_holds
    assert rep.slope_envelope_holds
    assert rep.rate_phi_stderr < 0.05 * rep.rate_phi


def test_decay_report_roundtrips_json():
    import json

    h0 = MacroProfile(1e-3 * np.sin(2 * np.pi * grid(32)))
    times, snaps = _pde_trajectory(h0, 1e-3, n_snap=12)
    rep = decay_diagnostics(times, snaps)
    doc = json.loads(rep.to_json())
    assert doc["lam"] == pytest.approx(poincare_rate_discrete(32))
    assert len(doc["times"]) == 12


def test_lambda_value_for_unit_period():
    assert poincare_rate(1.0) == pytest.approx(1558.5455, rel=1e-5)
