import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgnls.experiments import (AMPLITUDE_SCALE, CascadeConfig, ComparisonSeries,
                               ScatteringConfig, back_propagation_diagnostic,
                               cascade_experiment, cascade_norm_profile, evolve_amplitudes,
                               gaussian_profile_field, growth_exponent_scan,
                               halfwave_comparison, modified_scattering_run, physical_time,
                               plateau_field, resonant_cascade_norm, resonant_evolve,
                               resonant_time, sector_trace_norms, stability_envelope,
                               z_conservation_audit)
from wgnls.norms import cylinder_norm
from wgnls.spectral import build_grid, smooth_cutoff
from wgnls.szego import cascade_datum


@pytest.fixture(scope="module")
def grid():
    return build_grid(32 * np.pi, 128, 7)


@settings(max_examples=20, deadline=None)
@given(t=st.floats(1e-3, 1e6))
def test_clock_round_trip(t):
    assert physical_time(resonant_time(t)) == pytest.approx(t, rel=1e-12)


def test_plateau_single_mode_phase(grid):
    # amplitude a on one mode rotates as a exp(-i |a|^2 tau)
    G0 = plateau_field(grid, {1: 0.8}, half_width=1.0)
    traj = resonant_evolve(G0, 3.0, 1e-12, n_snap=4)
    a0 = G0.xy[:, grid.p_max + 1] * AMPLITUDE_SCALE
    for tau, G in zip(traj.times, traj.states):
        a = G.xy[:, grid.p_max + 1] * AMPLITUDE_SCALE
        assert np.max(np.abs(a - a0 * np.exp(-1j * np.abs(a0) ** 2 * tau))) < 1e-9
    assert np.allclose(np.abs(a0).max(), 0.8)


def test_evolve_amplitudes_contract(grid):
    A = np.zeros((3, grid.n_p), complex)
    assert not np.any(evolve_amplitudes(A, [0.0, 1.0]))
    A[0, grid.p_max] = 1.0
    with pytest.raises(ValueError, match="odd"):
        evolve_amplitudes(A, [0.0, 1.0], method="decoupled")
    with pytest.raises(ValueError):
        evolve_amplitudes(A, [0.0, 1.0], method="euler")


def test_row_mass_and_methods(grid):
    G0 = gaussian_profile_field(grid, {1: 1.0, 3: 0.5j, -1: 0.6}, 1.5)
    d = resonant_evolve(G0, 5.0, 1e-12, "direct", n_snap=3)
    c = resonant_evolve(G0, 5.0, 1e-12, "decoupled", n_snap=3)
    m = d.invariants["row_mass"]
    assert np.max(np.abs(m - m[0])) < 1e-9 * np.max(m[0])
    assert np.max(np.abs(d.final().xy - c.final().xy)) < 1e-8 * np.max(np.abs(G0.xy))


def test_trace_norms_single_mode_and_batching(grid):
    G0 = gaussian_profile_field(grid, {1: 1.0, -3: 0.5}, 1.5)
    traj = resonant_evolve(G0, 4.0, 1e-12, "decoupled", n_snap=5)
    rep = z_conservation_audit(traj, kappa=1.5)
    # one mode per sector: trace norms are the moduli, which the flow conserves
    assert rep["trace_drift_rel"] < 1e-10 and rep["within_band"]
    A = np.stack([s.xy for s in traj.states]) * AMPLITUDE_SCALE
    tp, tm = sector_trace_norms(A[:, 60:68])
    tp1, tm1 = sector_trace_norms(A[2, 60:68])
    assert np.allclose(tp[2], tp1) and np.allclose(tm[2], tm1)


def test_growth_fit_recovers_power(grid):
    F = gaussian_profile_field(grid, {1: 1.0}, 1.5)
    t = np.geomspace(1, 100, 7)
    rep = growth_exponent_scan(t, [F * (1 + s) ** 0.3 for s in t])
    assert rep["alpha"] == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        growth_exponent_scan([1.0], [F])


def test_stability_envelope(grid):
    A0 = gaussian_profile_field(grid, {1: 1.0, 3: 0.3}, 1.5, 0.3)
    B0 = gaussian_profile_field(grid, {1: 1.01, 3: 0.3}, 1.5, 0.3)
    rep = stability_envelope(A0, B0, t_end=5.0, n_snap=6)
    assert rep["delta"] > 0 and np.isfinite(rep["rate"]) and rep["d"].size == 6
    with pytest.raises(ValueError, match="identical"):
        stability_envelope(A0, A0, t_end=1.0, n_snap=3)
    with pytest.raises(ValueError, match="positive"):
        stability_envelope(gaussian_profile_field(grid, {-1: 1.0}), B0, t_end=1.0)


def test_comparison_series_order():
    with pytest.raises(ValueError):
        ComparisonSeries(np.array([1.0, 1.0]), {"d": np.zeros(2)})
    s = ComparisonSeries(np.array([1.0, 2.0]), {"d": np.array([3.0, 4.0])})
    assert list(s.rows()) == [(1.0, "d", 3.0), (2.0, "d", 4.0)]


def test_cascade_profile_initial_value():
    # at tau = 0 the profile norm is the L2 H^s norm of the plateau datum
    eps, s = 0.3, 0.75
    g = build_grid(64 * np.pi, 512, 3)
    sigma, ns, _ = cascade_norm_profile(eps, s, 1.0, 64, n_snap=3)
    phi = smooth_cutoff(g.xi / 2.0)
    v = cascade_datum(eps, odd=True)
    G0 = plateau_field(g, {1: v[1], 3: v[3]}, half_width=2.0)
    expect = cylinder_norm(G0, "L2xHs_y", s=s)
    assert resonant_cascade_norm(g, phi, sigma, ns, 0.0)[0] == pytest.approx(expect, rel=1e-12)


def test_cascade_small_scan():
    cfg = CascadeConfig(eps_list=(0.4, 0.3, 0.2), n_snap=801, full_eps=None)
    out = cascade_experiment(cfg)
    assert out["strictly_increasing"] and out["fit_slope"] < 0
    assert "full" not in out


def test_halfwave_tol_invariance():
    a = halfwave_comparison((0.1,), P=16, tol=1e-10, n_snap=41)["rows"][0]["max_error"]
    b = halfwave_comparison((0.1,), P=16, tol=1e-12, n_snap=41)["rows"][0]["max_error"]
    assert a == pytest.approx(b, rel=1e-3)


def test_scattering_smoke():
    cfg = ScatteringConfig(L=64 * np.pi, n_x=512, p_max=3, T=10.0, dt=0.05, n_obs=4)
    res = modified_scattering_run(cfg)
    assert res.times[0] == 1.0 and res.values["d_S"][0] == 0.0
    assert np.isfinite(res.fits["ratio"]) and res.fits["ratio"] < 1


def test_back_propagation_iterates(grid):
    F = gaussian_profile_field(grid, {1: 1.0, 3: 0.5}, 1.5, 0.1)
    rep = back_propagation_diagnostic({1.0: F, 2.0: F, 4.0: F})
    assert rep["anchors"] == [1.0, 2.0, 4.0] and len(rep["cauchy_S"]) == 2
    assert all(d >= 0 for d in rep["cauchy_S"])
