import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgnls.norms import (CYLINDER_NORMS, TrajectoryNorms, besov_b1, cylinder_norm,
                         hierarchy_audit, norm_report, random_band_limited_field,
                         torus_norm, write_reports_csv, xt_norm)
from wgnls.spectral import CylinderField, TorusField, build_grid


@pytest.fixture(scope="module")
def grid():
    return build_grid(128 * np.pi, 1024, 7)


def gaussian_mode(grid, p, a=1.0):
    return CylinderField.from_function(grid, lambda x, y: a * np.exp(-x**2 / 2) * np.exp(1j * p * y))


def test_torus_single_mode():
    v = TorusField.from_modes({3: 2.0}, 5)
    assert torus_norm(v, "hs_p", 1.5) == pytest.approx(2.0 * 10**0.75)
    assert torus_norm(v, "L2") == pytest.approx(2.0 * np.sqrt(2 * np.pi))
    assert torus_norm(v, "L1") == pytest.approx(2.0 * 2 * np.pi)
    with pytest.raises(ValueError):
        torus_norm(v, "Linf")


def test_torus_l1_cosine():
    # int |cos y| dy = 4
    v = TorusField.from_modes({1: 0.5, -1: 0.5}, 3)
    assert torus_norm(v, "L1", n_quad=4096) == pytest.approx(4.0, rel=1e-6)


def test_b1_constant_and_bounds():
    assert torus_norm(TorusField.from_modes({0: 1.0}, 4), "B1") == pytest.approx(2 * np.pi)
    rng = np.random.default_rng(0)
    c = rng.standard_normal((20, 17)) + 1j * rng.standard_normal((20, 17))
    b1 = besov_b1(c)
    l1 = np.array([torus_norm(r, "L1") for r in c])
    assert np.all(b1 >= l1 * (1 - 1e-12))
    # batched and chunked evaluation agree
    assert np.allclose(besov_b1(c, chunk=3), b1, rtol=1e-13)


def test_cylinder_closed_forms(grid):
    F = gaussian_mode(grid, 2)
    l2 = np.sqrt(2 * np.pi * np.sqrt(np.pi))
    assert cylinder_norm(F, "L2") == pytest.approx(l2, rel=1e-10)
    assert cylinder_norm(F, "L2xHs_y", s=1.0) == pytest.approx(np.sqrt(5) * l2, rel=1e-10)
    G = gaussian_mode(grid, 0)
    # sup_xi (1+xi^2) sqrt(2 pi) e^{-xi^2/2} is at xi = 1; the constant mode has B1 = 2 pi
    z = 2 * np.exp(-0.5) * np.sqrt(2 * np.pi) * 2 * np.pi
    assert cylinder_norm(G, "Z") == pytest.approx(z, rel=1e-10)
    assert cylinder_norm(CylinderField.zeros(grid), "Z") == 0.0
    with pytest.raises(ValueError):
        cylinder_norm(F, "bogus")


def test_sobolev_monotone(grid):
    F = random_band_limited_field(grid, np.random.default_rng(1))
    vals = [cylinder_norm(F, "Hs", s=s) for s in (0, 0.5, 1, 2)]
    assert vals[0] == pytest.approx(cylinder_norm(F, "L2"))
    assert np.all(np.diff(vals) > 0)
    assert cylinder_norm(F, "S_plus") > cylinder_norm(F, "S") > cylinder_norm(F, "Hs", s=4)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.complex_numbers(min_magnitude=0.1, max_magnitude=10))
def test_norm_axioms(seed, lam):
    g = build_grid(64 * np.pi, 512, 3)
    rng = np.random.default_rng(seed)
    F, G = random_band_limited_field(g, rng), random_band_limited_field(g, rng)
    for name in ("L2", "Ys", "Z", "S"):
        nF, nG = cylinder_norm(F, name, s=1), cylinder_norm(G, name, s=1)
        assert cylinder_norm(F + G, name, s=1) <= (nF + nG) * (1 + 1e-10)
        assert cylinder_norm(F * lam, name, s=1) == pytest.approx(abs(lam) * nF, rel=1e-9)


def test_report_serialisation(grid, tmp_path):
    F = gaussian_mode(grid, 1)
    r = norm_report(F, names=("L2", "Hs", "Z"), s=1.5, time=2.0)
    assert set(r.values) == {"L2", "Hs(1.5)", "Z"}
    assert json.loads(r.to_json())["time"] == 2.0
    write_reports_csv(tmp_path / "r.csv", [r])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "time,norm,value" and len(lines) == 4
    assert set(CYLINDER_NORMS) >= {"L2", "Z", "S"}


def test_xt_norm_static_trajectory(grid):
    F = gaussian_mode(grid, 1)
    traj = TrajectoryNorms.from_fields([0.0, 1.0, 2.0], [F, F, F], plus=True)
    assert np.all(traj.ds == 0)
    # (1+t)^-delta decreases, so the sup sits at t = 0
    assert xt_norm(traj) == pytest.approx(traj.z[0] + traj.s[0])
    assert xt_norm(traj, plus=True) == pytest.approx(traj.z[0] + traj.s[0] + traj.s_plus[0])
    with pytest.raises(ValueError):
        TrajectoryNorms.from_fields([0.0], [F])


def test_xt_norm_linear_in_time(grid):
    F = gaussian_mode(grid, 1)
    t = np.linspace(0, 1, 5)
    traj = TrajectoryNorms.from_fields(t, [F * (1 + s) for s in t])
    # dF/dt = F exactly, even under finite differences
    assert np.allclose(traj.ds, cylinder_norm(F, "S"), rtol=1e-12)


def test_hierarchy_audit_runs():
    g = build_grid(64 * np.pi, 512, 3)
    with pytest.raises(ValueError):
        hierarchy_audit(g, trials=10)
    rep = hierarchy_audit(g, trials=100, seed=3)
    for k, v in rep.items():
        assert 0 < v["min"] <= v["max"] < np.inf, k
    # Z is controlled by S with a constant of order one on this family
    assert rep["Z/S"]["max"] < 10
