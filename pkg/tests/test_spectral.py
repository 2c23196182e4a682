import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgnls.spectral import (CylinderField, DyadicProjectorFamily, EdgeMassWarning,
                            TorusField, WrapTimeError, annulus_bump, build_grid,
                            commutator_norm_estimate, dispersive_approximation,
                            dispersive_constant, field_from_record, field_to_record,
                            free_evolve, multiply_by_x, project, smooth_cutoff, transform)


@pytest.fixture(scope="module")
def grid():
    return build_grid(128 * np.pi, 1024, 7)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((grid.n_x, grid.n_p)) + 1j * rng.standard_normal((grid.n_x, grid.n_p))
    # band-limit in xi so the physical round trip is exact
    c *= (np.abs(grid.xi) < grid.xi_max / 2)[:, None]
    return CylinderField(grid, "fourier_xy", c)


def test_grid_arithmetic():
    g = build_grid(128 * np.pi, 1024, 7)
    assert g.dxi == pytest.approx(1 / 64)
    assert g.xi_max == pytest.approx(8.0)  # pi * n_x / L
    assert g.t_wrap == pytest.approx(g.L / (2 * g.xi_max))
    assert g.n_y >= 4 * 7 + 2
    assert build_grid(64 * np.pi, 512, 3).dxi == pytest.approx(1 / 32)


def test_grid_contract():
    with pytest.raises(ValueError, match="power of two"):
        build_grid(128 * np.pi, 1000, 7)
    with pytest.raises(ValueError, match="headroom"):
        build_grid(128 * np.pi, 1024, 7, n_y=16)
    with pytest.raises(WrapTimeError):
        build_grid(64 * np.pi, 512, 3).check_time(1e3)


def test_gaussian_transform(grid):
    f = CylinderField.from_function(grid, lambda x, y: np.exp(-x**2 / 2))
    fh = f.to("fourier_x").values[:, 0]
    exact = np.sqrt(2 * np.pi) * np.exp(-grid.xi**2 / 2)
    assert np.max(np.abs(fh - exact)) / np.max(exact) < 1e-10


def test_single_torus_mode(grid):
    f = CylinderField.from_function(grid, lambda x, y: np.exp(-x**2) * np.exp(3j * y))
    c = f.xy
    assert np.max(np.abs(np.delete(c, 3 + grid.p_max, axis=1))) < 1e-14
    t = TorusField.from_values(np.exp(3j * np.linspace(0, 2 * np.pi, 32, endpoint=False)), 7)
    assert t[3] == pytest.approx(1.0)
    assert np.sum(np.abs(t.coeffs)) == pytest.approx(1.0)


def test_round_trip(grid):
    F = random_field(grid)
    for rep in ("physical", "fourier_x"):
        back = transform(F.to(rep), "fourier_xy").values
        assert np.max(np.abs(back - F.values)) < 1e-12 * np.max(np.abs(F.values))


def test_parseval(grid):
    F = random_field(grid, 3)
    lhs = grid.dxi * np.sum(np.abs(F.xy) ** 2)
    u = F.to("physical").values
    rhs = grid.dx * (2 * np.pi / grid.n_y) * np.sum(np.abs(u) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_free_evolve_single_mode(grid):
    c = np.zeros((grid.n_x, grid.n_p), complex)
    k = int(np.argmin(np.abs(grid.xi - 1.0)))
    assert grid.xi[k] == pytest.approx(1.0)
    c[k, 2 + grid.p_max] = 1.0
    out = free_evolve(CylinderField(grid, "fourier_xy", c), np.pi).values
    assert out[k, 2 + grid.p_max] == pytest.approx(-1.0)
    F = random_field(grid)
    assert np.array_equal(free_evolve(F, 0.0).values, F.values)


@settings(max_examples=20, deadline=None)
@given(s=st.floats(-50, 50), t=st.floats(-50, 50))
def test_free_evolve_unitary_group(s, t):
    g = build_grid(16 * np.pi, 64, 2)
    F = random_field(g, 1)
    n0 = np.linalg.norm(F.values)
    Ft = free_evolve(F, t)
    assert np.linalg.norm(Ft.values) == pytest.approx(n0, rel=1e-12)
    two = free_evolve(free_evolve(F, s), t).values
    one = free_evolve(F, s + t).values
    assert np.max(np.abs(two - one)) < 1e-10 * np.max(np.abs(F.values))


def test_projectors(grid):
    F = CylinderField.from_function(grid, lambda x, y: np.exp(-x**2) * 2 * np.cos(y))
    plus = project(F, "Pi_plus").xy
    assert np.max(np.abs(plus[:, grid.p_max - 1])) == 0
    assert np.max(np.abs(plus[:, grid.p_max + 1] - F.xy[:, grid.p_max + 1])) == 0
    G = random_field(grid)
    rebuilt = project(G, "Pi_plus").xy + project(G, "Pi_minus").xy
    assert np.max(np.abs(rebuilt - G.xy)) == 0
    excl = project(G, "Pi_plus", inclusive_zero=False).xy
    assert np.all(excl[:, grid.p_max] == 0)
    with pytest.raises(ValueError, match="dyadic"):
        project(G, "Q_N", N=3)


def test_dyadic_partition():
    fam = DyadicProjectorFamily(40)
    modes = np.arange(-40, 41)
    _, table = fam.table(modes)
    assert np.max(np.abs(table.sum(axis=0) - 1)) < 1e-14
    rng = np.random.default_rng(0)
    v = rng.standard_normal(81) + 1j * rng.standard_normal(81)
    pieces = table * v[None, :]
    assert np.max(np.abs(pieces.sum(axis=0) - v)) < 1e-12


def test_cylinder_projector_families(grid):
    F = random_field(grid, 5)
    s0 = project(F, "S0").xy
    total = s0 + sum(project(F, "Delta_N", N).xy for N in (1, 2, 4, 8))
    assert np.max(np.abs(total - F.xy)) < 1e-12 * np.max(np.abs(F.xy))
    # telescoping in xi: Q_{<=1} + sum_{N>=2} Q_N = Q_{<=N_max}, identity on the band
    q = project(F, "Q_le_N", 1).xy + sum(project(F, "Q_N", N).xy for N in (2, 4, 8))
    assert np.max(np.abs(q - F.xy)) < 1e-12 * np.max(np.abs(F.xy))
    p = project(F, "P_le_N", 1).xy + sum(project(F, "P_N", N).xy for N in (2, 4, 8))
    assert np.max(np.abs(p - F.xy)) < 1e-12 * np.max(np.abs(F.xy))


def test_low_pass_plateau(grid):
    # Q_{<=N} leaves data with |xi| <= N untouched
    F = random_field(grid, 2)
    c = F.xy * (np.abs(grid.xi) <= 2)[:, None]
    G = F.with_xy(c)
    assert np.max(np.abs(project(G, "Q_le_N", 2).xy - c)) == 0


def test_cutoff_shape():
    x = np.linspace(-3, 3, 601)
    phi = smooth_cutoff(x)
    assert np.all(phi[np.abs(x) <= 1] == 1) and np.all(phi[np.abs(x) >= 2] == 0)
    assert np.all(np.diff(phi[x >= 0]) <= 0)
    assert np.all(annulus_bump(x)[np.abs(x) <= 0.5] == 0)


def test_multiply_by_x(grid):
    F = CylinderField.from_function(grid, lambda x, y: np.exp(-x**2 / 2) + 0 * y)
    xF = multiply_by_x(F)
    norm = np.sqrt(grid.dxi * np.sum(np.abs(xF.xy) ** 2))
    # int x^2 e^{-x^2} dx = sqrt(pi)/2, times the torus length 2 pi
    assert norm == pytest.approx(np.sqrt(np.sqrt(np.pi) / 2 * 2 * np.pi), rel=1e-10)
    odd = CylinderField.from_function(grid, lambda x, y: x * np.exp(-x**2 / 2) + 0 * y)
    u = multiply_by_x(odd).to("physical").values[1:, 0]
    assert np.max(np.abs(u - u[::-1])) < 1e-12


def test_edge_warning(grid):
    F = CylinderField.from_function(grid, lambda x, y: np.exp(-(np.abs(x) - grid.L / 2) ** 2) + 0 * y)
    with pytest.warns(EdgeMassWarning):
        multiply_by_x(F)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        multiply_by_x(CylinderField.from_function(grid, lambda x, y: np.exp(-x**2) + 0 * y))


def test_dispersive_constant_from_gaussian():
    # exp(it d_xx) e^{-x^2/2} = (1+2it)^{-1/2} exp(-x^2 / (2(1+2it))) in closed form;
    # its t -> infinity profile fixes the constant c
    t = 1e4
    x = np.linspace(-3 * t, 3 * t, 41)
    exact = (1 + 2j * t) ** -0.5 * np.exp(-x**2 / (2 * (1 + 2j * t)))
    shape = np.exp(1j * x**2 / (4 * t)) / np.sqrt(t) * np.sqrt(2 * np.pi) * np.exp(-x**2 / (8 * t**2))
    c_fit = np.vdot(shape, exact) / np.vdot(shape, shape)
    assert abs(c_fit - dispersive_constant()) < 1e-3 * abs(dispersive_constant())


def test_dispersive_deficit_rate():
    g = build_grid(1024 * np.pi, 8192, 1)
    f = np.exp(-g.x**2 / 2)
    d10 = dispersive_approximation(f, g, 10.0)[1]
    d100 = dispersive_approximation(f, g, 100.0)[1]
    assert d100 / d10 <= 10 ** -0.75 * 1.5
    zero, d = dispersive_approximation(np.zeros_like(f), g, 10.0)
    assert d == 0 and not np.any(zero)
    with pytest.raises(ValueError):
        dispersive_approximation(f, g, 0.5)


def test_commutator_band():
    g = build_grid(32 * np.pi, 2048, 1)
    vals = [commutator_norm_estimate(N, g) for N in (2, 4, 8, 16)]
    assert max(vals) / min(vals) < 4
    spec = commutator_norm_estimate(4, g, spectral=True)
    assert spec == pytest.approx(vals[1], rel=1e-10)


def test_field_record_round_trip(grid):
    F = random_field(grid, 7)
    G = field_from_record(field_to_record(F, time=1.5))
    assert G.grid == F.grid and np.array_equal(G.values, F.values)
