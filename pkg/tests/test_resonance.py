import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgnls.experiments import DecouplingMismatchError, compare_resonant_methods, evolve_amplitudes
from wgnls.resonance import (AMPLITUDE_SCALE, ModeTuple, classify_tuple, decoupled_sum,
                             decoupling_residual, dump_level_set, enumerate_level_set,
                             exhaustive_classification_check, resonant_operator, resonant_sum,
                             resonant_sum_dense, sector_masses)
from wgnls.spectral import CylinderField, build_grid


def random_rows(n, p_max, seed, odd=False):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, 2 * p_max + 1)) + 1j * rng.standard_normal((n, 2 * p_max + 1))
    if odd:
        A[:, (np.arange(-p_max, p_max + 1) % 2) == 0] = 0
    return A


def test_classify_examples():
    assert classify_tuple((1, 1, 2, 2)).pair_0123
    assert classify_tuple((2, 1, 1, 2)).pair_0321
    assert classify_tuple((1, 2, 3, 2)).all_nonneg
    assert classify_tuple((-1, -3, -4, -2)).all_nonpos
    c = classify_tuple((-1, 2, 3, 0))
    assert not c.nonempty and ModeTuple(-1, 2, 3, 0).level != 0
    with pytest.raises(ValueError, match="momentum"):
        classify_tuple((1, 0, 0, 0))


def test_tuple_count_brute_force():
    p_max = 4
    vals = range(-p_max, p_max + 1)
    brute = [t for t in itertools.product(vals, repeat=4) if t[0] - t[1] + t[2] - t[3] == 0]
    level0 = [t for t in brute if ModeTuple(*t).level == 0]
    rep = exhaustive_classification_check(p_max)
    assert rep["n_tuples"] == len(brute)
    assert rep["n_level0"] == len(level0)
    assert sorted(map(tuple, enumerate_level_set(0, p_max))) == sorted(level0)


def test_classification_exhaustive():
    rep = exhaustive_classification_check(20)
    assert rep["mismatches"] == 0 and rep["examples"] == []


def test_level_set_cap_and_dump(tmp_path):
    with pytest.raises(ValueError):
        enumerate_level_set(0, 65)
    odd = enumerate_level_set(0, 5, odd_only=True)
    assert all(p % 2 for t in odd for p in t)
    n = dump_level_set(tmp_path / "l.csv", 0, 3)
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert len(lines) == n + 1 and lines[0].startswith("p0,p1,p2,p3")


@pytest.mark.parametrize("variant", ["full", "plus", "minus", "momentum"])
def test_sum_matches_dense(variant):
    F, G, H = (random_rows(3, 4, s) for s in (1, 2, 3))
    fast = resonant_sum(F, G, H, variant)
    slow = resonant_sum_dense(F, G, H, variant)
    assert np.max(np.abs(fast - slow)) < 1e-12 * np.max(np.abs(slow))


def test_sum_contract():
    with pytest.raises(ValueError):
        resonant_sum(np.ones(5), np.ones(5), np.ones(7))
    with pytest.raises(ValueError):
        resonant_sum(np.ones(5), np.ones(5), np.ones(5), "bogus")


def test_single_mode():
    A = np.zeros(11, complex)
    A[5 + 3] = 0.5 - 0.2j
    out = resonant_sum(A, A, A)
    expect = np.zeros(11, complex)
    expect[8] = abs(A[8]) ** 2 * A[8]
    assert np.max(np.abs(out - expect)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), p_max=st.integers(1, 8))
def test_hamiltonian_structure(seed, p_max):
    # <R(A), A> is real per row, so the flow conserves each row's l2 mass
    A = random_rows(2, p_max, seed)
    pairing = np.sum(resonant_sum(A, A, A) * np.conj(A), axis=-1)
    assert np.max(np.abs(pairing.imag)) < 1e-10 * np.max(np.abs(pairing.real))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), p_max=st.integers(1, 9))
def test_decoupling_identity(seed, p_max):
    A = random_rows(3, p_max, seed, odd=True)
    scale = np.max(np.abs(A)) ** 3
    assert decoupling_residual(A) < 1e-12 * scale * (2 * p_max + 1) ** 2


def test_decoupling_rejects_even_modes():
    with pytest.raises(ValueError, match="odd"):
        decoupling_residual(random_rows(1, 3, 0))


def test_sector_masses_and_decoupled_on_one_sector():
    A = random_rows(2, 5, 4, odd=True)
    A[:, :5] = 0
    mp, mm = sector_masses(A)
    assert np.allclose(mp, np.sum(np.abs(A) ** 2, axis=-1)) and np.all(mm == 0)
    assert np.allclose(decoupled_sum(A), resonant_sum(A, A, A, "plus"))


def test_operator_scaling():
    g = build_grid(16 * np.pi, 64, 3)
    F = CylinderField.from_modes(g, {1: lambda x: np.exp(-x**2), -3: lambda x: 0.4 * np.exp(-x**2 / 4)})
    R = resonant_operator(F, F, F)
    s = AMPLITUDE_SCALE
    assert np.allclose(R.xy, resonant_sum(F.xy * s, F.xy * s, F.xy * s) / s)
    R2 = resonant_operator(2 * F, 2 * F, 2 * F)
    assert np.allclose(R2.xy, 8 * R.xy)


def test_single_mode_evolution():
    A0 = np.zeros((1, 7), complex)
    A0[0, 3 + 1] = 0.7
    taus = np.linspace(0, 5, 6)
    A = evolve_amplitudes(A0, taus, 1e-12)
    exact = 0.7 * np.exp(-1j * 0.49 * taus)
    assert np.max(np.abs(A[:, 0, 4] - exact)) < 1e-9


def test_methods_agree():
    g = build_grid(16 * np.pi, 64, 5)
    G0 = CylinderField.from_modes(g, {1: lambda x: np.exp(-x**2), 3: lambda x: 0.5 * np.exp(-x**2),
                                      -1: lambda x: 0.6 * np.exp(-x**2 / 2)})
    assert compare_resonant_methods(G0, 5.0, 1e-12) < 1e-8
    with pytest.raises(DecouplingMismatchError):
        compare_resonant_methods(G0, 5.0, 1e-12, threshold=0.0)
