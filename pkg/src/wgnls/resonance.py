"""Momentum/resonance level sets on the torus and the resonant trilinear form.

A tuple ``(p0, p1, p2, p3)`` lies in the momentum set when
``p0 - p1 + p2 - p3 = 0`` and on level ``omega`` when
``|p0| - |p1| + |p2| - |p3| = omega``.  The resonant form sums
``F_q conj(G_r) H_s`` into output mode ``p`` over level-0 tuples ``(p, q, r, s)``.

Amplitude convention
--------------------
On the cylinder the resonant form acts on *resonant amplitudes*
``A_p(xi) = Fhat_p(xi) / (2 pi)``.  With that scaling the large-time limit of
the level-0 nonlinearity is exactly ``(pi / t) R`` and the resonant clock is
``tau = pi ln t``.  :func:`resonant_operator` handles the conversion.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .spectral import CylinderField, _check_same_grid

AMPLITUDE_SCALE = 1.0 / (2.0 * np.pi)


class ModeTuple(NamedTuple):
    p0: int
    p1: int
    p2: int
    p3: int

    @property
    def momentum(self) -> int:
        return self.p0 - self.p1 + self.p2 - self.p3

    @property
    def level(self) -> int:
        return abs(self.p0) - abs(self.p1) + abs(self.p2) - abs(self.p3)


@dataclass(frozen=True)
class ResonanceClass:
    all_nonneg: bool
    all_nonpos: bool
    pair_0123: bool
    pair_0321: bool

    @property
    def nonempty(self) -> bool:
        return self.all_nonneg or self.all_nonpos or self.pair_0123 or self.pair_0321

    def flags(self) -> tuple[int, int, int, int]:
        return (int(self.all_nonneg), int(self.all_nonpos),
                int(self.pair_0123), int(self.pair_0321))


def classify_tuple(t) -> ResonanceClass:
    """Four-case classification of a momentum-zero tuple."""
    t = ModeTuple(*map(int, t))
    if t.momentum != 0:
        raise ValueError(f"{tuple(t)} has nonzero momentum {t.momentum}")
    return ResonanceClass(
        all_nonneg=min(t) >= 0,
        all_nonpos=max(t) <= 0,
        pair_0123=t.p0 == t.p1 and t.p2 == t.p3,
        pair_0321=t.p0 == t.p3 and t.p2 == t.p1,
    )


def _momentum_tuples(p_max: int, odd_only: bool) -> np.ndarray:
    """All momentum-zero tuples in lexicographic order, shape ``(n, 4)``."""
    vals = np.arange(-p_max, p_max + 1)
    if odd_only:
        vals = vals[vals % 2 != 0]
    a, b, c = np.meshgrid(vals, vals, vals, indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    d = a - b + c
    ok = np.abs(d) <= p_max
    if odd_only:
        ok &= d % 2 != 0
    t = np.stack([a[ok], b[ok], c[ok], d[ok]], axis=1)
    # (a, b, c) are already lexicographic and d is determined by them
    return t


def _levels(t: np.ndarray) -> np.ndarray:
    s = np.abs(t)
    return s[:, 0] - s[:, 1] + s[:, 2] - s[:, 3]


def enumerate_level_set(omega: int, p_max: int, odd_only: bool = False) -> list[ModeTuple]:
    if p_max > 64:
        raise ValueError("enumeration is capped at p_max=64")
    t = _momentum_tuples(p_max, odd_only)
    t = t[_levels(t) == omega]
    return [ModeTuple(*map(int, row)) for row in t]


def exhaustive_classification_check(p_max: int = 30) -> dict:
    """Compare level-0 membership against the four-case classification.

    Runs over every momentum-zero tuple with entries in ``[-p_max, p_max]``.
    """
    t0 = time.perf_counter()
    t = _momentum_tuples(p_max, odd_only=False)
    on_level0 = _levels(t) == 0
    classified = ((t.min(axis=1) >= 0) | (t.max(axis=1) <= 0)
                  | ((t[:, 0] == t[:, 1]) & (t[:, 2] == t[:, 3]))
                  | ((t[:, 0] == t[:, 3]) & (t[:, 2] == t[:, 1])))
    bad = np.nonzero(on_level0 != classified)[0]
    return {
        "p_max": p_max,
        "n_tuples": int(t.shape[0]),
        "n_level0": int(on_level0.sum()),
        "mismatches": int(bad.size),
        "examples": [tuple(map(int, t[i])) for i in bad[:5]],
        "seconds": time.perf_counter() - t0,
    }


def dump_level_set(path, omega: int, p_max: int, odd_only: bool = False) -> int:
    rows = enumerate_level_set(omega, p_max, odd_only)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p0", "p1", "p2", "p3", "all_nonneg", "all_nonpos",
                    "pair_0123", "pair_0321"])
        for t in rows:
            w.writerow([*t, *classify_tuple(t).flags()])
    return len(rows)


# -- resonant trilinear form on coefficient arrays --------------------------------

@lru_cache(maxsize=64)
def _tuple_plan(p_max: int, variant: str, omega: int = 0):
    """Index arrays ``(p, q, r, s)`` (shifted by ``p_max``) for the requested sum."""
    t = _momentum_tuples(p_max, odd_only=False)
    if variant == "full":
        t = t[_levels(t) == omega]
    elif variant == "plus":
        t = t[(t > 0).all(axis=1)]
    elif variant == "minus":
        t = t[(t < 0).all(axis=1)]
    elif variant == "momentum":
        pass
    else:
        raise ValueError(f"unknown variant {variant!r}")
    idx = t + p_max
    # scatter matrix: contribution k lands in output column idx[k, 0]
    scatter = np.zeros((idx.shape[0], 2 * p_max + 1))
    scatter[np.arange(idx.shape[0]), idx[:, 0]] = 1.0
    idx.setflags(write=False)
    scatter.setflags(write=False)
    return idx, scatter


def resonant_sum(F: np.ndarray, G: np.ndarray, H: np.ndarray,
                 variant: str = "full") -> np.ndarray:
    """Trilinear tuple sum on coefficient arrays of shape ``(..., 2 p_max + 1)``.

    ``variant`` is ``full`` (level-0 tuples), ``plus``/``minus`` (all entries
    positive/negative) or ``momentum`` (every momentum-zero tuple).
    """
    F, G, H = (np.asarray(a, dtype=complex) for a in (F, G, H))
    if not F.shape == G.shape == H.shape:
        raise ValueError("operands have mismatched shapes")
    p_max = (F.shape[-1] - 1) // 2
    idx, scatter = _tuple_plan(p_max, variant)
    prod = F[..., idx[:, 1]] * np.conj(G[..., idx[:, 2]]) * H[..., idx[:, 3]]
    return prod @ scatter


def resonant_sum_dense(F, G, H, variant: str = "full") -> np.ndarray:
    """Reference triple loop for :func:`resonant_sum` (slow, for checks)."""
    F, G, H = (np.atleast_2d(np.asarray(a, dtype=complex)) for a in (F, G, H))
    p_max = (F.shape[-1] - 1) // 2
    out = np.zeros_like(F)
    rng = range(-p_max, p_max + 1)
    for p in rng:
        for q in rng:
            for r in rng:
                s = p - q + r
                if abs(s) > p_max:
                    continue
                tup = (p, q, r, s)
                if variant == "full" and ModeTuple(*tup).level != 0:
                    continue
                if variant == "plus" and min(tup) <= 0:
                    continue
                if variant == "minus" and max(tup) >= 0:
                    continue
                out[:, p + p_max] += (F[:, q + p_max] * np.conj(G[:, r + p_max])
                                      * H[:, s + p_max])
    return out


def sector_masses(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row masses ``(m_plus, m_minus)`` of the positive/negative modes."""
    p_max = (A.shape[-1] - 1) // 2
    w = np.abs(A) ** 2
    return w[..., p_max + 1:].sum(axis=-1), w[..., :p_max].sum(axis=-1)


def split_sectors(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_max = (A.shape[-1] - 1) // 2
    plus, minus = np.zeros_like(A), np.zeros_like(A)
    plus[..., p_max + 1:] = A[..., p_max + 1:]
    minus[..., :p_max] = A[..., :p_max]
    return plus, minus


def even_mode_content(A: np.ndarray) -> float:
    p_max = (A.shape[-1] - 1) // 2
    even = (np.arange(-p_max, p_max + 1) % 2) == 0
    scale = np.max(np.abs(A)) if A.size else 0.0
    return float(np.max(np.abs(A[..., even])) / scale) if scale > 0 else 0.0


def decoupled_sum(A: np.ndarray) -> np.ndarray:
    """``R+[A+] + R-[A-] + 2 m- A+ + 2 m+ A-`` for odd-mode coefficient rows."""
    plus, minus = split_sectors(A)
    m_plus, m_minus = sector_masses(A)
    return (resonant_sum(plus, plus, plus, "plus")
            + resonant_sum(minus, minus, minus, "minus")
            + 2 * m_minus[..., None] * plus + 2 * m_plus[..., None] * minus)


def decoupling_residual(G) -> float:
    """Sup over rows of the l2 gap between the full resonant sum and its
    sector-decoupled form.

    Accepts a :class:`CylinderField` (evaluated on resonant amplitudes) or a
    coefficient array of shape ``(..., 2 p_max + 1)``.
    """
    A = G.xy * AMPLITUDE_SCALE if isinstance(G, CylinderField) else np.asarray(G, complex)
    A = np.atleast_2d(A)
    if even_mode_content(A) > 1e-14:
        raise ValueError("decoupling requires odd-mode data")
    gap = resonant_sum(A, A, A, "full") - decoupled_sum(A)
    return float(np.max(np.linalg.norm(gap, axis=-1)))


def row_norm_max(A: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(np.atleast_2d(A), axis=-1)))


def resonant_operator(F: CylinderField, G: CylinderField, H: CylinderField,
                      variant: str = "full") -> CylinderField:
    """Resonant form on cylinder fields, acting on resonant amplitudes.

    Returns the field whose transform is ``2 pi * sum A^F conj(A^G) A^H``
    with ``A = Fhat / (2 pi)``.
    """
    _check_same_grid(F, G, H)
    s = AMPLITUDE_SCALE
    out = resonant_sum(F.xy * s, G.xy * s, H.xy * s, variant) / s
    return F.with_xy(out)
