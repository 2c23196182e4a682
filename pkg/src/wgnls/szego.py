"""The cubic Szegő equation ``i dv/dt = Pi_+(|v|^2 v)`` and its Hankel structure.

States are arrays ``v[0..P-1]`` of the nonnegative Fourier coefficients
(leading batch axes are allowed wherever noted).  The Hankel operator
``H_v h = Pi_+(v conj(h))`` is antilinear; it is stored as the symmetric
matrix ``Gamma[j, k] = v[j + k]`` and applied as ``Gamma @ conj(h)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .norms import besov_b1
from .spectral import _next_pow2
from .trajectory import Trajectory, integrate


def _pad_len(P: int, n_out: int) -> int:
    # products of modes [0, P) land in [-(P-1), 2(P-1)]; no aliasing onto
    # outputs [0, n_out) once the grid exceeds both ranges
    return _next_pow2(max(3 * P + 1, P + n_out + 1))


def szego_rhs(v: np.ndarray, n_out: int | None = None) -> np.ndarray:
    """``Pi_+(|v|^2 v)`` truncated to modes ``[0, n_out)`` (default ``len(v)``).

    Works on the last axis; computed by a zero-padded FFT product, which is
    exact for trigonometric polynomials.
    """
    v = np.asarray(v, dtype=complex)
    P = v.shape[-1]
    n_out = n_out or P
    n = _pad_len(P, n_out)
    u = np.fft.ifft(v, n=n, axis=-1) * n
    w = np.fft.fft(np.abs(u) ** 2 * u, axis=-1) / n
    return w[..., :n_out]


def szego_rhs_dense(v: np.ndarray, n_out: int | None = None) -> np.ndarray:
    """Triple-loop reference for :func:`szego_rhs`."""
    v = np.asarray(v, dtype=complex)
    P = v.size
    n_out = n_out or P
    out = np.zeros(n_out, dtype=complex)
    for a in range(P):
        for b in range(P):
            for c in range(P):
                p = a - b + c
                if 0 <= p < n_out:
                    out[p] += v[a] * np.conj(v[b]) * v[c]
    return out


def _padded(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=complex)
    m = min(n, len(v))
    out[:m] = v[:m]
    return out


def hankel_matrix(v: np.ndarray, P: int) -> np.ndarray:
    """``Gamma[j, k] = v[j + k]`` for ``0 <= j, k < P``."""
    c = _padded(np.asarray(v, dtype=complex), 2 * P - 1)
    return sla.hankel(c[:P], c[P - 1:])


def toeplitz_matrix(b: np.ndarray, P: int) -> np.ndarray:
    """``T[j, k] = b_{j-k}`` for symmetric-layout symbol coefficients ``b``."""
    b = np.asarray(b, dtype=complex)
    m = (b.size - 1) // 2
    get = lambda p: b[p + m] if abs(p) <= m else 0j
    col = np.array([get(j) for j in range(P)])
    row = np.array([get(-k) for k in range(P)])
    return sla.toeplitz(col, row)


def modulus_squared_symbol(v: np.ndarray) -> np.ndarray:
    """Symmetric-layout coefficients of ``|v|^2`` (modes ``-(P-1)..P-1``)."""
    v = np.asarray(v, dtype=complex)
    return np.convolve(v, np.conj(v[::-1]))


@dataclass(frozen=True)
class HankelOperator:
    """Antilinear ``h -> Gamma @ conj(h)`` with ``Gamma`` symmetric."""

    matrix: np.ndarray

    @classmethod
    def of(cls, v, P: int) -> "HankelOperator":
        return cls(hankel_matrix(v, P))

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, h: np.ndarray) -> np.ndarray:
        return self.matrix @ np.conj(h)

    def squared(self) -> np.ndarray:
        """Matrix of the linear operator ``H_v^2 = Gamma Gamma^H``."""
        return self.matrix @ self.matrix.conj().T


def operator_apply(kind: str, symbol: np.ndarray, h: np.ndarray,
                   path: str = "matrix") -> np.ndarray:
    """Apply ``hankel`` (symbol ``v``, nonnegative layout) or ``toeplitz``
    (symbol ``b``, symmetric layout) to ``h``, by matrix or by convolution."""
    h = np.asarray(h, dtype=complex)
    P = h.size
    if path == "matrix":
        if kind == "hankel":
            return HankelOperator.of(symbol, P)(h)
        if kind == "toeplitz":
            return toeplitz_matrix(symbol, P) @ h
    elif path == "convolution":
        if kind == "hankel":
            # v * conj(h): conj(h) has modes -(P-1)..0
            full = np.convolve(np.asarray(symbol, complex), np.conj(h[::-1]))
            return _padded(full[P - 1:], P)
        if kind == "toeplitz":
            b = np.asarray(symbol, complex)
            m = (b.size - 1) // 2
            full = np.convolve(b, h)  # modes -m .. m + P - 1
            return _padded(full[m:], P)
    raise ValueError(f"unknown operator {kind!r} or path {path!r}")


@dataclass(frozen=True)
class SpectralData:
    singular_values: np.ndarray
    trace_norm: float
    eigenvalues_sq: np.ndarray


def hankel_spectrum(v: np.ndarray, P: int | None = None, rel_cut: float = 1e-12) -> SpectralData:
    """Nonzero singular values of ``H_v`` (descending) and its trace norm.

    Eigenvalues of ``H_v^2`` are computed separately and cross-checked
    against the squared singular values.
    """
    v = np.asarray(v, dtype=complex)
    P = P or v.size
    if P < np.max(np.nonzero(v)[0], initial=0) + 1:
        raise ValueError("order P is smaller than the symbol support")
    G = hankel_matrix(v, P)
    try:
        sv = sla.svd(G, compute_uv=False)
        ev = np.sort(sla.eigvalsh(G @ G.conj().T))[::-1]
    except sla.LinAlgError as exc:
        raise RuntimeError(f"eigen-solver failed: {exc}") from exc
    scale = sv[0] if sv.size else 0.0
    if np.max(np.abs(ev - sv**2), initial=0.0) > 1e-10 * max(1.0, scale**2):
        raise RuntimeError("H_v^2 eigenvalues disagree with squared singular values")
    keep = sv > rel_cut * max(scale, 1e-300) if scale > 0 else np.zeros(sv.size, bool)
    return SpectralData(sv[keep], float(sv[keep].sum()), ev[keep])


def trace_norm(v: np.ndarray, P: int | None = None) -> np.ndarray:
    """Trace norm of ``H_v``; batched over leading axes."""
    v = np.asarray(v, dtype=complex)
    P = P or v.shape[-1]
    if v.ndim == 1:
        return np.asarray(np.sum(sla.svd(hankel_matrix(v, P), compute_uv=False)))
    flat = v.reshape(-1, v.shape[-1])
    mats = np.stack([hankel_matrix(row, P) for row in flat])
    return np.linalg.svd(mats, compute_uv=False).sum(axis=-1).reshape(v.shape[:-1])


def lax_residual(v: np.ndarray, P: int) -> float:
    """Frobenius gap between ``d/dt H_v`` and ``[B_v, H_v]`` on the band
    ``0 <= j, k <= p_max``, with ``B_v = (i/2) H_v^2 - i T_{|v|^2}``.

    Both sides are antilinear; each is stored as the matrix ``M`` of
    ``h -> M conj(h)``.  Then ``[B, H]`` has matrix ``B Gamma - Gamma conj(B)``.
    """
    v = np.asarray(v, dtype=complex)
    p_max = int(np.max(np.nonzero(v)[0], initial=0))
    if P < 3 * p_max + 2:
        raise ValueError(f"P={P} is below the padding 3*p_max+2={3 * p_max + 2}")
    dv = -1j * szego_rhs(v[:p_max + 1], n_out=2 * p_max + 1)
    lhs = hankel_matrix(dv, P)
    G = hankel_matrix(v, P)
    B = 0.5j * (G @ G.conj().T) - 1j * toeplitz_matrix(modulus_squared_symbol(v[:p_max + 1]), P)
    rhs = B @ G - G @ B.conj()
    band = slice(0, p_max + 1)
    return float(np.linalg.norm((lhs - rhs)[band, band]))


# -- evolution --------------------------------------------------------------------------

def szego_invariants(v: np.ndarray) -> dict:
    """Mass ``||v||^2_{L^2(dy)}``, momentum ``sum p |v_p|^2`` and
    ``(1/4) ||v||^4_{L^4}``; batched over leading axes."""
    v = np.asarray(v, dtype=complex)
    P = v.shape[-1]
    w = np.abs(v) ** 2
    n = _next_pow2(2 * P + 1)
    u = np.fft.ifft(v, n=n, axis=-1) * n
    quartic = 0.25 * 2 * np.pi * np.mean(np.abs(u) ** 4, axis=-1)
    return {"mass": 2 * np.pi * w.sum(axis=-1),
            "momentum": (np.arange(P) * w).sum(axis=-1),
            "hamiltonian": quartic}


def evolve_szego(v0: np.ndarray, t_end: float, tol: float = 1e-10, *, P: int | None = None,
                 t_eval=None, n_snap: int = 101, spectra: bool = False) -> Trajectory:
    """Integrate the Galerkin-truncated Szegő flow on modes ``[0, P)``.

    Parameters
    ----------
    v0 : initial nonnegative-mode coefficients (padded with zeros to ``P``)
    tol : relative tolerance of the adaptive integrator
    spectra : also record Hankel singular values at each snapshot
    """
    v0 = np.asarray(v0, dtype=complex)
    P = P or v0.size
    y0 = _padded(v0, P)
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, n_snap)
    # integrate w = e^{iMt} v with M the conserved coefficient mass; this
    # removes the trivial phase rotation, which otherwise dominates the error
    M = float(np.sum(np.abs(y0) ** 2))
    times, ws = integrate(lambda t, w: -1j * (szego_rhs(w) - M * w), y0, t_eval, tol)
    ys = ws * np.exp(-1j * M * times)[:, None]
    inv = szego_invariants(ys)
    if spectra:
        sv = np.linalg.svd(np.stack([hankel_matrix(y, P) for y in ys]), compute_uv=False)
        inv["singular_values"] = sv
    return Trajectory(times, list(ys), inv, {"equation": "szego", "P": P, "tol": tol})


def hs_norm_nonneg(v: np.ndarray, s: float) -> np.ndarray:
    """``(sum_{p>=0} (1+p^2)^s |v_p|^2)^(1/2)``; batched."""
    v = np.asarray(v)
    p = np.arange(v.shape[-1])
    return np.sqrt(np.sum((1 + p**2) ** s * np.abs(v) ** 2, axis=-1))


# -- Peller equivalence -----------------------------------------------------------------

def random_szego_states(n: int, p_max: int, rng: np.random.Generator,
                        decay: float = 1.0) -> np.ndarray:
    """Random states with ``v_p ~ N_C(0, 1) (1+p)^(-decay)`` on ``[0, p_max]``."""
    p = np.arange(p_max + 1)
    z = rng.standard_normal((n, p_max + 1)) + 1j * rng.standard_normal((n, p_max + 1))
    return z * (1.0 + p) ** -decay


def random_sparse_szego_states(n: int, p_max: int, rng: np.random.Generator,
                               max_decay: float = 2.0) -> np.ndarray:
    """Random states on a random support of ``1..p_max+1`` modes.

    Each state draws its support size, its support, and a decay exponent in
    ``[0, max_decay]``; the family mixes few-mode states, whose B^1/trace
    ratio is lowest, with dense ones.
    """
    out = np.zeros((n, p_max + 1), complex)
    for i in range(n):
        k = int(rng.integers(1, p_max + 2))
        support = rng.choice(p_max + 1, size=k, replace=False)
        decay = rng.uniform(0.0, max_decay)
        z = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        out[i, support] = z * (1.0 + support) ** -decay
    return out


def peller_ratio(states, rel_zero: float = 0.0) -> dict:
    """Band of ``||v||_{B^1} / Tr|H_v|`` over a family of nonnegative-mode
    states; zero states are skipped."""
    states = [np.asarray(s, complex) for s in states]
    states = [s for s in states if np.any(np.abs(s) > rel_zero)]
    if not states:
        raise ValueError("no nonzero states")
    P = max(s.size for s in states)
    V = np.stack([_padded(s, P) for s in states])
    sym = np.concatenate([np.zeros((V.shape[0], P - 1), complex), V], axis=1)
    b1 = besov_b1(sym)
    tr = trace_norm(V)
    r = b1 / tr
    return {"min": float(r.min()), "max": float(r.max()),
            "kappa": float(r.max() / r.min()), "ratios": r}


# -- cascade ----------------------------------------------------------------------------------

def cascade_datum(eps: float, odd: bool = False) -> np.ndarray:
    """``e^{iy} + eps``; with ``odd`` the transplant ``eps e^{iy} + e^{3iy}``.

    The transplant is ``e^{iy} W(2y)`` with ``W = e^{iy} + eps``.  Since the
    Szegő flow commutes with ``W(y) -> e^{iy} W(2y)``, both data have the same
    norm dynamics on rescaled modes.
    """
    if odd:
        v = np.zeros(4, complex)
        v[1], v[3] = eps, 1.0
        return v
    return np.array([eps, 1.0], dtype=complex)


def default_cascade_horizon(eps: float) -> float:
    # the norm peaks at t = (2k+1) pi / (2 eps); this window holds two peaks
    return 4 * np.pi / eps


def cascade_modes(eps: float, floor: int = 64) -> int:
    # the solution develops a pole at distance ~eps^2 from the circle
    return max(floor, _next_pow2(int(24 / eps**2)))


def szego_norm_series(v0: np.ndarray, t_eval, weights: np.ndarray, tol: float = 1e-9, *,
                      P: int, chunk: int = 200) -> tuple[np.ndarray, dict]:
    """``sum_p weights_p |v_p(t)|^2`` on ``t_eval``, integrated in chunks.

    Memory stays at ``chunk`` states regardless of ``len(t_eval)``.
    """
    t_eval = np.asarray(t_eval, float)
    weights = np.asarray(weights, float)
    out = np.empty(t_eval.size)
    state = _padded(np.asarray(v0, complex), P)
    tail, mass0, mass_dev = 0.0, None, 0.0
    start = 0
    while start < t_eval.size - 1 or start == 0:
        stop = min(start + chunk, t_eval.size - 1)
        seg = t_eval[start:stop + 1]
        traj = evolve_szego(state, seg[-1] - seg[0], tol, P=P, t_eval=seg - seg[0])
        ys = np.stack(traj.states)
        out[start:stop + 1] = np.sum(weights * np.abs(ys) ** 2, axis=-1)
        tail = max(tail, float(np.max(np.abs(ys[:, -max(P // 8, 1):]))))
        m = traj.invariants["mass"]
        mass0 = m[0] if mass0 is None else mass0
        mass_dev = max(mass_dev, float(np.max(np.abs(m - mass0))))
        state = ys[-1]
        start = stop
        if stop == t_eval.size - 1:
            break
    return out, {"mass_drift": mass_dev / mass0 if mass0 else 0.0, "tail": tail, "P": P}


def sup_hs_norm(v0: np.ndarray, t_max: float, s: float, tol: float = 1e-9, *,
                P: int, n_coarse: int = 401, n_fine: int = 401,
                rounds: int = 2) -> dict:
    """Sup of ``||v(t)||_{H^s}`` over ``[0, t_max]`` with local refinement.

    The norm spikes sharply near its maxima, so a coarse scan locates the
    bracket and each refinement round re-integrates only the bracketing
    interval from the stored state.  Only norms are kept, not trajectories.
    """
    traj = evolve_szego(v0, t_max, tol, P=P, n_snap=n_coarse)
    h = hs_norm_nonneg(np.stack(traj.states), s)
    times, states = traj.times, traj.states
    mass_drift = traj.drift("mass")
    tail = float(np.max(np.abs(np.stack(states)[:, -max(P // 8, 1):])))
    for _ in range(rounds):
        k = int(np.argmax(h))
        lo, hi = max(k - 1, 0), min(k + 1, len(times) - 1)
        local = evolve_szego(states[lo], times[hi] - times[lo], tol, P=P, n_snap=n_fine)
        times = times[lo] + local.times
        states = local.states
        h = hs_norm_nonneg(np.stack(states), s)
    k = int(np.argmax(h))
    return {"sup": float(h[k]), "argsup": float(times[k]), "mass_drift": mass_drift,
            "tail": tail}


def cascade_scan(eps_list, s: float = 0.75, t_max=None, tol: float = 1e-9,
                 P=None, n_coarse: int = 401) -> dict:
    """Sup over ``t <= t_max(eps)`` of ``||v(t)||_{H^s}`` for ``v0 = e^{iy} + eps``.

    ``t_max`` and ``P`` may be scalars or callables of ``eps``.  Returns one
    row per ``eps`` and a power-law fit ``sup ~ C eps^slope``.
    """
    rows = []
    for eps in eps_list:
        T = t_max(eps) if callable(t_max) else (t_max or default_cascade_horizon(eps))
        n_modes = P(eps) if callable(P) else (P or cascade_modes(eps))
        v0 = cascade_datum(eps)
        r = sup_hs_norm(v0, T, s, tol, P=n_modes, n_coarse=n_coarse)
        rows.append({"eps": eps, "t_max": T, "P": n_modes,
                     "initial": float(hs_norm_nonneg(v0, s)), **r})
    fit = None
    if len(rows) >= 2:
        e = np.log([r["eps"] for r in rows])
        m = np.log([r["sup"] for r in rows])
        slope, icpt = np.polyfit(e, m, 1)
        fit = {"slope": float(slope), "prefactor": float(np.exp(icpt))}
    return {"s": s, "rows": rows, "fit": fit}
