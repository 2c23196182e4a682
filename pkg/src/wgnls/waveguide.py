"""Full wave-guide flow ``(i d_t + d_xx - |D_y|) U = |U|^2 U`` and its pieces.

The profile ``F = exp(-itA) U`` obeys ``i dF/dt = N^t[F, F, F]`` with

    N^t[F, G, H] = exp(-itA)( exp(itA)F * conj(exp(itA)G) * exp(itA)H ).

All cubic products here are computed on an x grid zero-padded by a factor
of two, which is exact for band-limited inputs; the y grid already has room
for exact cubic products (``n_y >= 4 p_max + 2``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .norms import cylinder_norm
from .resonance import _momentum_tuples, _levels, resonant_operator
from .spectral import (CylinderField, CylinderGrid, _check_same_grid, dispersion,
                       fourier_x, free_evolve, inverse_fourier_x, torus_coefficients,
                       torus_values, _next_pow2)
from .trajectory import Trajectory, integrate


class StabilityError(ValueError):
    """Time step too large for the nonlinear phase."""


@dataclass(frozen=True)
class SplitStepConfig:
    """Strang splitting parameters.

    ``dealias`` applies the 2/3 rule in x to each nonlinear increment (y is
    truncated to the retained modes).  ``checkpoint_every`` counts steps.
    """

    dt: float = 1e-3
    checkpoint_every: int = 100
    dealias: bool = True
    nonlinear: bool = True


def _physical(c: np.ndarray, g: CylinderGrid) -> np.ndarray:
    return inverse_fourier_x(torus_values(c, g.n_y, axis=1), g.dx, axis=0)


def _coefficients(u: np.ndarray, g: CylinderGrid) -> np.ndarray:
    return torus_coefficients(fourier_x(u, g.dx, axis=0), g.p_max, axis=1)


def conserved_quantities(U: CylinderField) -> tuple[float, float]:
    """Mass ``||U||^2`` and energy ``1/2 <(-d_xx + |D_y|)U, U> + 1/4 ||U||_4^4``."""
    g = U.grid
    c = U.xy
    w = np.abs(c) ** 2
    mass = g.dxi * w.sum()
    kinetic = 0.5 * g.dxi * np.sum(dispersion(g) * w)
    u = _physical(c, g)
    quartic = 0.25 * g.dx * (2 * np.pi / g.n_y) * np.sum(np.abs(u) ** 4)
    return float(mass), float(kinetic + quartic)


def evolve_waveguide(U0: CylinderField, t_end: float, cfg: SplitStepConfig = SplitStepConfig(),
                     *, t_start: float = 0.0, check_wrap: bool = True) -> Trajectory:
    """Strang splitting for the full flow from ``t_start`` to ``t_end``.

    Returns a trajectory of :class:`CylinderField` snapshots (fourier_xy) with
    ``mass``, ``energy`` and ``even_leakage`` recorded at each checkpoint.
    """
    g = U0.grid
    if check_wrap:
        g.check_time(t_end)
    n_steps = int(round((t_end - t_start) / cfg.dt))
    if n_steps < 0:
        raise ValueError("t_end precedes t_start")
    dt = (t_end - t_start) / n_steps if n_steps else cfg.dt
    c = U0.xy.copy()
    disp = dispersion(g)
    half = np.exp(-0.5j * dt * disp)
    mask = (np.abs(g.xi) <= (2.0 / 3.0) * g.xi_max)[:, None] if cfg.dealias else 1.0
    even = g.modes % 2 == 0

    def guard(cc):
        peak = np.max(np.abs(_physical(cc, g))) ** 2
        if cfg.nonlinear and dt > 0.1 / max(peak, 1e-300):
            raise StabilityError(f"dt={dt:g} exceeds 0.1/max|U|^2={0.1 / peak:g}")

    guard(c)
    times, states, mass, energy, leak = [], [], [], [], []

    def record(t, cc):
        f = U0.with_xy(cc.copy())
        m, e = conserved_quantities(f)
        times.append(t)
        states.append(f)
        mass.append(m)
        energy.append(e)
        total = np.linalg.norm(cc)
        leak.append(float(np.linalg.norm(cc[:, even]) / total) if total else 0.0)

    record(t_start, c)
    for k in range(1, n_steps + 1):
        c = half * c
        if cfg.nonlinear:
            u = _physical(c, g)
            u *= np.exp(-1j * dt * np.abs(u) ** 2)
            # filter only the nonlinear increment: masking the whole field
            # would truncate its spectral tail and ring across the box
            c = c + mask * (_coefficients(u, g) - c)
        c = half * c
        if k % cfg.checkpoint_every == 0 or k == n_steps:
            guard(c)
            record(t_start + k * dt, c)
    inv = {"mass": np.array(mass), "energy": np.array(energy),
           "even_leakage": np.array(leak)}
    return Trajectory(np.array(times), states, inv,
                      {"equation": "waveguide", "dt": dt, "grid": g.header()})


def profile_of(U: CylinderField, t: float) -> CylinderField:
    """``F(t) = exp(-itA) U(t)``."""
    return free_evolve(U.to("fourier_xy"), -t)


# -- the trilinear nonlinearity ------------------------------------------------------

def _pad_x(c: np.ndarray, n_x: int, factor: int = 2) -> np.ndarray:
    """Embed FFT-ordered x-transforms into a grid ``factor`` times finer."""
    m = factor * n_x
    out = np.zeros((m,) + c.shape[1:], dtype=complex)
    k = np.fft.fftfreq(n_x, 1.0 / n_x).astype(int)
    out[k % m] = c
    return out


def _unpad_x(c: np.ndarray, n_x: int) -> np.ndarray:
    m = c.shape[0]
    k = np.fft.fftfreq(n_x, 1.0 / n_x).astype(int)
    return c[k % m]


def _free_physical_padded(c: np.ndarray, g: CylinderGrid, t: float, y: bool = True):
    """``exp(itA)`` applied to fourier_xy data, returned on the padded x grid.

    With ``y=False`` the torus index is kept (1-D flows per mode).
    """
    phase = np.exp(-1j * t * dispersion(g))
    cp = _pad_x(c * phase, g.n_x)
    if y:
        cp = torus_values(cp, g.n_y, axis=1)
    return inverse_fourier_x(cp, g.dx / 2, axis=0)


def _back_to_profile(u: np.ndarray, g: CylinderGrid, t: float, y: bool = True) -> np.ndarray:
    ch = fourier_x(u, g.dx / 2, axis=0)
    ch = _unpad_x(ch, g.n_x)
    if y:
        ch = torus_coefficients(ch, g.p_max, axis=1)
    return ch * np.exp(1j * t * dispersion(g))


def trilinear_N(F: CylinderField, G: CylinderField, H: CylinderField, t: float,
                resonant_only: bool = False, level: int | None = None,
                check_wrap: bool = True) -> CylinderField:
    """The profile nonlinearity ``N^t[F, G, H]``.

    With ``resonant_only`` (or an explicit ``level``) the sum is assembled
    from 1-D kernels over momentum-zero tuples on the requested level,
    weighted by ``exp(it * level)``; ``resonant_only`` means level 0.
    """
    _check_same_grid(F, G, H)
    g = F.grid
    if check_wrap:
        g.check_time(t)
    if not resonant_only and level is None:
        a = _free_physical_padded(F.xy, g, t)
        b = _free_physical_padded(G.xy, g, t)
        c = _free_physical_padded(H.xy, g, t)
        return F.with_xy(_back_to_profile(a * np.conj(b) * c, g, t))
    return F.with_xy(_level_sum(F, G, H, t, 0 if level is None else level))


def _level_sum(F, G, H, t, omega: int) -> np.ndarray:
    g = F.grid
    if g.p_max > 16:
        raise ValueError("tuple assembly is capped at p_max=16")
    # 1-D free flows per torus mode, only the x part (torus phases handled below)
    xi2 = g.xi[:, None] ** 2
    flow = lambda c: inverse_fourier_x(_pad_x(c * np.exp(-1j * t * xi2), g.n_x), g.dx / 2, axis=0)
    a, b, c = flow(F.xy), flow(G.xy), flow(H.xy)
    tuples = _momentum_tuples(g.p_max, odd_only=False)
    tuples = tuples[_levels(tuples) == omega]
    out = np.zeros((2 * g.n_x, g.n_p), dtype=complex)
    live = lambda arr, j: np.any(arr[:, j])
    for p, q, r, s in tuples:
        iq, ir, is_ = q + g.p_max, r + g.p_max, s + g.p_max
        if not (live(a, iq) and live(b, ir) and live(c, is_)):
            continue
        out[:, p + g.p_max] += a[:, iq] * np.conj(b[:, ir]) * c[:, is_]
    ch = _unpad_x(fourier_x(out, g.dx / 2, axis=0), g.n_x)
    return ch * np.exp(1j * t * xi2) * np.exp(1j * t * omega)


def trilinear_levels(F, G, H, t: float) -> dict:
    """Level-by-level pieces of ``N^t``; they sum to the full nonlinearity."""
    p = F.grid.p_max
    return {w: F.with_xy(_level_sum(F, G, H, t, w)) for w in range(-2 * p, 2 * p + 1)}


def kernel_1d(f: np.ndarray, g_: np.ndarray, h: np.ndarray, grid: CylinderGrid,
              t: float) -> np.ndarray:
    """``U(-t)(U(t)f * conj(U(t)g) * U(t)h)`` on x-transforms, ``U(t)=exp(it d_xx)``."""
    xi2 = grid.xi ** 2
    fl = lambda c: inverse_fourier_x(_pad_x(c * np.exp(-1j * t * xi2), grid.n_x), grid.dx / 2)
    prod = fl(f) * np.conj(fl(g_)) * fl(h)
    return _unpad_x(fourier_x(prod, grid.dx / 2), grid.n_x) * np.exp(1j * t * xi2)


def stationary_phase_deficit(F: CylinderField, t_list, s: float = 1.5) -> dict:
    """Distance between ``N_0^t[F,F,F]`` and ``(pi/t) R[F,F,F]`` over ``t_list``.

    Returns the series in ``Ys(s)`` and ``L2``, the log-log slopes of both,
    and ``t ||N_0^t|| / (pi ||R||)`` in ``L2``.
    """
    t_list = np.asarray(t_list, dtype=float)
    for t in t_list:
        F.grid.check_time(t)
    R = resonant_operator(F, F, F)
    r_l2 = cylinder_norm(R, "L2")
    d_y, d_l2, ratio = [], [], []
    for t in t_list:
        N0 = trilinear_N(F, F, F, t, resonant_only=True)
        gap = N0 - R * (np.pi / t)
        d_y.append(cylinder_norm(gap, "Ys", s=s))
        d_l2.append(cylinder_norm(gap, "L2"))
        ratio.append(t * cylinder_norm(N0, "L2") / (np.pi * r_l2) if r_l2 else np.nan)
    d_y, d_l2 = np.array(d_y), np.array(d_l2)
    slope = lambda d: (float(np.polyfit(np.log(t_list), np.log(d), 1)[0])
                       if len(t_list) > 1 and np.all(d > 0) else np.nan)
    return {"t": t_list, "Ys": d_y, "L2": d_l2, "ratio": np.array(ratio),
            "slope_Ys": slope(d_y), "slope_L2": slope(d_l2), "s": s}


# -- half-wave equation on the torus --------------------------------------------------

def _cubic_sym(u: np.ndarray) -> np.ndarray:
    """``|u|^2 u`` truncated to the modes of ``u`` (symmetric layout, exact)."""
    P = (u.shape[-1] - 1) // 2
    n = _next_pow2(4 * P + 2)
    vals = torus_values(u, n)
    return torus_coefficients(np.abs(vals) ** 2 * vals, P)


def halfwave_invariants(u: np.ndarray) -> dict:
    u = np.asarray(u, dtype=complex)
    P = (u.shape[-1] - 1) // 2
    p = np.abs(np.arange(-P, P + 1))
    w = np.abs(u) ** 2
    vals = torus_values(u, _next_pow2(4 * P + 2))
    quartic = 0.25 * 2 * np.pi * np.mean(np.abs(vals) ** 4, axis=-1)
    return {"mass": 2 * np.pi * w.sum(axis=-1),
            "energy": 0.5 * 2 * np.pi * (p * w).sum(axis=-1) + quartic}


def halfwave_evolve(u0: np.ndarray, t_end: float, tol: float = 1e-10, *, t_eval=None,
                    n_snap: int = 101) -> Trajectory:
    """``i du/dt = |D| u + |u|^2 u`` on symmetric-layout coefficients.

    Integrated in the interaction picture ``w = exp(it|D|) u``.
    """
    u0 = np.asarray(u0, dtype=complex)
    P = (u0.size - 1) // 2
    absp = np.abs(np.arange(-P, P + 1))
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, n_snap)

    def rhs(t, w):
        ph = np.exp(1j * t * absp)
        return -1j * ph * _cubic_sym(w / ph)

    times, ws = integrate(rhs, u0, t_eval, tol)
    us = ws * np.exp(-1j * np.outer(times, absp))
    return Trajectory(times, list(us), halfwave_invariants(us),
                      {"equation": "half-wave", "tol": tol})
