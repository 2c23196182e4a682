"""Discrete norms on the torus and the cylinder, and trajectory aggregates.

Cylinder norms are evaluated on ``fourier_xy`` coefficients with the
quadrature ``int dxi -> dxi * sum_k``; sups over ``xi`` run over grid
frequencies only.  ``L^1`` norms on the torus use the measure ``dy``
(total length ``2 pi``).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .spectral import (CylinderField, DyadicProjectorFamily, TorusField, _next_pow2,
                       multiply_by_x, torus_values)

TORUS_NORMS = ("hs_p", "B1", "L1", "L2")
CYLINDER_NORMS = ("L2", "Hs", "L2xHs_y", "Ys", "Z", "S", "S_plus")

DEFAULT_SOBOLEV = 4


def _quad_points(p_max: int) -> int:
    return max(64, _next_pow2(8 * (2 * p_max + 1)))


def besov_b1(coeffs: np.ndarray, n_quad: int | None = None, chunk: int = 256) -> np.ndarray:
    """``B^1_{1,1}`` norm of each row of symmetric-layout coefficients.

    ``||S0 v||_L1 + sum_N N ||Delta_N v||_L1`` with trapezoid quadrature on
    ``n_quad`` points.
    """
    arr = np.asarray(coeffs, dtype=complex)
    lead = arr.shape[:-1]
    c = arr.reshape(-1, arr.shape[-1])
    p_max = (c.shape[-1] - 1) // 2
    n_quad = n_quad or _quad_points(p_max)
    levels, table = DyadicProjectorFamily(max(p_max, 1)).table(np.arange(-p_max, p_max + 1))
    weights = np.where(levels == 0, 1.0, levels).astype(float)
    out = np.empty(c.shape[0])
    for i in range(0, c.shape[0], chunk):
        block = c[i:i + chunk, None, :] * table[None, :, :]
        vals = torus_values(block, n_quad)
        l1 = np.abs(vals).mean(axis=-1) * 2 * np.pi
        out[i:i + chunk] = l1 @ weights
    return out.reshape(lead)


def torus_norm(v, which: str, s: float = 0.0, n_quad: int | None = None) -> float:
    """Norm of a :class:`TorusField` (or symmetric coefficient array).

    ``hs_p``: ``(sum (1+p^2)^s |v_p|^2)^(1/2)``; ``L2``: ``||v||_{L^2(dy)}``;
    ``L1``: trapezoid quadrature; ``B1``: see :func:`besov_b1`.
    """
    c = v.coeffs if isinstance(v, TorusField) else np.asarray(v, dtype=complex)
    p = np.arange(-(c.size // 2), c.size // 2 + 1)
    if which == "hs_p":
        return float(np.sqrt(np.sum((1 + p**2) ** s * np.abs(c) ** 2)))
    if which == "L2":
        return float(np.sqrt(2 * np.pi * np.sum(np.abs(c) ** 2)))
    if which == "L1":
        n_quad = n_quad or _quad_points(c.size // 2)
        return float(np.abs(torus_values(c, n_quad)).mean() * 2 * np.pi)
    if which == "B1":
        return float(besov_b1(c, n_quad))
    raise ValueError(f"unknown torus norm {which!r}")


# -- cylinder norms ---------------------------------------------------------------

def _weighted_l2(F: CylinderField, weight) -> float:
    c = F.xy
    return float(np.sqrt(F.grid.dxi * np.sum(weight * np.abs(c) ** 2)))


def _sobolev(F: CylinderField, s: float) -> float:
    g = F.grid
    w = (1 + g.xi[:, None] ** 2 + g.modes[None, :] ** 2) ** s
    return _weighted_l2(F, w)


def _s_norm(F: CylinderField, n_sobolev: int) -> float:
    return _sobolev(F, n_sobolev) + cylinder_norm(multiply_by_x(F), "L2")


def cylinder_norm(F: CylinderField, which: str, s: float = 0.0,
                  n_sobolev: int = DEFAULT_SOBOLEV, n_quad: int | None = None) -> float:
    """Norm of a cylinder field.

    Parameters
    ----------
    which : one of ``L2, Hs, L2xHs_y, Ys, Z, S, S_plus``
    s : Sobolev exponent for ``Hs``, ``L2xHs_y`` and ``Ys``
    n_sobolev : integer order of the ``H^N`` part of ``S`` and ``S_plus``
    """
    g = F.grid
    if which == "L2":
        return _weighted_l2(F, 1.0)
    if which == "Hs":
        return _sobolev(F, s)
    if which == "L2xHs_y":
        return _weighted_l2(F, (1 + g.modes[None, :] ** 2) ** s)
    if which == "Ys":
        c = F.xy
        per_xi = np.sum((1 + g.modes[None, :] ** 2) ** s * np.abs(c) ** 2, axis=1)
        return float(np.sqrt(np.max((1 + g.xi**2) ** 2 * per_xi)))
    if which == "Z":
        c = F.xy
        live = np.any(c != 0, axis=1)
        if not live.any():
            return 0.0
        b1 = besov_b1(c[live], n_quad)
        return float(np.max((1 + g.xi[live] ** 2) * b1))
    if which == "S":
        return _s_norm(F, n_sobolev)
    if which == "S_plus":
        smooth = F.with_xy(F.xy * ((1 + g.xi[:, None] ** 2) ** 4))
        return (_s_norm(F, n_sobolev) + _s_norm(smooth, n_sobolev)
                + _s_norm(multiply_by_x(F), n_sobolev))
    raise ValueError(f"unknown cylinder norm {which!r}")


@dataclass
class NormReport:
    """Named norm values of one field at one time."""

    values: dict
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    time: float | None = None

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def to_json(self) -> str:
        return json.dumps({"time": self.time, "values": self.values,
                           "grid": self.grid, "params": self.params})

    def csv_rows(self) -> list[tuple]:
        return [(self.time, k, v) for k, v in self.values.items()]


def norm_report(F: CylinderField, names=("L2", "Z", "S"), s: float = 1.5,
                n_sobolev: int = DEFAULT_SOBOLEV, time: float | None = None) -> NormReport:
    vals = {}
    for name in names:
        key = f"{name}({s:g})" if name in ("Hs", "L2xHs_y", "Ys") else name
        vals[key] = cylinder_norm(F, name, s=s, n_sobolev=n_sobolev)
    return NormReport(vals, F.grid.header(), {"s": s, "n_sobolev": n_sobolev}, time)


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "norm", "value"])
        for r in reports:
            w.writerows(r.csv_rows())


# -- trajectory aggregates ----------------------------------------------------------

@dataclass
class TrajectoryNorms:
    """Per-time ``Z``, ``S`` (and optionally ``S_plus``) of a field trajectory,
    together with the ``S``-norms of its finite-difference time derivative."""

    times: np.ndarray
    z: np.ndarray
    s: np.ndarray
    ds: np.ndarray
    s_plus: np.ndarray | None = None
    ds_plus: np.ndarray | None = None

    @classmethod
    def from_fields(cls, times, fields, n_sobolev: int = DEFAULT_SOBOLEV,
                    plus: bool = False) -> "TrajectoryNorms":
        times = np.asarray(times, dtype=float)
        if times.size < 2:
            raise ValueError("X_T needs at least two snapshots")
        coeffs = np.stack([f.xy for f in fields])
        dcoef = np.gradient(coeffs, times, axis=0)
        tmpl = fields[0]
        deriv = [tmpl.with_xy(d) for d in dcoef]
        z = np.array([cylinder_norm(f, "Z") for f in fields])
        s = np.array([cylinder_norm(f, "S", n_sobolev=n_sobolev) for f in fields])
        ds = np.array([cylinder_norm(f, "S", n_sobolev=n_sobolev) for f in deriv])
        sp = dsp = None
        if plus:
            sp = np.array([cylinder_norm(f, "S_plus", n_sobolev=n_sobolev) for f in fields])
            dsp = np.array([cylinder_norm(f, "S_plus", n_sobolev=n_sobolev) for f in deriv])
        return cls(times, z, s, ds, sp, dsp)


def xt_norm(traj: TrajectoryNorms, T: float | None = None, delta: float = 1e-3,
            plus: bool = False) -> float:
    """``sup_{t<=T} [ Z + (1+t)^-delta S + (1+t)^(1-3 delta) ||dF/dt||_S ]``.

    With ``plus`` the weighted ``S_plus`` terms are added to the supremand.
    """
    t = np.asarray(traj.times)
    if t.size < 2:
        raise ValueError("X_T needs at least two snapshots")
    keep = t <= (T if T is not None else t[-1])
    w = 1 + t[keep]
    terms = traj.z[keep] + w**-delta * traj.s[keep] + w ** (1 - 3 * delta) * traj.ds[keep]
    if plus:
        if traj.s_plus is None:
            raise ValueError("trajectory carries no S_plus values")
        terms = terms + (w ** (-5 * delta) * traj.s_plus[keep]
                         + w ** (1 - 7 * delta) * traj.ds_plus[keep])
    return float(np.max(terms))


# -- hierarchy audit ------------------------------------------------------------------

HIERARCHY_RATIOS = ("Y1/2/Z", "Z/Y1.5", "H1/2/Z", "Z/S", "Z/interp")


def hierarchy_ratios(F: CylinderField, n_sobolev: int = DEFAULT_SOBOLEV) -> dict | None:
    z = cylinder_norm(F, "Z")
    if z == 0:
        return None
    y_half = cylinder_norm(F, "Ys", s=0.5)
    y_32 = cylinder_norm(F, "Ys", s=1.5)
    h_half = cylinder_norm(F, "Hs", s=0.5)
    l2 = cylinder_norm(F, "L2")
    s = cylinder_norm(F, "S", n_sobolev=n_sobolev)
    return {"Y1/2/Z": y_half / z, "Z/Y1.5": z / y_32, "H1/2/Z": h_half / z,
            "Z/S": z / s, "Z/interp": z / (l2**0.25 * s**0.75)}


def random_band_limited_field(grid, rng: np.random.Generator, n_modes: int | None = None,
                              odd_only: bool = False) -> CylinderField:
    """Sum of Gaussian wave packets in ``x`` with random torus modes.

    Packets are well inside the box and resolved on the grid, so the family
    is defined independently of the discretisation.
    """
    p_max = grid.p_max
    modes = np.arange(-p_max, p_max + 1)
    if odd_only:
        modes = modes[modes % 2 != 0]
    n_modes = n_modes or int(rng.integers(1, min(len(modes), 4) + 1))
    chosen = rng.choice(modes, size=n_modes, replace=False)
    profiles = {}
    x = grid.x
    for p in chosen:
        centre = rng.uniform(-0.05, 0.05) * grid.L
        width = rng.uniform(1.0, 3.0)
        carrier = rng.uniform(-1.0, 1.0)
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        profiles[int(p)] = amp * np.exp(-((x - centre) ** 2) / (2 * width**2) + 1j * carrier * x)
    return CylinderField.from_modes(grid, profiles)


def hierarchy_audit(grid, trials: int = 200, seed: int = 0,
                    n_sobolev: int = DEFAULT_SOBOLEV) -> dict:
    """Empirical min/max of the hierarchy ratios over a random field family."""
    if trials < 100:
        raise ValueError("the audit needs at least 100 trials")
    rng = np.random.default_rng(seed)
    acc = {k: [] for k in HIERARCHY_RATIOS}
    for _ in range(trials):
        r = hierarchy_ratios(random_band_limited_field(grid, rng), n_sobolev)
        if r is None:
            continue
        for k, v in r.items():
            acc[k].append(v)
    return {k: {"min": float(np.min(v)), "max": float(np.max(v))} for k, v in acc.items()}
