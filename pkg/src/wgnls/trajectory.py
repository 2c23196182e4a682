"""Time-stamped state sequences and the adaptive integrator wrapper."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp


class IntegrationError(RuntimeError):
    """The adaptive integrator failed (typically step-size underflow)."""


@dataclass
class Trajectory:
    """Snapshots ``states[k]`` at ``times[k]`` plus scalar diagnostics.

    ``invariants`` maps a name to an array aligned with ``times``.
    """

    times: np.ndarray
    states: list
    invariants: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def drift(self, name: str, relative: bool = True) -> float:
        """Max deviation of an invariant from its initial value."""
        s = np.asarray(self.invariants[name])
        d = np.max(np.abs(s - s[0]), axis=0)
        if relative:
            d = d / np.maximum(np.abs(s[0]), 1e-300)
        return float(np.max(d))

    def final(self):
        return self.states[-1]

    def to_jsonl(self, path, encode: Callable | None = None) -> None:
        """One record per snapshot; states are encoded by ``encode`` or as
        interleaved re/im float arrays."""
        with open(path, "w") as fh:
            fh.write(json.dumps({"meta": self.meta}) + "\n")
            for k, t in enumerate(self.times):
                if encode is not None:
                    rec = encode(self.states[k], float(t))
                else:
                    v = np.asarray(self.states[k]).ravel()
                    flat = np.empty(2 * v.size)
                    flat[0::2], flat[1::2] = v.real, v.imag
                    rec = {"time": float(t), "shape": list(np.shape(self.states[k])),
                           "values": flat.tolist()}
                rec["invariants"] = {n: np.asarray(s[k]).tolist()
                                     for n, s in self.invariants.items()}
                fh.write(json.dumps(rec) + "\n")


# solve_ivp silently raises smaller relative tolerances to this value
RTOL_FLOOR = 100 * np.finfo(float).eps
# below this amplitude an absolute tolerance would underflow in scipy's
# step-size heuristics
SCALE_FLOOR = np.sqrt(np.finfo(float).tiny)


def integrate(rhs: Callable, y0: np.ndarray, t_eval, tol: float, *,
              method: str = "DOP853", atol: float | None = None,
              first_step: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive explicit Runge-Kutta integration of ``dy/dt = rhs(t, y)``.

    ``y0`` may have any shape and may be complex.  Returns ``(times, ys)``
    with ``ys[k]`` shaped like ``y0``.
    """
    y0 = np.asarray(y0, dtype=complex)
    shape = y0.shape
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size < 1:
        raise ValueError("need at least one output time")
    if t_eval.size == 1 or t_eval[-1] == t_eval[0]:
        return t_eval.copy(), np.repeat(y0[None], t_eval.size, axis=0)
    scale = max(float(np.max(np.abs(y0))), SCALE_FLOOR)
    # solve_ivp controls an RMS over components; dividing by sqrt(n) turns it
    # into an l2 bound so that many tiny components cannot dilute the error
    root_n = np.sqrt(y0.size)
    atol = atol if atol is not None else tol * scale
    fun = lambda t, y: rhs(t, y.reshape(shape)).ravel()
    sol = solve_ivp(fun, (t_eval[0], t_eval[-1]), y0.ravel(), method=method,
                    t_eval=t_eval, rtol=max(tol / root_n, RTOL_FLOOR), atol=atol / root_n,
                    first_step=first_step)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.t, sol.y.T.reshape((-1,) + shape)
