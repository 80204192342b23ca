"""Energies, the X inner product, equivalence constants and decay fits."""

from dataclasses import asdict, dataclass
import json

import numpy as np

from ._numerics import trapezoid_weights
from ._validation import check_positive
from .exceptions import ContractError, FitError

__all__ = [
    "derivative_matrix",
    "energy_E",
    "energy_V",
    "x_norm",
    "x_inner",
    "equivalence_bounds",
    "constant_K",
    "EnergyReport",
    "fit_decay",
]


def derivative_matrix(N, dx):
    """Central differences inside, 3-point one-sided at both ends."""
    D = np.zeros((N + 1, N + 1))
    i = np.arange(1, N)
    D[i, i + 1] = 0.5 / dx
    D[i, i - 1] = -0.5 / dx
    D[0, :3] = np.array([-1.5, 2.0, -0.5]) / dx
    D[N, N - 2 :] = np.array([0.5, -2.0, 1.5]) / dx
    return D


def _dx(f, dx):
    return np.gradient(f, dx, edge_order=2)


def _integral(f, dx):
    return float(trapezoid_weights(f.size - 1, dx) @ f)


def energy_E(state):
    """``1/2 int (u_t^2 + u_x^2)``."""
    return 0.5 * (_integral(state.vel**2, state.dx) + _integral(_dx(state.pos, state.dx) ** 2, state.dx))


def energy_V(state, d):
    """``1/2 int (w_t + d w)^2 + 1/2 int w_x^2`` for a target state."""
    if state.frame != "target":
        raise ContractError("energy_V needs a target-frame state")
    return 0.5 * x_inner(state, state, d)


def x_inner(s1, s2, d=0.0):
    """``int q1' q2' + int (l1 + d q1)(l2 + d q2)``."""
    if s1.N != s2.N:
        raise ContractError("states live on different grids")
    dx = s1.dx
    a = _integral(_dx(s1.pos, dx) * _dx(s2.pos, dx), dx)
    b = _integral((s1.vel + d * s1.pos) * (s2.vel + d * s2.pos), dx)
    return a + b


def x_norm(state):
    """``sqrt(||u_t||^2 + ||u_x||^2)``."""
    return float(np.sqrt(x_inner(state, state, 0.0)))


def equivalence_bounds(L, d):
    """Constants ``lo, hi`` with ``lo int(w_t^2 + w_x^2) <= 2V <= hi int(w_t^2 + w_x^2)``."""
    L = check_positive(L, "L")
    d = check_positive(d, "d")
    c = 8.0 * L * L * d * d + 1.0
    return min(1.0 / c, 0.5), max(c, 2.0)


def constant_K(L, d):
    lo, hi = equivalence_bounds(L, d)
    return hi / lo


@dataclass(frozen=True)
class EnergyReport:
    E0: float
    V0: float
    slope: float
    prefactor: float
    residual: float
    K: float
    C_empirical: float
    window: tuple

    def to_dict(self):
        out = asdict(self)
        out["window"] = list(self.window)
        return out

    def to_json(self):
        keys = ("slope", "prefactor", "K", "C_empirical", "window", "residual", "E0", "V0")
        d = self.to_dict()
        return json.dumps({k: d[k] for k in keys}, indent=2, allow_nan=True)


def fit_decay(trace, window=None, d=None, L=None):
    """Least-squares line through ``(t, log V)`` over ``window``.

    ``trace`` needs ``times``, ``V`` and ``E`` arrays; ``d`` and ``L`` default
    to attributes of the trace when present. Samples below ``1e-14 V(0)`` are
    skipped.
    """
    t = np.asarray(trace.times, dtype=float)
    V = np.asarray(trace.V, dtype=float)
    E = np.asarray(trace.E, dtype=float)
    d = getattr(trace, "d", None) if d is None else d
    L = getattr(trace, "L", None) if L is None else L
    if window is None:
        window = (0.1 * t[-1], 0.9 * t[-1])
    lo, hi = window
    V0 = float(V[0])
    keep = (t >= lo) & (t <= hi) & (V > 1e-14 * V0) & np.isfinite(V)
    if keep.sum() < 10:
        raise FitError(f"only {int(keep.sum())} usable samples in window {window}")
    coef, res, *_ = np.polyfit(t[keep], np.log(V[keep]), 1, full=True)
    slope, intercept = float(coef[0]), float(coef[1])
    rms = float(np.sqrt(res[0] / keep.sum())) if len(res) else 0.0
    K = constant_K(L, d) if (L is not None and d is not None) else float("nan")
    if d is not None and E[0] > 0:
        C = float(np.max(E * np.exp(2.0 * d * t)) / E[0])
    else:
        C = float("nan")
    return EnergyReport(float(E[0]), V0, slope, float(np.exp(intercept)), rms, K, C, (float(lo), float(hi)))
