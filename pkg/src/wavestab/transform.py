"""The backstepping map, its discrete inverse, boundary traces and feedback laws.

For a plant state ``(u, u_t)`` the target state is

    w   = h u - int_0^x k(x, y) u dy - int_0^x s(x, y) u_t dy
    w_t = h u_t + s_y(x, x) u - s(x, x) u_x - int_0^x (2 lambda s + k) u_t - int_0^x (beta s + s_yy) u

Integrals use the trapezoid rule on ``[0, x_i]`` and ``u_x`` uses backward
differences, so the discrete operator is block lower triangular and the
inverse is an exact forward substitution.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._numerics import trapezoid_weights, triangle_weights
from ._validation import check_case, check_positive
from .coeffs import eval_scalars
from .exceptions import ContractError, GridError, NumericalError

__all__ = [
    "WaveState",
    "ControlValue",
    "TransformOperator",
    "forward_transform",
    "inverse_transform",
    "trace_U3",
    "trace_U4_dd",
    "trace_U4_dn",
    "control_U1_dd",
    "control_U1_dn",
    "control_U2",
    "sat",
    "operator_norms",
    "BacksteppingTransform",
    "BacksteppingController",
]

_FRAMES = ("plant", "target")


@dataclass(frozen=True, eq=False)
class WaveState:
    """Node values of position and velocity on ``[0, L]`` at time ``t``."""

    t: float
    pos: np.ndarray
    vel: np.ndarray
    frame: str = "plant"
    L: float = 1.0

    def __post_init__(self):
        pos = np.asarray(self.pos, dtype=float)
        vel = np.asarray(self.vel, dtype=float)
        if pos.ndim != 1 or pos.shape != vel.shape:
            raise ContractError(f"pos and vel must be 1-D of equal length, got {pos.shape} and {vel.shape}")
        if pos.size < 3:
            raise GridError("a state needs at least 3 nodes")
        if self.frame not in _FRAMES:
            raise ContractError(f"frame must be one of {_FRAMES}, got {self.frame!r}")
        scale = max(1.0, float(np.max(np.abs(pos))))
        if abs(pos[0]) > 1e-12 * scale:
            raise ContractError(f"pos[0] must vanish, got {pos[0]!r}")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "vel", vel)
        object.__setattr__(self, "L", check_positive(self.L, "L"))

    @property
    def N(self):
        return self.pos.size - 1

    @property
    def dx(self):
        return self.L / self.N

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.N + 1)


@dataclass(frozen=True)
class ControlValue:
    u1: float
    u2: float
    sign_arg: float
    selection: float

    @property
    def total(self):
        return self.u1 + self.u2


def sat(z):
    """Saturation clamped to ``[-1, 1]``."""
    return np.clip(z, -1.0, 1.0)


def _on_grid(arr, N):
    n = len(arr) - 1
    if n == N:
        return np.asarray(arr, dtype=float)
    if n % N:
        raise GridError(f"array on {n} intervals cannot be restricted to {N}")
    return np.asarray(arr, dtype=float)[:: n // N]


class TransformOperator:
    """Dense matrices of the discrete transform on an ``N``-interval grid.

    Parameters
    ----------
    kp : KernelPair
        Kernels on ``M`` intervals with ``M`` a multiple of ``N``.
    profile : CoefficientProfile
        Supplies ``lambda`` and ``beta``.
    N : int, optional
        State grid; defaults to ``kp.M``.
    """

    def __init__(self, kp, profile, N=None):
        N = kp.M if N is None else int(N)
        kp = kp.subsample(N)
        if not np.isclose(profile.L, kp.grid.L, rtol=1e-12, atol=0.0):
            raise ContractError("profile and kernels have different lengths")
        self.kp = kp
        self.N = N
        self.L = kp.grid.L
        self.dx = self.L / N
        prof = profile if profile.N % N == 0 else profile.resample(N)
        lam = _on_grid(prof.lam, N)
        beta = _on_grid(prof.beta, N)
        self.h = np.asarray(kp.h, dtype=float)
        self.hL = kp.traces.hL
        self.hpL = kp.traces.hpL
        self.d = kp.d
        W = triangle_weights(N, self.dx)
        k = np.nan_to_num(kp.k)
        s = np.nan_to_num(kp.s)
        syy = np.nan_to_num(kp.syy)
        self.Kw = W * k
        self.Sw = W * s
        self.Aw = W * (2.0 * lam[None, :] * s + k)
        self.Bw = W * (beta[None, :] * s + syy)
        self.sd = np.asarray(kp.s_diag, dtype=float)
        self.sy = np.asarray(kp.traces.sy_diag, dtype=float)
        D = np.zeros((N + 1, N + 1))
        D[1, 0], D[1, 1] = -1.0 / self.dx, 1.0 / self.dx
        i = np.arange(2, N + 1)
        D[i, i] = 1.5 / self.dx
        D[i, i - 1] = -2.0 / self.dx
        D[i, i - 2] = 0.5 / self.dx
        self.D = D  # row 0 is multiplied by s(0, 0) = 0
        self.wq = trapezoid_weights(N, self.dx)
        t = kp.traces
        self.kL, self.sL, self.kxL, self.sxL = t.kL, t.sL, t.kxL, t.sxL
        self.kLL, self.sLL = t.kLL, t.sLL

    # full maps ---------------------------------------------------------------
    def apply(self, u, v):
        """Target ``(w, w_t)`` for plant arrays; works on stacks of states."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        w = self.h * u - u @ self.Kw.T - v @ self.Sw.T
        ux = u @ self.D.T
        wt = self.h * v + self.sy * u - self.sd * ux - v @ self.Aw.T - u @ self.Bw.T
        return w, wt

    def solve(self, w, wt):
        """Plant ``(u, u_t)`` from target arrays by forward substitution."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        wt = np.atleast_2d(np.asarray(wt, dtype=float))
        n = self.N
        u = np.zeros_like(w)
        v = np.zeros_like(w)
        for i in range(n + 1):
            rw = w[:, i] + u[:, :i] @ self.Kw[i, :i] + v[:, :i] @ self.Sw[i, :i]
            rt = (wt[:, i] + self.sd[i] * (u[:, :i] @ self.D[i, :i])
                  + v[:, :i] @ self.Aw[i, :i] + u[:, :i] @ self.Bw[i, :i])
            a11 = self.h[i] - self.Kw[i, i]
            a12 = -self.Sw[i, i]
            a21 = self.sy[i] - self.sd[i] * self.D[i, i] - self.Bw[i, i]
            a22 = self.h[i] - self.Aw[i, i]
            det = a11 * a22 - a12 * a21
            if not np.isfinite(det) or abs(det) < 1e-12 * max(1.0, abs(a11 * a22)):
                raise NumericalError(f"singular diagonal block at node {i} (det={det:.3e})")
            u[:, i] = (a22 * rw - a12 * rt) / det
            v[:, i] = (a11 * rt - a21 * rw) / det
        return u, v

    def matrix(self):
        """The full ``2(N+1)`` square matrix acting on ``[u, u_t]``."""
        n1 = self.N + 1
        eye = np.eye(n1)
        T = np.zeros((2 * n1, 2 * n1))
        T[:n1, :n1] = np.diag(self.h) - self.Kw
        T[:n1, n1:] = -self.Sw
        T[n1:, :n1] = np.diag(self.sy) - self.sd[:, None] * self.D - self.Bw
        T[n1:, n1:] = self.h[:, None] * eye - self.Aw
        return T

    # boundary quantities ------------------------------------------------------
    def _integral(self, f, g):
        return np.asarray(g, dtype=float) @ (self.wq * f)

    def u3(self, u, v, ux=None):
        """``w_t(L)`` from plant data; ``ux`` overrides the one-sided ``u_x(L)``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ux = u @ self.D[-1] if ux is None else ux
        return (self.hL * v[..., -1] + self.sy[-1] * u[..., -1] - self.sd[-1] * ux
                - v @ self.Aw[-1] - u @ self.Bw[-1])

    def u4_dd(self, u, v, ux=None):
        """``w_x(L)`` from plant data."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ux = u @ self.D[-1] if ux is None else ux
        return (self.hpL * u[..., -1] + self.hL * ux - self.sLL * v[..., -1] - self.kLL * u[..., -1]
                - self._integral(self.sxL, v) - self._integral(self.kxL, u))

    def u4_dn(self, u, v):
        """``w(L)`` from plant data (last row of the forward map)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.hL * u[..., -1] - u @ self.Kw[-1] - v @ self.Sw[-1]

    def u1_dd(self, u, v):
        return (u @ self.Kw[-1] + v @ self.Sw[-1]) / self.hL

    def u1_dn(self, u, v, gamma):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        inner = (-self.hpL * u[..., -1] + self.kLL * u[..., -1] + self._integral(self.kxL, u)
                 + self.sLL * v[..., -1] + self._integral(self.sxL, v))
        return -gamma * u[..., -1] + inner / self.hL


def _profile_of(scalars, profile):
    if profile is not None:
        return profile
    if scalars is None:
        raise ContractError("a coefficient profile (or scalars carrying one) is required")
    return scalars.profile


def _check_frame(state, frame):
    if state.frame != frame:
        raise ContractError(f"expected a {frame}-frame state, got {state.frame!r}")


def forward_transform(state, kp, scalars=None, profile=None):
    """Map a plant state to the target frame."""
    _check_frame(state, "plant")
    op = TransformOperator(kp, _profile_of(scalars, profile), state.N)
    w, wt = op.apply(state.pos, state.vel)
    w[0] = 0.0
    return WaveState(state.t, w, wt, "target", state.L)


def inverse_transform(state, kp, scalars=None, profile=None):
    """Map a target state back to the plant frame."""
    _check_frame(state, "target")
    op = TransformOperator(kp, _profile_of(scalars, profile), state.N)
    u, v = op.solve(state.pos, state.vel)
    return WaveState(state.t, u[0], v[0], "plant", state.L)


def trace_U3(state, kp, profile):
    """``w_t(t, L)`` computed from the plant state."""
    _check_frame(state, "plant")
    return float(TransformOperator(kp, profile, state.N).u3(state.pos, state.vel))


def trace_U4_dd(state, kp, profile):
    """``w_x(t, L)`` computed from the plant state."""
    _check_frame(state, "plant")
    return float(TransformOperator(kp, profile, state.N).u4_dd(state.pos, state.vel))


def trace_U4_dn(state, kp, profile):
    """``w(t, L)`` computed from the plant state."""
    _check_frame(state, "plant")
    return float(TransformOperator(kp, profile, state.N).u4_dn(state.pos, state.vel))


def _boundary_integral(kp, N, row, g):
    row = _on_grid(row, N)
    return float(np.asarray(g) @ (trapezoid_weights(N, kp.grid.L / N) * row))


def control_U1_dd(state, kp):
    """Backstepping part of the Dirichlet actuation."""
    _check_frame(state, "plant")
    N = state.N
    kpn = kp.subsample(N)
    return (_boundary_integral(kpn, N, kpn.traces.kL, state.pos)
            + _boundary_integral(kpn, N, kpn.traces.sL, state.vel)) / kpn.traces.hL


def control_U1_dn(state, kp, gamma=0.0):
    """Backstepping part of the Neumann actuation."""
    _check_frame(state, "plant")
    N = state.N
    kpn = kp.subsample(N)
    t = kpn.traces
    uL, vL = state.pos[-1], state.vel[-1]
    inner = (-t.hpL * uL + t.kLL * uL + _boundary_integral(kpn, N, t.kxL, state.pos)
             + t.sLL * vL + _boundary_integral(kpn, N, t.sxL, state.vel))
    return float(-gamma * uL + inner / t.hL)


def control_U2(case, traces, d, P, hL, eps):
    """Sliding-mode part with the sign replaced by ``sat(. / eps)``.

    ``traces`` is ``(u3, u4)``: ``(w_t(L), w_x(L))`` for DD and
    ``(w_t(L), w(L))`` for DN.
    """
    case = check_case(case)
    eps = check_positive(eps, "eps")
    P = check_positive(P, "P", strict=False)
    d = check_positive(d, "d")
    u3, u4 = (float(v) for v in traces)
    if case == "DD":
        arg = u4
        sel = float(sat(arg / eps))
        u2 = -u3 / (d * hL) - P * sel
    else:
        arg = u3 + d * u4
        sel = float(sat(arg / eps))
        u2 = -P * sel
    return ControlValue(0.0, u2, arg, sel)


# operator norms ---------------------------------------------------------------

def _x_gram(N, dx):
    """Gram matrix of the discrete X inner product on ``[pos, vel]`` (``d = 0``)."""
    from .energy import derivative_matrix

    w = np.diag(trapezoid_weights(N, dx))
    Dc = derivative_matrix(N, dx)
    n1 = N + 1
    G = np.zeros((2 * n1, 2 * n1))
    G[:n1, :n1] = Dc.T @ w @ Dc
    G[n1:, n1:] = w
    return G


def _smooth_basis(N, L, n_modes):
    x = np.linspace(0.0, L, N + 1)
    j = np.arange(1, n_modes + 1)
    pos = np.sin((j[None, :] - 0.5) * np.pi * x[:, None] / L)
    vel = np.cos((j[None, :] - 1) * np.pi * x[:, None] / L)
    n1 = N + 1
    B = np.zeros((2 * n1, 2 * n_modes))
    B[:n1, :n_modes] = pos
    B[n1:, n_modes:] = vel
    return B


def _power_norm(A_img, B, G, tol, max_iter=5000, seed=0):
    """Largest ratio ``||A z||_X / ||B z||_X`` by power iteration."""
    Gs = B.T @ G @ B
    Hs = A_img.T @ G @ A_img
    Gs = 0.5 * (Gs + Gs.T)
    Hs = 0.5 * (Hs + Hs.T)
    cho = np.linalg.cholesky(Gs)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(Gs.shape[0])
    lam_old = 0.0
    lam = 0.0
    for _ in range(max_iter):
        y = np.linalg.solve(cho.T, np.linalg.solve(cho, Hs @ z))
        z = y / np.linalg.norm(y)
        lam = float(z @ Hs @ z) / float(z @ Gs @ z)
        if abs(lam - lam_old) <= tol * abs(lam):
            break
        lam_old = lam
    return np.sqrt(lam)


def operator_norms(kp, profile, N=None, n_modes=None, tol=1e-8):
    """Estimates ``(C1, C2)`` of ``||Pi^-1||`` and ``||Pi||`` in the X norm.

    Both are taken over a span of smooth modes (``n_modes`` sines for the
    position and as many cosines for the velocity) so that grid-scale modes,
    which the central-difference X norm barely sees, do not pollute the
    estimate.
    """
    op = TransformOperator(kp, profile, N)
    n_modes = n_modes or max(4, op.N // 10)
    B = _smooth_basis(op.N, op.L, n_modes)
    G = _x_gram(op.N, op.dx)
    T = op.matrix()
    n1 = op.N + 1
    C2 = _power_norm(T @ B, B, G, tol)
    u, v = op.solve(B[:n1].T, B[n1:].T)
    inv_img = np.vstack([u.T, v.T])
    C1 = _power_norm(inv_img, B, G, tol)
    return float(C1), float(C2)


# estimator facade -------------------------------------------------------------

class BacksteppingTransform(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper: ``fit`` solves the kernels for a profile.

    ``transform`` maps rows ``[u_0..u_N, v_0..v_N]`` of plant states to rows of
    target states; ``inverse_transform`` goes back.
    """

    def __init__(self, d=1.0, tol=1e-10, max_iter=200, refine=8):
        self.d = d
        self.tol = tol
        self.max_iter = max_iter
        self.refine = refine

    def fit(self, X=None, y=None, profile=None):
        from .kernel import TriangularGrid, solve_kernels

        if profile is None:
            profile = X
        if profile is None or not hasattr(profile, "lam"):
            raise ContractError("fit needs a CoefficientProfile")
        self.profile_ = profile
        self.scalars_ = eval_scalars(profile, self.d)
        self.kernels_ = solve_kernels(self.scalars_, TriangularGrid(profile.L, profile.N), self.tol,
                                      self.max_iter, self.refine)
        self.operator_ = TransformOperator(self.kernels_, profile)
        self.n_features_in_ = 2 * (profile.N + 1)
        return self

    def _split(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n1 = self.operator_.N + 1
        if X.shape[1] != 2 * n1:
            raise GridError(f"expected {2 * n1} columns, got {X.shape[1]}")
        return X[:, :n1], X[:, n1:]

    def transform(self, X):
        check_is_fitted(self, "kernels_")
        u, v = self._split(X)
        w, wt = self.operator_.apply(u, v)
        w[:, 0] = 0.0
        return np.hstack([w, wt])

    def inverse_transform(self, X):
        check_is_fitted(self, "kernels_")
        w, wt = self._split(X)
        u, v = self.operator_.solve(w, wt)
        return np.hstack([u, v])


class BacksteppingController(BaseEstimator):
    """Feedback ``U = U1 + U2`` for a fitted :class:`BacksteppingTransform`.

    ``predict`` returns the total boundary actuation for each row of plant
    states.
    """

    def __init__(self, case="DD", P=1.0, eps=1e-3, gamma=0.0):
        self.case = case
        self.P = P
        self.eps = eps
        self.gamma = gamma

    def fit(self, transform, y=None):
        check_is_fitted(transform, "kernels_")
        self.case_ = check_case(self.case)
        check_positive(self.eps, "eps")
        self.transform_ = transform
        return self

    def control_values(self, X):
        check_is_fitted(self, "transform_")
        op = self.transform_.operator_
        u, v = self.transform_._split(X)
        out = []
        for ui, vi in zip(u, v):
            u3 = op.u3(ui, vi)
            if self.case_ == "DD":
                u1 = op.u1_dd(ui, vi)
                cv = control_U2("DD", (u3, op.u4_dd(ui, vi)), op.d, self.P, op.hL, self.eps)
            else:
                u1 = op.u1_dn(ui, vi, self.gamma)
                cv = control_U2("DN", (u3, op.u4_dn(ui, vi)), op.d, self.P, op.hL, self.eps)
            out.append(ControlValue(float(u1), cv.u2, cv.sign_arg, cv.selection))
        return out

    def predict(self, X):
        return np.array([c.total for c in self.control_values(X)])
