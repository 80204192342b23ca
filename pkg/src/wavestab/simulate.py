"""Time stepping of the closed-loop plant and of the target system.

Both runs use the leapfrog scheme

    (1 - lam dt) u^{n+1} = 2 u^n - (1 + lam dt) u^{n-1} + dt^2 (D2 u^n + beta u^n)

with the damping term centred in time, a Taylor-expanded ghost level
``u^{-1}`` and ``dt = cfl * dx``. The boundary node is found from the
regularized boundary law, which is affine in the single unknown apart from
one saturation; that scalar equation is solved exactly.

Dirichlet cases take ``u_t`` at the new level from the 3-point backward
formula. Neumann cases use a ghost node whose flux is the unknown, with the
central ``u_t`` at the current level.
"""

from dataclasses import dataclass, field, replace
import math
from typing import Optional
import warnings

import numpy as np

from ._validation import check_case, check_int, check_positive
from .coeffs import CoefficientProfile, eval_scalars
from .energy import energy_E, energy_V
from .exceptions import ContractError, DomainError, InstabilityError, NumericalError, ParameterError
from .transform import TransformOperator, WaveState, sat

__all__ = [
    "Disturbance",
    "disturbance_eval",
    "InitialCondition",
    "SimConfig",
    "TrajectoryRecord",
    "run_closed_loop",
    "run_target_direct",
    "plant_kernels",
    "initial_boundary_residual",
]

INIT_RESIDUAL_TOL = 1e-2
_KINDS = ("zero", "raised_cosine", "decaying_sine", "custom_table")


@dataclass(frozen=True)
class Disturbance:
    """Bounded boundary disturbance ``p(t)`` with ``|p| <= P``.

    ``table`` is a pair ``(times, values)`` for ``custom_table``; beyond the
    last sample the last value is held.
    """

    kind: str = "zero"
    P: float = 0.0
    omega: float = 2.0 * math.pi
    mu: float = 0.0
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ParameterError(f"unknown disturbance kind {self.kind!r}; expected one of {_KINDS}")
        check_positive(self.P, "P", strict=False)
        check_positive(self.mu, "mu", strict=False)
        if self.kind == "custom_table":
            if self.table is None:
                raise ParameterError("custom_table needs a (times, values) table")
            t, v = (np.asarray(a, dtype=float) for a in self.table)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2 or np.any(np.diff(t) <= 0):
                raise ParameterError("table times must increase strictly and match the values")
            if np.max(np.abs(v)) > self.P * (1 + 1e-12):
                raise ParameterError("table values exceed the amplitude bound P")
            object.__setattr__(self, "table", (t, v))

    @property
    def is_zero(self):
        return self.kind == "zero" or self.P == 0.0

    def __call__(self, t):
        return disturbance_eval(self, t)


def disturbance_eval(dist, t):
    if t < 0:
        raise DomainError(f"disturbance evaluated at negative time {t}")
    P = dist.P
    if dist.kind == "zero":
        val = 0.0
    elif dist.kind == "raised_cosine":
        val = 0.5 * P * (1.0 - math.cos(dist.omega * t))
    elif dist.kind == "decaying_sine":
        val = P * math.sin(dist.omega * t) * (1.0 - math.exp(-t)) ** 2 * math.exp(-dist.mu * t)
    else:
        times, values = dist.table
        val = float(np.interp(t, times, values))
    assert abs(val) <= P * (1 + 1e-12) + 1e-300, "disturbance exceeds its bound"
    return val


_SHAPES = ("bump", "sine", "zero", "table")


@dataclass(frozen=True)
class InitialCondition:
    """Named initial shapes, all vanishing at ``x = 0`` and with zero velocity.

    * ``bump``: ``A sin^4(pi x / L)``, flat at both ends;
    * ``sine``: ``A sin(mode pi x / L)``;
    * ``zero``;
    * ``table``: explicit ``(pos, vel)`` node arrays.

    ``frame`` says in which coordinates the shape is given; a target-frame
    shape handed to the plant is pulled back through the inverse transform.
    """

    shape: str = "bump"
    amplitude: float = 1.0
    mode: int = 1
    frame: str = "target"
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ParameterError(f"unknown initial shape {self.shape!r}; expected one of {_SHAPES}")
        if self.frame not in ("plant", "target"):
            raise ParameterError(f"frame must be 'plant' or 'target', got {self.frame!r}")
        if self.shape == "table" and self.table is None:
            raise ParameterError("shape 'table' needs (pos, vel) arrays")

    def arrays(self, N, L):
        x = np.linspace(0.0, L, N + 1)
        A = float(self.amplitude)
        if self.shape == "bump":
            pos = A * np.sin(np.pi * x / L) ** 4
        elif self.shape == "sine":
            pos = A * np.sin(self.mode * np.pi * x / L)
        elif self.shape == "zero":
            pos = np.zeros_like(x)
        else:
            pos, vel = (np.asarray(a, dtype=float) for a in self.table)
            if pos.size != N + 1 or vel.size != N + 1:
                raise ContractError(f"initial table has {pos.size} nodes, grid needs {N + 1}")
            return pos.copy(), vel.copy()
        pos[0] = 0.0
        return pos, np.zeros_like(x)


@dataclass(frozen=True)
class SimConfig:
    case: str
    profile: CoefficientProfile
    d: float = 1.0
    P: float = 1.0
    disturbance: Disturbance = field(default_factory=Disturbance)
    N: int = 200
    T: float = 5.0
    cfl: float = 0.5
    eps: float = 1e-3
    init: InitialCondition = field(default_factory=InitialCondition)
    stride: int = 10
    guard: bool = True
    open_loop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "case", check_case(self.case))
        check_positive(self.d, "d")
        check_positive(self.P, "P", strict=False)
        check_int(self.N, "N", minimum=8)
        check_positive(self.T, "T")
        check_positive(self.eps, "eps")
        check_int(self.stride, "stride", minimum=1)
        if not 0.0 < self.cfl <= 1.0:
            raise ParameterError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.profile.alpha is not None:
            raise ContractError("profile still has a first-order term; apply remove_first_order first")

    @property
    def L(self):
        return self.profile.L

    @property
    def dx(self):
        return self.L / self.N

    @property
    def dt(self):
        return self.cfl * self.dx

    @property
    def n_steps(self):
        return int(math.ceil(self.T / self.dt - 1e-9))

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Recorded levels of a run; every array has one entry per recorded time."""

    times: np.ndarray
    states: tuple
    u1: np.ndarray
    u2: np.ndarray
    sign_arg: np.ndarray
    selection: np.ndarray
    p: np.ndarray
    E: np.ndarray
    V: np.ndarray
    d: float
    L: float
    dt: float
    frame: str
    init_residual: float = math.nan  # target-frame boundary law at t = 0

    def __post_init__(self):
        n = len(self.times)
        for name in ("states", "u1", "u2", "sign_arg", "selection", "p", "E", "V"):
            if len(getattr(self, name)) != n:
                raise ContractError(f"{name} has {len(getattr(self, name))} entries, expected {n}")
        for name in ("times", "u1", "u2", "sign_arg", "selection", "p", "E", "V"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def columns(self):
        return {"t": self.times, "E": self.E, "V": self.V, "u1": self.u1, "u2": self.u2,
                "sign_arg": self.sign_arg, "selection": self.selection, "p": self.p}


# scalar boundary equation ------------------------------------------------------

def _solve_sat_affine(c0, c1, Q, a0, a1, eps):
    """Root of ``c0 + c1 z + Q sat((a0 + a1 z) / eps)``; needs ``c1 a1 > 0`` if ``Q > 0``."""
    if Q == 0.0:
        return -c0 / c1
    if c1 * a1 <= 0.0 or c1 == 0.0:
        raise NumericalError(f"boundary law is not monotone (c1={c1:.3e}, a1={a1:.3e})")
    tol = 1e-12
    den = c1 + Q * a1 / eps
    z = -(c0 + Q * a0 / eps) / den
    if abs((a0 + a1 * z) / eps) <= 1.0 + tol:
        return z
    for s in (1.0, -1.0):
        z = -(c0 + Q * s) / c1
        if s * (a0 + a1 * z) / eps >= 1.0 - tol:
            return z
    raise NumericalError("no consistent branch for the saturated boundary law")


# run machinery -------------------------------------------------------------------

def _coefficients_on(profile, N):
    prof = profile if profile.N == N else profile.resample(N)
    return prof, np.asarray(prof.lam, dtype=float), np.asarray(prof.beta, dtype=float)


def plant_kernels(cfg, refine=8):
    """Kernels for the simulation grid of ``cfg``."""
    from .kernel import TriangularGrid, solve_kernels

    prof, _, _ = _coefficients_on(cfg.profile, cfg.N)
    sc = eval_scalars(prof, cfg.d)
    return solve_kernels(sc, TriangularGrid(cfg.L, cfg.N), refine=refine)


def _d2(u, dx):
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    out[0] = 0.0
    out[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / dx**2
    return out


class _Stepper:
    """Leapfrog interior update shared by plant and target runs."""

    def __init__(self, lam, beta, dt, dx):
        self.dt, self.dx = dt, dx
        self.lam, self.beta = lam, beta
        self.cp = 1.0 - lam * dt
        self.cm = 1.0 + lam * dt
        if np.any(self.cp <= 0.0):
            raise ParameterError("time step too large for the damping coefficient (1 - lambda dt <= 0)")

    def ghost(self, u0, v0):
        acc = _d2(u0, self.dx) + 2.0 * self.lam * v0 + self.beta * u0
        um = u0 - self.dt * v0 + 0.5 * self.dt**2 * acc
        um[0] = 0.0
        return um

    def interior(self, u, um):
        dt2, dx2 = self.dt**2, self.dx**2
        un = np.zeros_like(u)
        lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx2
        un[1:-1] = (2.0 * u[1:-1] - self.cm[1:-1] * um[1:-1] + dt2 * (lap + self.beta[1:-1] * u[1:-1])) / self.cp[1:-1]
        return un

    def neumann_node(self, u, um):
        """``(z0, zg)`` with ``u_N^{n+1} = z0 + zg g`` for the ghost flux ``g``."""
        dt2, dx = self.dt**2, self.dx
        N = u.size - 1
        base = 2.0 * u[N] - self.cm[N] * um[N] + dt2 * ((2.0 * u[N - 1] - 2.0 * u[N]) / dx**2 + self.beta[N] * u[N])
        return base / self.cp[N], 2.0 * dt2 / (dx * self.cp[N])


def _initial_state(cfg, frame, op=None):
    pos, vel = cfg.init.arrays(cfg.N, cfg.L)
    if cfg.init.frame == frame or cfg.init.shape == "zero":
        return pos, vel
    if op is None:
        raise ContractError("changing the frame of the initial condition needs the kernels")
    if frame == "plant":
        u, v = op.solve(pos, vel)
        return u[0], v[0]
    w, wt = op.apply(pos, vel)
    w[0] = 0.0
    return w, wt


class _Recorder:
    def __init__(self, cfg, frame, energy_fn):
        self.cfg = cfg
        self.frame = frame
        self.energy_fn = energy_fn
        self.rows = []
        self.states = []
        self.E_prev = None

    def add(self, n, u, v, cv, p):
        cfg = self.cfg
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NumericalError(f"non-finite state at step {n}")
        st = WaveState(n * cfg.dt, u.copy(), v.copy(), self.frame, cfg.L)
        E, V = self.energy_fn(st)
        if cfg.guard and self.E_prev is not None:
            if cfg.disturbance.is_zero and self.E_prev > 0.0 and E > 10.0 * self.E_prev:
                raise InstabilityError(f"energy grew from {self.E_prev:.3e} to {E:.3e} at t={st.t:.4g}")
        self.E_prev = E
        self.states.append(st)
        self.rows.append((st.t, cv[0], cv[1], cv[2], cv[3], p, E, V))

    def record(self, init_residual=math.nan):
        cols = list(zip(*self.rows))
        t, u1, u2, arg, sel, p, E, V = (np.array(c, dtype=float) for c in cols)
        return TrajectoryRecord(t, tuple(self.states), u1, u2, arg, sel, p, E, V,
                                float(self.cfg.d), float(self.cfg.L), float(self.cfg.dt), self.frame,
                                float(init_residual))


def initial_boundary_residual(cfg, w, wt, hL, tol=INIT_RESIDUAL_TOL):
    """Distance of the initial target state from the boundary inclusion.

    The multivalued law is checked rather than its saturation: an argument
    within ``eps + dx sup|w_x|`` of zero (the slope resolution of the grid)
    counts as zero and admits any selection in ``[-1, 1]``. Initial data are
    not projected; a residual above ``tol * max(1, hL P)`` only triggers a
    ``RuntimeWarning``.
    """
    dx, d, P, eps = cfg.dx, cfg.d, cfg.P, cfg.eps
    p0 = cfg.disturbance(0.0)
    wx = np.gradient(w, dx, edge_order=2)
    band = eps + dx * float(np.max(np.abs(wx)))
    if cfg.case == "DD":
        rest, arg = w[-1] + wt[-1] / d - hL * p0, wx[-1]
    else:
        rest, arg = wx[-1] - hL * p0, wt[-1] + d * w[-1]
    # rest + hL P sel = 0 with sel in sign(arg)
    lo, hi = (-1.0, 1.0) if abs(arg) <= band else (math.copysign(1.0, arg),) * 2
    need = -float(rest)
    res = max(hL * P * lo - need, need - hL * P * hi, 0.0)
    if res > tol * max(1.0, hL * P):
        warnings.warn(f"initial state violates the boundary law by {res:.3g}", RuntimeWarning, stacklevel=3)
    return res


def _run(cfg, step_boundary, stepper, u0, v0, recorder, control_at, init_residual=math.nan):
    """Generic loop. ``step_boundary(n, un, u, um)`` fills ``un[-1]`` and
    returns the control tuple belonging to its time level."""
    dt = cfg.dt
    u, um = u0.copy(), stepper.ghost(u0, v0)
    n_steps = cfg.n_steps
    pending = {0: control_at(u0, v0, 0.0)}
    for n in range(n_steps + 1):
        un = stepper.interior(u, um)
        level, cv = step_boundary(n, un, u, um)
        pending[level] = cv
        if n % cfg.stride == 0 or n == n_steps:
            v = v0 if n == 0 else (un - um) / (2.0 * dt)
            cvn = pending.get(n)
            if cvn is None:
                cvn = control_at(u, v, n * dt)
            recorder.add(n, u, v, cvn, cfg.disturbance(n * dt))
        pending.pop(n - 1, None)
        um, u = u, un
    return recorder.record(init_residual)


def run_closed_loop(cfg, kernels=None):
    """Simulate the plant under ``U = U1 + U2`` with the disturbance at ``x = L``.

    With ``cfg.open_loop`` the actuation is switched off (``U = 0``); V is
    still reported through the transform.
    """
    kp = plant_kernels(cfg) if kernels is None else kernels
    prof, lam, beta = _coefficients_on(cfg.profile, cfg.N)
    op = TransformOperator(kp, prof, cfg.N)
    dt, dx, N = cfg.dt, cfg.dx, cfg.N
    d, P, eps, hL = cfg.d, cfg.P, cfg.eps, op.hL
    gamma = prof.gamma
    stepper = _Stepper(lam, beta, dt, dx)
    u0, v0 = _initial_state(cfg, "plant", op)
    eN = np.zeros(N + 1)
    eN[-1] = 1.0

    def energies(st):
        w, wt = op.apply(st.pos, st.vel)
        w[0] = 0.0
        return energy_E(st), energy_V(WaveState(st.t, w, wt, "target", st.L), d)

    if cfg.open_loop:
        def control_at(u, v, t):
            return (0.0, 0.0, 0.0, 0.0)

        if cfg.case == "DD":
            def step_boundary(n, un, u, um):
                un[-1] = cfg.disturbance((n + 1) * dt)
                return n + 1, (0.0, 0.0, 0.0, 0.0)
        else:
            def step_boundary(n, un, u, um):
                z0, zg = stepper.neumann_node(u, um)
                un[-1] = z0 + zg * (gamma * u[-1] + cfg.disturbance(n * dt))
                return n, (0.0, 0.0, 0.0, 0.0)
    elif cfg.case == "DD":
        def pieces(u, v):
            U1 = op.u1_dd(u, v)
            U3 = op.u3(u, v)
            U4 = op.u4_dd(u, v)
            return U1, U3, U4

        def control_at(u, v, t):
            U1, U3, U4 = pieces(u, v)
            sel = float(sat(U4 / eps))
            return (U1, -U3 / (d * hL) - P * sel, U4, sel)

        # derivatives of the three functionals along the boundary unknown
        dU1, dU3, dU4 = pieces(eN, 1.5 / dt * eN)

        def step_boundary(n, un, u, um):
            p = cfg.disturbance((n + 1) * dt)
            vb = (3.0 * un - 4.0 * u + um) / (2.0 * dt)
            vb[-1] = (-4.0 * u[-1] + um[-1]) / (2.0 * dt)
            U1, U3, U4 = pieces(un, vb)
            c0 = -p - U1 + U3 / (d * hL)
            c1 = 1.0 - dU1 + dU3 / (d * hL)
            z = _solve_sat_affine(c0, c1, P, U4, dU4, eps)
            un[-1] = z
            U1z, U3z, U4z = U1 + dU1 * z, U3 + dU3 * z, U4 + dU4 * z
            sel = float(sat(U4z / eps))
            return n + 1, (U1z, -U3z / (d * hL) - P * sel, U4z, sel)
    else:
        def pieces(u, ubar, v, g):
            U1 = op.u1_dn(u, v, gamma)
            U3 = op.u3(u, v, ux=g)
            U4 = op.u4_dn(ubar, v)
            return U1, U3 + d * U4

        def control_at(u, v, t):
            U1, arg = pieces(u, u, v, op.D[-1] @ u)
            sel = float(sat(arg / eps))
            return (U1, -P * sel, arg, sel)

        def step_boundary(n, un, u, um):
            p = cfg.disturbance(n * dt)
            z0, zg = stepper.neumann_node(u, um)
            un[-1] = z0
            v = (un - um) / (2.0 * dt)
            # w(L) in the sign argument is averaged over levels n +- 1; taken
            # at level n it leaves the leapfrog parasitic mode undamped
            U1, arg = pieces(u, 0.5 * (un + um), v, 0.0)
            dv = zg / (2.0 * dt) * eN
            dU1, darg = pieces(np.zeros(N + 1), 0.5 * zg * eN, dv, 1.0)
            # g = gamma u_N + p + U1(g) - P sat(arg(g) / eps)
            c0 = -gamma * u[-1] - p - U1
            c1 = 1.0 - dU1
            g = _solve_sat_affine(c0, c1, P, arg, darg, eps)
            un[-1] = z0 + zg * g
            argz = arg + darg * g
            sel = float(sat(argz / eps))
            return n, (U1 + dU1 * g, -P * sel, argz, sel)

    rec = _Recorder(cfg, "plant", energies)
    res0 = math.nan
    if not cfg.open_loop:
        w0, wt0 = op.apply(u0, v0)
        res0 = initial_boundary_residual(cfg, w0, wt0, hL)
    return _run(cfg, step_boundary, stepper, u0, v0, rec, control_at, res0)


def run_target_direct(cfg, kernels=None):
    """Simulate ``w_tt = w_xx - 2d w_t - d^2 w`` with the regularized boundary law."""
    prof, _, _ = _coefficients_on(cfg.profile, cfg.N)
    dt, dx, N = cfg.dt, cfg.dx, cfg.N
    d, P, eps = cfg.d, cfg.P, cfg.eps
    op = None
    if cfg.init.frame != "target" and cfg.init.shape != "zero":
        kp = plant_kernels(cfg) if kernels is None else kernels
        op = TransformOperator(kp, prof, N)
        hL = op.hL
    elif kernels is not None:
        hL = TransformOperator(kernels, prof, N).hL
    else:
        hL = float(eval_scalars(prof, d).hL)
    lam = np.full(N + 1, -d)
    beta = np.full(N + 1, -d * d)
    stepper = _Stepper(lam, beta, dt, dx)
    w0, wt0 = _initial_state(cfg, "target", op)

    def energies(st):
        return energy_E(st), energy_V(st, d)

    def wx_end(w):
        return (1.5 * w[-1] - 2.0 * w[-2] + 0.5 * w[-3]) / dx

    if cfg.case == "DD":
        def control_at(w, wt, t):
            arg = wx_end(w)
            sel = float(sat(arg / eps))
            return (0.0, w[-1] / hL - cfg.disturbance(t), arg, sel)

        def step_boundary(n, wn, w, wm):
            p = cfg.disturbance((n + 1) * dt)
            # w_N + w_t(L) / d + hL P sat(w_x(L) / eps) = hL p
            c0 = (-4.0 * w[-1] + wm[-1]) / (2.0 * dt * d) - hL * p
            c1 = 1.0 + 1.5 / (dt * d)
            a0 = (-2.0 * wn[-2] + 0.5 * wn[-3]) / dx
            a1 = 1.5 / dx
            z = _solve_sat_affine(c0, c1, hL * P, a0, a1, eps)
            wn[-1] = z
            arg = a0 + a1 * z
            sel = float(sat(arg / eps))
            return n + 1, (0.0, z / hL - p, arg, sel)
    else:
        def control_at(w, wt, t):
            arg = wt[-1] + d * w[-1]
            sel = float(sat(arg / eps))
            return (0.0, -P * sel, arg, sel)

        def step_boundary(n, wn, w, wm):
            p = cfg.disturbance(n * dt)
            z0, zg = stepper.neumann_node(w, wm)
            # g = hL p - hL P sat((w_t + d w)(L) / eps); central w_t and w
            # averaged over levels n +- 1 (damps the leapfrog parasitic mode)
            a0 = (z0 - wm[-1]) / (2.0 * dt) + 0.5 * d * (z0 + wm[-1])
            a1 = zg * (0.5 / dt + 0.5 * d)
            g = _solve_sat_affine(-hL * p, 1.0, hL * P, a0, a1, eps)
            wn[-1] = z0 + zg * g
            arg = a0 + a1 * g
            sel = float(sat(arg / eps))
            return n, (0.0, -P * sel, arg, sel)

    rec = _Recorder(cfg, "target", energies)
    res0 = initial_boundary_residual(cfg, w0, wt0, hL)
    return _run(cfg, step_boundary, stepper, w0, wt0, rec, control_at, res0)
