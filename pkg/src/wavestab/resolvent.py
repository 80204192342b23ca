"""Numerical counterpart of the well-posedness construction.

The sign graph ``alpha = d|.|`` is handled through its resolvent ``J_s``, its
Yosida approximation ``alpha_s`` and the Moreau envelope ``phi_s`` of
``|.|``. The regularized resolvent problems are the two-point problems

    -q'' + (1 + d)^2 q = n + (1 + 2d) m,   q(0) = 0,

closed at ``x = L`` by

    DD:  (1 + d) q(L) - m(L) = -d hL P alpha_s(q'(L))
    DN:  q'(L) = -hL P alpha_s((1 + d) q(L) - m(L)).

They are solved by shooting on ``q'(0)``. The ODE is linear, so two marches
give every candidate; the remaining scalar equation is monotone in the
argument of ``alpha_s`` and is bracketed and bisected in that variable.
"""

from dataclasses import dataclass
import math
from typing import Optional

import numpy as np

from ._numerics import second_derivative, trapezoid_weights
from ._validation import check_case, check_positive
from .exceptions import ContractError, ConvergenceError, NoBracketError, ToleranceError

__all__ = [
    "sign_set",
    "resolvent_point",
    "yosida",
    "moreau",
    "ResolventProblem",
    "RegularizedSolution",
    "ResolventLimit",
    "solve_regularized",
    "resolvent_limit",
    "sigma_schedule",
    "h2_norm",
    "monotonicity_gap",
    "operator_A",
    "functional_J",
]


# the sign graph ------------------------------------------------------------------

def sign_set(x):
    """The value of the multivalued sign at ``x`` as a closed interval ``(lo, hi)``."""
    if x > 0:
        return (1.0, 1.0)
    if x < 0:
        return (-1.0, -1.0)
    return (-1.0, 1.0)


def resolvent_point(x, sigma):
    """``J_s = (I + s sign)^-1``: soft thresholding at ``s``."""
    sigma = check_positive(sigma, "sigma")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - sigma, 0.0)
    return float(out) if out.ndim == 0 else out


def yosida(x, sigma):
    """``alpha_s = (I - J_s) / s``, i.e. ``clip(x / s, -1, 1)``."""
    sigma = check_positive(sigma, "sigma")
    x = np.asarray(x, dtype=float)
    out = np.clip(x / sigma, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def moreau(x, sigma):
    """``phi_s = s/2 alpha_s^2 + |J_s|`` (the Huber function)."""
    a = np.asarray(yosida(x, sigma))
    out = 0.5 * sigma * a * a + np.abs(resolvent_point(x, sigma))
    return float(out) if out.ndim == 0 else out


# problems -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ResolventProblem:
    """Data of ``(I + A)(q, l) = (m, n)`` on a uniform grid of ``[0, L]``."""

    case: str
    m: np.ndarray
    n: np.ndarray
    d: float = 1.0
    P: float = 1.0
    hL: float = 1.0
    sigma: float = 1e-1
    L: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "case", check_case(self.case))
        m = np.asarray(self.m, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if m.ndim != 1 or m.shape != n.shape or m.size < 9:
            raise ContractError("m and n must be 1-D arrays of equal length with at least 9 nodes")
        if abs(m[0]) > 1e-12 * max(1.0, float(np.max(np.abs(m)))):
            raise ContractError(f"m must vanish at x = 0, got m[0] = {m[0]!r}")
        for name, val in (("d", self.d), ("hL", self.hL), ("sigma", self.sigma), ("L", self.L)):
            check_positive(val, name)
        check_positive(self.P, "P", strict=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @property
    def N(self):
        return self.m.size - 1

    @property
    def dx(self):
        return self.L / self.N

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.N + 1)

    @property
    def c2(self):
        return (1.0 + self.d) ** 2

    @property
    def rhs(self):
        return self.n + (1.0 + 2.0 * self.d) * self.m

    def data_scale(self):
        w = trapezoid_weights(self.N, self.dx)
        return max(1.0, math.sqrt(float(w @ self.rhs**2)), abs(float(self.m[-1])))

    def with_sigma(self, sigma):
        return ResolventProblem(self.case, self.m, self.n, self.d, self.P, self.hL, sigma, self.L)


@dataclass(frozen=True, eq=False)
class RegularizedSolution:
    q: np.ndarray
    qL: float
    qpL: float
    arg: float  # argument of alpha_s in the boundary law
    alpha: float  # alpha_s(arg)
    bc_residual: float
    sigma: float


def _march(c2, f, h, s):
    """Stormer march of ``q'' = c2 q - f`` from ``q(0) = 0``, ``q'(0) = s``."""
    n = f.size
    q = np.zeros(n)
    q[1] = s * h - 0.5 * h * h * f[0]
    h2 = h * h
    for i in range(1, n - 1):
        q[i + 1] = 2.0 * q[i] - q[i - 1] + h2 * (c2 * q[i] - f[i])
    return q


def end_slope(q, c2, f, h):
    """``q'(L)`` from the last cell corrected by the equation's ``q''(L)``."""
    return (q[-1] - q[-2]) / h + 0.5 * h * (c2 * q[-1] - f[-1])


def _bisect(G, scale, max_expand=80, max_iter=400):
    """Root of an increasing scalar function by bracketing and bisection.

    The last step interpolates linearly between the final bracket ends, which
    is exact on the affine pieces of the boundary law.
    """
    lo, hi = -scale, scale
    glo, ghi = G(lo), G(hi)
    scan = [(lo, glo), (hi, ghi)]
    k = 0
    while glo > 0.0 or ghi < 0.0:
        if k >= max_expand or not (math.isfinite(glo) and math.isfinite(ghi)):
            raise NoBracketError("could not bracket the boundary equation", scan=scan)
        if glo > 0.0:
            lo, hi, ghi = 2.0 * lo, lo, glo
            glo = G(lo)
            scan.append((lo, glo))
        else:
            lo, hi, glo = hi, 2.0 * hi, ghi
            ghi = G(hi)
            scan.append((hi, ghi))
        k += 1
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = G(mid)
        if gm == 0.0:
            return mid
        if gm < 0.0:
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
    z = lo - glo * (hi - lo) / (ghi - glo)
    return min(max(z, lo), hi)


def solve_regularized(prob, bc_tol=None):
    """Solve the regularized problem; returns a :class:`RegularizedSolution`."""
    h, c2, f = prob.dx, prob.c2, prob.rhs
    qa = _march(c2, f, h, 0.0)
    qb = _march(c2, np.zeros_like(f), h, 1.0)
    A, B = qa[-1], qb[-1]
    C, D = end_slope(qa, c2, f, h), end_slope(qb, c2, np.zeros_like(f), h)
    if B <= 0.0 or D <= 0.0:
        raise ContractError("shooting fundamental solution is not increasing; grid too coarse")
    d, s, k = prob.d, prob.sigma, prob.hL * prob.P
    mL = float(prob.m[-1])
    if prob.case == "DD":
        # unknown z = q'(L); q(L) is affine in z
        def qL_of(z):
            return A + (z - C) / D * B

        def G(z):
            return (1.0 + d) * qL_of(z) - mL + d * k * yosida(z, s)

        z = _bisect(G, max(1.0, abs(C), abs((mL / (1.0 + d) - A) * D / B)))
        t = (z - C) / D
        qL, qpL, arg = qL_of(z), z, z
    else:
        # unknown y = (1 + d) q(L) - m(L); q'(L) is affine in y
        def t_of(y):
            return ((y + mL) / (1.0 + d) - A) / B

        def G(y):
            return C + t_of(y) * D + k * yosida(y, s)

        y = _bisect(G, max(1.0, abs(mL) + (1.0 + d) * abs(A)))
        t = t_of(y)
        qL, qpL, arg = (y + mL) / (1.0 + d), C + t * D, y
    q = qa + t * qb
    q[0] = 0.0
    alpha = yosida(arg, s)
    if prob.case == "DD":
        res = abs((1.0 + d) * qL - mL + d * k * alpha)
    else:
        res = abs(qpL + k * alpha)
    tol = 1e-10 * prob.data_scale() if bc_tol is None else bc_tol
    if not res <= tol:
        raise ToleranceError(f"boundary residual {res:.3e} above tolerance {tol:.1e}")
    return RegularizedSolution(q, float(qL), float(qpL), float(arg), float(alpha), float(res), float(s))


def h2_norm(q, h):
    """``sqrt(||q||^2 + ||q'||^2 + ||q''||^2)`` with trapezoid quadrature."""
    w = trapezoid_weights(q.size - 1, h)
    qp = np.gradient(q, h, edge_order=2)
    qpp = second_derivative(q, h)
    return float(math.sqrt(w @ (q * q + qp * qp + qpp * qpp)))


# sigma -> 0 -----------------------------------------------------------------------

def sigma_schedule(start=1e-1, stop=1e-6, factor=10.0):
    """Geometric schedule ``start, start/factor, ..., stop``."""
    k = int(round(math.log(start / stop) / math.log(factor)))
    return np.array([start / factor**j for j in range(k + 1)])


@dataclass(frozen=True, eq=False)
class ResolventLimit:
    q: np.ndarray
    b: float
    arg: float
    inclusion_ok: bool
    cauchy_ratio: float
    uniform_ok: bool
    rows: tuple  # (sigma, qL, qpL, b, bc_residual, norm_H2) per sigma

    def columns(self):
        names = ("sigma", "qL", "qpL", "b", "bc_residual", "norm_H2")
        cols = list(zip(*self.rows))
        return {k: np.array(v) for k, v in zip(names, cols)}


def resolvent_limit(prob, sigmas=None, cauchy_tol=0.1, arg_tol=None):
    """Run the sigma sweep and take the last solve as the limit.

    The Cauchy ratio is the change between the last two solves relative to
    the size of the last-but-one (``sup|q|`` and ``b``; the latter is already
    of unit size). ``inclusion_ok`` checks ``b`` against the sign graph of the
    limiting argument.
    """
    sigmas = sigma_schedule() if sigmas is None else np.asarray(sigmas, dtype=float)
    if sigmas.ndim != 1 or sigmas.size < 3 or np.any(np.diff(sigmas) >= 0) or np.any(sigmas <= 0):
        raise ContractError("sigmas must be a strictly decreasing positive sequence of length >= 3")
    sols = [solve_regularized(prob.with_sigma(float(s))) for s in sigmas]
    rows = tuple((s.sigma, s.qL, s.qpL, s.alpha, s.bc_residual, h2_norm(s.q, prob.dx)) for s in sols)
    last, prev = sols[-1], sols[-2]
    qscale = float(np.max(np.abs(prev.q)))
    dq = float(np.max(np.abs(last.q - prev.q)))
    ratio_q = dq / qscale if qscale > 0 else (0.0 if dq == 0 else math.inf)
    ratio = max(ratio_q, abs(last.alpha - prev.alpha))
    if not ratio < cauchy_tol:
        raise ConvergenceError(f"sigma sweep is not Cauchy (ratio {ratio:.3e} >= {cauchy_tol})")
    norms = [r[5] for r in rows]
    uniform_ok = norms[-1] <= 1.01 * max(norms[:-1]) + 1e-300
    tol_arg = 1e-6 * prob.data_scale() if arg_tol is None else arg_tol
    b, arg = last.alpha, last.arg
    if abs(arg) > tol_arg:
        ok = abs(b - math.copysign(1.0, arg)) <= 1e-3
    else:
        ok = abs(b) <= 1.0 + 1e-9
    return ResolventLimit(last.q, float(b), float(arg), bool(ok), float(ratio), bool(uniform_ok), rows)


# monotonicity ---------------------------------------------------------------------

def _slope_L(q, h):
    return (1.5 * q[-1] - 2.0 * q[-2] + 0.5 * q[-3]) / h


def operator_A(q, l, d, h):
    """``A(q, l) = (-l, -q'' + 2 d l + d^2 q)`` on nodes."""
    q = np.asarray(q, dtype=float)
    l = np.asarray(l, dtype=float)
    return -l, -second_derivative(q, h) + 2.0 * d * l + d * d * q


def _check_admissible(q, l, case, d, P, hL, h, tol):
    qp = _slope_L(q, h)
    if case == "DD":
        val = -(d * q[-1] + l[-1]) / (d * hL * P) if P > 0 else 0.0
        arg = qp
        if P == 0 and abs(d * q[-1] + l[-1]) > tol:
            raise ContractError("pair violates the boundary inclusion")
    else:
        val = -qp / (hL * P) if P > 0 else 0.0
        arg = l[-1] + d * q[-1]
        if P == 0 and abs(qp) > tol:
            raise ContractError("pair violates the boundary inclusion")
    lo, hi = sign_set(arg if abs(arg) > tol else 0.0)
    if not lo - tol <= val <= hi + tol:
        raise ContractError(f"pair violates the boundary inclusion (selection {val:.6g}, argument {arg:.3g})")


def monotonicity_gap(pair1, pair2, case, d, P, hL, L=1.0, tol=1e-8):
    """``<A p1 - A p2, p1 - p2>_X`` with the decay-weighted inner product.

    Both pairs must satisfy the boundary inclusion of ``case`` (checked with
    the 3-point one-sided slope at ``x = L``).
    """
    case = check_case(case)
    q1, l1 = (np.asarray(a, dtype=float) for a in pair1)
    q2, l2 = (np.asarray(a, dtype=float) for a in pair2)
    if not (q1.shape == l1.shape == q2.shape == l2.shape) or q1.ndim != 1:
        raise ContractError("pairs must be 1-D arrays on the same grid")
    N = q1.size - 1
    h = L / N
    for q, l in ((q1, l1), (q2, l2)):
        if abs(q[0]) > 1e-12 or abs(l[0]) > 1e-12:
            raise ContractError("pairs must vanish at x = 0")
        _check_admissible(q, l, case, d, P, hL, h, tol)
    a1, b1 = operator_A(q1, l1, d, h)
    a2, b2 = operator_A(q2, l2, d, h)
    dq, dl = q1 - q2, l1 - l2
    da, db = a1 - a2, b1 - b2
    w = trapezoid_weights(N, h)
    grad = lambda f: np.gradient(f, h, edge_order=2)  # noqa: E731
    return float(w @ (grad(da) * grad(dq)) + w @ ((db + d * da) * (dl + d * dq)))


# functionals ----------------------------------------------------------------------

def functional_J(q, prob):
    """The convex functional whose minimizer solves the regularized problem.

    Gradient terms use cell difference quotients and second differences at
    interior nodes, so the discrete minimizer is exactly the shooting
    solution. In the DD case the end-node ``q''`` of the trapezoid rule is
    closed with the equation, ``q'' = (1 + d)^2 q - f``. The slope at ``L`` is
    the corrected formula of :func:`solve_regularized`.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != prob.m.shape:
        raise ContractError("q lives on a different grid than the problem")
    if abs(q[0]) > 1e-12 * max(1.0, float(np.max(np.abs(q)))):
        raise ContractError("q must vanish at x = 0")
    h, c2, f, d = prob.dx, prob.c2, prob.rhs, prob.d
    cell = np.diff(q) / h
    k = prob.hL * prob.P
    mL = float(prob.m[-1])
    if prob.case == "DD":
        qpp = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / (h * h)
        body = 0.5 * h * float(np.sum(qpp * qpp + 2.0 * qpp * f[1:-1]) + c2 * np.sum(cell * cell))
        body += 0.25 * h * ((c2 * q[0]) ** 2 - f[0] ** 2 + (c2 * q[-1]) ** 2 - f[-1] ** 2)
        slope = end_slope(q, c2, f, h)
        return body + (1.0 + d) * (-mL * slope + d * k * moreau(slope, prob.sigma))
    w = trapezoid_weights(prob.N, h)
    body = 0.5 * (h * float(cell @ cell) + float(w @ (c2 * q * q - 2.0 * q * f)))
    return body + k / (1.0 + d) * moreau((1.0 + d) * q[-1] - mL, prob.sigma)
