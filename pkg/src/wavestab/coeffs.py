"""Plant coefficient profiles and the scalar ingredients of the backstepping design.

The plant is ``u_tt = u_xx + 2 lambda(x) u_t + beta(x) u`` on ``(0, L)`` with
``u(t, 0) = 0``. For a decay rate ``d`` the kernel equations need

* ``a = lambda + d`` and ``Phi(x) = int_0^x a``,
* ``h = cosh(Phi)`` and ``h' = a sinh(Phi)``,
* the diagonal datum ``m`` of ``k``, and
* five coupling coefficients ``rho_1 .. rho_5`` that depend on ``y`` only.
"""

from dataclasses import dataclass, field
import warnings
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from ._numerics import cumulative_trapezoid, first_derivative, second_derivative
from ._validation import check_int, check_positive, check_vector
from .exceptions import ContractError

__all__ = [
    "CoefficientProfile",
    "BacksteppingScalars",
    "remove_first_order",
    "eval_scalars",
    "alpha_resolution",
]

_DIFF_STEP = 1e-6


def _derivative_of(f):
    return lambda x: (f(x + _DIFF_STEP) - f(x - _DIFF_STEP)) / (2 * _DIFF_STEP)


def _as_function(value):
    if callable(value):
        return lambda x: np.broadcast_to(np.asarray(value(x), dtype=float), np.shape(x)).copy()
    c = float(value)
    return lambda x: np.full(np.shape(x), c)


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    """Coefficients sampled at ``x_i = i L / N``.

    Profiles built with :meth:`from_functions` remember the generating
    callables and resample exactly; array-built profiles resample through a
    not-a-knot cubic spline.
    """

    L: float
    N: int
    lam: np.ndarray
    beta: np.ndarray
    alpha: Optional[np.ndarray] = None
    gamma: float = 0.0
    funcs: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        L = check_positive(self.L, "L")
        N = check_int(self.N, "N", minimum=8)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "lam", check_vector(self.lam, "lambda", N + 1))
        object.__setattr__(self, "beta", check_vector(self.beta, "beta", N + 1))
        if self.alpha is not None:
            object.__setattr__(self, "alpha", check_vector(self.alpha, "alpha", N + 1))
        object.__setattr__(self, "gamma", float(self.gamma))
        for arr in (self.lam, self.beta, self.alpha):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_functions(cls, L, N, lam=0.0, beta=0.0, alpha=None, gamma=0.0):
        """Sample callables (or constants) on the uniform grid."""
        L = check_positive(L, "L")
        N = check_int(N, "N", minimum=8)
        x = np.linspace(0.0, L, N + 1)
        fl, fb = _as_function(lam), _as_function(beta)
        fa = None if alpha is None else _as_function(alpha)
        return cls(L, N, fl(x), fb(x), None if fa is None else fa(x), gamma, funcs=(fl, fb, fa))

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.N + 1)

    @property
    def dx(self):
        return self.L / self.N

    def resample(self, N):
        """The same profile on a grid with ``N`` intervals."""
        N = check_int(N, "N", minimum=8)
        if N == self.N:
            return self
        if self.funcs is not None:
            fl, fb, fa = self.funcs
            return CoefficientProfile.from_functions(self.L, N, fl, fb, fa, self.gamma)
        x_new = np.linspace(0.0, self.L, N + 1)

        def interp(arr):
            return None if arr is None else CubicSpline(self.x, arr)(x_new)

        return CoefficientProfile(self.L, N, interp(self.lam), interp(self.beta), interp(self.alpha), self.gamma)

    def to_table(self):
        return {"x": self.x, "lambda": np.array(self.lam), "beta": np.array(self.beta)}


def alpha_resolution(p):
    """Relative disagreement of ``alpha'`` estimated on ``N`` and ``2N`` nodes.

    Measured at the common nodes in the max norm, relative to ``max|alpha'|``
    (or 1 if that is smaller). Values above 0.1 mean the grid does not
    resolve ``alpha`` well enough for the normalized ``beta`` to be trusted.
    """
    if p.alpha is None:
        raise ContractError("alpha_resolution needs a profile with alpha present")
    fine = p.resample(2 * p.N)
    d1 = first_derivative(np.asarray(p.alpha), p.dx)
    d2 = first_derivative(np.asarray(fine.alpha), fine.dx)[::2]
    return float(np.max(np.abs(d1 - d2)) / max(1.0, float(np.max(np.abs(d2)))))


def remove_first_order(p):
    """Eliminate ``alpha(x) u_x`` with the multiplier ``exp(1/2 int_0^x alpha)``.

    Returns the normalized profile and the multiplier at the nodes. ``beta``
    becomes ``-alpha'/2 - alpha^2/4 + beta`` and ``gamma`` becomes
    ``alpha(L)/2``.
    """
    if p.alpha is None:
        raise ContractError("remove_first_order needs a profile with alpha present")
    if alpha_resolution(p) > 0.1:
        warnings.warn("alpha' changes by more than 10% between N and 2N; refine the grid",
                      RuntimeWarning, stacklevel=2)
    h = p.dx
    alpha = np.asarray(p.alpha)
    beta_new = -0.5 * first_derivative(alpha, h) - 0.25 * alpha**2 + p.beta
    scale = np.exp(0.5 * cumulative_trapezoid(alpha, h))
    gamma = 0.5 * alpha[-1]
    funcs = None
    if p.funcs is not None:
        fl, fb, fa = p.funcs
        da = _derivative_of(fa)
        funcs = (fl, lambda x: -0.5 * da(x) - 0.25 * fa(x) ** 2 + fb(x), None)
    out = CoefficientProfile(p.L, p.N, p.lam, beta_new, None, gamma, funcs=funcs)
    return out, scale


@dataclass(frozen=True, eq=False)
class BacksteppingScalars:
    """Node values of ``a, Phi, h, h', m`` and ``rho_1..rho_5`` for one ``d``."""

    d: float
    a: np.ndarray
    Phi: np.ndarray
    h: np.ndarray
    hprime: np.ndarray
    m: np.ndarray
    rho: np.ndarray
    profile: CoefficientProfile = field(repr=False)

    @property
    def N(self):
        return self.profile.N

    @property
    def L(self):
        return self.profile.L

    @property
    def x(self):
        return self.profile.x

    @property
    def s_diag(self):
        """Diagonal datum of ``s``: ``-sinh(Phi)``."""
        return -np.sinh(self.Phi)

    @property
    def hL(self):
        return float(self.h[-1])

    @property
    def hpL(self):
        return float(self.hprime[-1])

    def to_table(self):
        cols = {"x": self.x, "lambda": np.array(self.profile.lam), "beta": np.array(self.profile.beta),
                "a": self.a, "h": self.h, "m": self.m}
        for i in range(5):
            cols[f"rho{i + 1}"] = self.rho[i]
        return cols


def eval_scalars(p, d):
    """Evaluate the scalar backstepping ingredients of ``p`` for decay rate ``d``."""
    d = check_positive(d, "d")
    if p.alpha is not None:
        raise ContractError("eval_scalars needs alpha removed first (see remove_first_order)")
    hx = p.dx
    lam = np.asarray(p.lam)
    beta = np.asarray(p.beta)
    a = lam + d
    Phi = cumulative_trapezoid(a, hx)
    sh, ch = np.sinh(Phi), np.cosh(Phi)
    # h'/(2a) written as sinh(Phi)/2 so that a = 0 is harmless
    m = 0.5 * sh * (2.0 * lam + a + a[0]) + 0.5 * ch * cumulative_trapezoid(-(lam**2) - beta, hx)
    lp = first_derivative(lam, hx)
    lpp = second_derivative(lam, hx)
    rho = np.vstack([
        2.0 * lam + 2.0 * d,
        d * d + beta,
        2.0 * lam * beta + 2.0 * lpp + 2.0 * d * beta,
        4.0 * lp,
        4.0 * lam**2 + 4.0 * d * lam + d * d + beta,
    ])
    for arr in (a, Phi, ch, m, rho):
        arr.setflags(write=False)
    return BacksteppingScalars(d, a, Phi, ch, a * sh, m, rho, p)
