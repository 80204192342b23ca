"""Gain kernels ``k, s`` on the triangle ``0 <= y <= x <= L``.

The coupled Goursat problem is

    k_xx - k_yy = rho1 s_yy + rho2 k + rho3 s + rho4 s_y,   k(x, x) = m(x),  k(x, 0) = 0
    s_xx - s_yy = rho1 k + rho5 s,                          s(x, x) = -sinh(Phi(x)),  s(x, 0) = 0

with ``rho_i = rho_i(y)``. In characteristic coordinates every equation is a
pure cross derivative, so a discrete solution is marched row by row in ``x``
along diamonds of the grid and the coupling terms are handled by successive
approximation.

The diamond stencil only links nodes with the same parity of ``i + j``. That
splits the grid into two interleaved sublattices with slightly different
truncation errors, and the mismatch is amplified by the ``s_yy`` coupling
term. The solver therefore marches on a grid ``refine`` times finer than the
requested one and keeps a single sublattice when restricting.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from ._numerics import cumulative_trapezoid
from ._validation import check_int, check_positive
from .coeffs import eval_scalars
from .exceptions import ContractError, DivergenceError, GridError, IterationLimitError

__all__ = [
    "TriangularGrid",
    "KernelTraces",
    "KernelPair",
    "solve_kernels",
    "kernel_residual",
    "kernel_traces",
    "kernel_table",
    "trace_table",
    "convergence_orders",
]


@dataclass(frozen=True)
class TriangularGrid:
    L: float
    M: int

    def __post_init__(self):
        object.__setattr__(self, "L", check_positive(self.L, "L"))
        object.__setattr__(self, "M", check_int(self.M, "M", minimum=1))

    @property
    def h(self):
        return self.L / self.M

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.M + 1)

    @property
    def node_count(self):
        return (self.M + 1) * (self.M + 2) // 2

    def nodes(self):
        """Arrays ``(i, j)`` of every node index with ``j <= i``."""
        return np.tril_indices(self.M + 1)

    def mask(self):
        return np.tri(self.M + 1, dtype=bool)


@dataclass(frozen=True, eq=False)
class KernelTraces:
    """Boundary traces used by the feedback laws (arrays have ``M + 1`` entries)."""

    kL: np.ndarray
    sL: np.ndarray
    kxL: np.ndarray
    sxL: np.ndarray
    syyL: np.ndarray
    sy_diag: np.ndarray
    kLL: float
    sLL: float
    syLL: float
    hL: float
    hpL: float


@dataclass(frozen=True, eq=False)
class KernelPair:
    """Kernels stored as square arrays; entries above the diagonal are NaN.

    ``syy`` is ``s_yy`` on the same nodes, needed by the time derivative of
    the transform.
    """

    grid: TriangularGrid
    k: np.ndarray
    s: np.ndarray
    syy: np.ndarray
    traces: KernelTraces
    residual: tuple
    iterations: int
    refine: int = 1
    update: float = 0.0
    m_diag: np.ndarray = field(default=None, repr=False)
    s_diag: np.ndarray = field(default=None, repr=False)
    h: np.ndarray = field(default=None, repr=False)
    d: float = 1.0

    @property
    def M(self):
        return self.grid.M

    def subsample(self, N):
        """Restriction to a coarser grid whose size divides ``M``."""
        if N == self.M:
            return self
        if N <= 0 or self.M % N:
            raise GridError(f"kernel grid M={self.M} is not a multiple of N={N}")
        r = self.M // N
        t = self.traces
        sl = slice(None, None, r)
        traces = KernelTraces(t.kL[sl], t.sL[sl], t.kxL[sl], t.sxL[sl], t.syyL[sl], t.sy_diag[sl],
                              t.kLL, t.sLL, t.syLL, t.hL, t.hpL)
        return KernelPair(TriangularGrid(self.grid.L, N), self.k[sl, sl], self.s[sl, sl], self.syy[sl, sl],
                          traces, self.residual, self.iterations, self.refine * r, self.update,
                          self.m_diag[sl], self.s_diag[sl], self.h[sl], self.d)


def _values_on(arr, x_src, x_dst):
    """``arr`` (given at ``x_src``) at ``x_dst``, exact where the nodes coincide."""
    n_src, n_dst = len(x_src) - 1, len(x_dst) - 1
    if n_src == n_dst:
        return np.array(arr, dtype=float)
    if n_src % n_dst == 0:
        return np.array(arr[:: n_src // n_dst], dtype=float)
    out = CubicSpline(x_src, arr)(x_dst)
    if n_dst % n_src == 0:
        out[:: n_dst // n_src] = arr
    return out


def _y_derivatives(s, h, sy_diag):
    """``s_y`` and ``s_yy`` on the triangle.

    Central differences inside; at the base ``s_yy = 0`` (the PDE forces it
    since ``s`` and ``k`` vanish there) and ``s_y`` is one-sided; on the
    diagonal ``s_y`` is supplied and ``s_yy`` uses a one-sided stencil taken on
    a single sublattice (stride 2) whenever the row is long enough.
    """
    M = s.shape[0] - 1
    sy = np.zeros_like(s)
    syy = np.zeros_like(s)
    sy[:, 1:-1] = (s[:, 2:] - s[:, :-2]) / (2.0 * h)
    syy[:, 1:-1] = (s[:, 2:] - 2.0 * s[:, 1:-1] + s[:, :-2]) / h**2
    sy[:, 0] = (-3.0 * s[:, 0] + 4.0 * s[:, 1] - s[:, 2]) / (2.0 * h) if M >= 2 else 0.0
    syy[:, 0] = 0.0
    if M >= 1:
        sy[1, 0] = (s[1, 1] - s[1, 0]) / h
    idx = np.arange(M + 1)
    sy[idx, idx] = sy_diag
    syy[0, 0] = 0.0
    if M >= 1:
        syy[1, 1] = 2.0 * (s[1, 0] - s[1, 1] + h * sy_diag[1]) / h**2
    if M >= 2:
        syy[2, 2] = (8.0 * s[2, 1] - s[2, 0] - 7.0 * s[2, 2] + 6.0 * h * sy_diag[2]) / (2.0 * h**2)
    i = idx[3:6][idx[3:6] <= M]
    syy[i, i] = (2.0 * s[i, i] - 5.0 * s[i, i - 1] + 4.0 * s[i, i - 2] - s[i, i - 3]) / h**2
    i = idx[6:]
    syy[i, i] = (2.0 * s[i, i] - 5.0 * s[i, i - 2] + 4.0 * s[i, i - 4] - s[i, i - 6]) / (4.0 * h**2)
    upper = ~np.tri(M + 1, dtype=bool)
    sy[upper] = 0.0
    syy[upper] = 0.0
    return sy, syy


def _sweep(F, diag, diag_half, h):
    """One pass of the characteristic march for ``G_xx - G_yy = F``.

    Interior nodes come from the diamond identity with the quadrature
    ``F_c / 2 + (sum of the four corner values) / 8``; this weighting vanishes
    on the grid-scale checkerboard and is what keeps the iteration stable.
    Nodes next to the diagonal come from half-size cells that lean on the
    diagonal data at half-integer nodes.
    """
    M = F.shape[0] - 1
    h2 = h * h
    G = np.zeros_like(F)
    idx = np.arange(M + 1)
    G[idx, idx] = diag
    Q = np.zeros_like(F)
    Q[1:-1, 1:-1] = 0.5 * F[1:-1, 1:-1] + 0.125 * (F[2:, 1:-1] + F[:-2, 1:-1] + F[1:-1, 2:] + F[1:-1, :-2])
    Fd = F[idx, idx]
    Fdh = 0.5 * (Fd[1:] + Fd[:-1])
    for i in range(1, M):
        G[i + 1, 1:i] = G[i, 2 : i + 1] + G[i, : i - 1] - G[i - 1, 1:i] + h2 * Q[i, 1:i]
        G[i + 1, i] = (G[i, i - 1] + diag_half[i] - diag_half[i - 1]
                       + 0.125 * h2 * (Fdh[i - 1] + Fdh[i] + F[i, i - 1] + F[i + 1, i]))
    G[~np.tri(M + 1, dtype=bool)] = 0.0
    return G


def _fine_data(scalars, Mf, L):
    """Coefficients and diagonal data on the fine grid and its half nodes.

    The diagonal data interpolate the caller's scalars, so restricted diagonal
    values agree with them exactly; the coupling coefficients come from the
    profile resampled on the fine grid.
    """
    fine = eval_scalars(scalars.profile.resample(2 * Mf), scalars.d)
    xf2 = fine.x
    m2 = _values_on(scalars.m, scalars.x, xf2)
    Phi2 = _values_on(scalars.Phi, scalars.x, xf2)
    sd2 = -np.sinh(Phi2)
    a2 = np.asarray(fine.a)
    rho2 = np.asarray(fine.rho)
    # s_y on the diagonal from the two characteristic derivatives of s there
    hf2 = L / (2 * Mf)
    g = a2[0] + cumulative_trapezoid(rho2[0] * m2 + rho2[4] * sd2, hf2)
    sy_d = 0.5 * (-a2 * np.cosh(Phi2) - g)
    return dict(
        rho=rho2[:, ::2],
        m=m2[::2], m_half=m2[1::2],
        sd=sd2[::2], sd_half=sd2[1::2],
        sy_diag=sy_d[::2],
    )


def _iterate(data, Mf, hf, tol, max_iter):
    rho = data["rho"]
    r1, r2, r3, r4, r5 = (r[None, :] for r in rho)
    tri = np.tri(Mf + 1, dtype=bool)
    k = np.zeros((Mf + 1, Mf + 1))
    s = np.zeros((Mf + 1, Mf + 1))
    upd = np.inf
    for it in range(1, max_iter + 1):
        sy, syy = _y_derivatives(s, hf, data["sy_diag"])
        Fk = np.where(tri, r1 * syy + r2 * k + r3 * s + r4 * sy, 0.0)
        Fs = np.where(tri, r1 * k + r5 * s, 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            k_new = _sweep(Fk, data["m"], data["m_half"], hf)
            s_new = _sweep(Fs, data["sd"], data["sd_half"], hf)
            upd = max(np.max(np.abs(k_new - k)), np.max(np.abs(s_new - s)))
        if not (np.all(np.isfinite(k_new)) and np.all(np.isfinite(s_new))):
            raise DivergenceError(f"kernel iteration produced non-finite values at iteration {it}")
        k, s = k_new, s_new
        if upd < tol:
            return k, s, it, upd
    raise IterationLimitError(
        f"kernel iteration did not reach tol={tol:g} in {max_iter} iterations (last update {upd:.3e})",
        residual=upd, iterations=max_iter)


def _fine_traces(kf, sf, syyf, sy_diag_f, hf):
    """Traces at ``x = L`` on the fine grid (second-order one-sided in ``x``)."""
    Mf = kf.shape[0] - 1

    def x_derivative(G):
        out = np.empty(Mf + 1)
        j = np.arange(Mf - 1)
        out[: Mf - 1] = (3.0 * G[Mf, j] - 4.0 * G[Mf - 1, j] + G[Mf - 2, j]) / (2.0 * hf)
        # last two columns: derivative along the diagonal direction minus G_y
        for jj in (Mf - 1, Mf):
            along = (3.0 * G[Mf, jj] - 4.0 * G[Mf - 1, jj - 1] + G[Mf - 2, jj - 2]) / (2.0 * hf)
            if jj < Mf:
                gy = (G[Mf, jj + 1] - G[Mf, jj - 1]) / (2.0 * hf)
            else:
                gy = (3.0 * G[Mf, jj] - 4.0 * G[Mf, jj - 1] + G[Mf, jj - 2]) / (2.0 * hf)
            out[jj] = along - gy
        return out

    i = np.arange(2, Mf + 1)
    sy_diag = np.empty(Mf + 1)
    sy_diag[2:] = (3.0 * sf[i, i] - 4.0 * sf[i, i - 1] + sf[i, i - 2]) / (2.0 * hf)
    sy_diag[:2] = sy_diag_f[:2]
    return x_derivative(kf), x_derivative(sf), syyf[Mf].copy(), sy_diag


def solve_kernels(scalars, grid=None, tol=1e-10, max_iter=200, refine=8):
    """Solve the kernel equations by successive approximation.

    Parameters
    ----------
    scalars : BacksteppingScalars
    grid : TriangularGrid, optional
        Output grid; defaults to the grid of the profile.
    tol : float
        Max-norm bound on the last successive-approximation update.
    max_iter : int
    refine : int
        The march runs on a grid ``refine`` times finer than ``grid`` and is
        restricted afterwards. ``refine >= 2`` removes the sublattice
        mismatch from the output.

    Returns
    -------
    KernelPair
    """
    if grid is None:
        grid = TriangularGrid(scalars.L, scalars.N)
    tol = check_positive(tol, "tol")
    max_iter = check_int(max_iter, "max_iter")
    refine = check_int(refine, "refine")
    if not np.isclose(grid.L, scalars.L, rtol=1e-12, atol=0.0):
        raise ContractError(f"grid length {grid.L} does not match profile length {scalars.L}")
    if grid.M < 4:
        raise GridError("kernel grid needs M >= 4")
    M, Mf = grid.M, grid.M * refine
    hf = grid.L / Mf
    data = _fine_data(scalars, Mf, grid.L)
    kf, sf, iters, upd = _iterate(data, Mf, hf, tol, max_iter)
    _, syyf = _y_derivatives(sf, hf, data["sy_diag"])
    kxL, sxL, syyL, sy_diag = _fine_traces(kf, sf, syyf, data["sy_diag"], hf)

    sl = slice(None, None, refine)
    k = kf[sl, sl].copy()
    s = sf[sl, sl].copy()
    syy = syyf[sl, sl].copy()
    m_c = _values_on(scalars.m, scalars.x, grid.x)
    sd_c = -np.sinh(_values_on(scalars.Phi, scalars.x, grid.x))
    idx = np.arange(M + 1)
    k[idx, idx] = m_c
    s[idx, idx] = sd_c
    k[:, 0] = 0.0
    s[:, 0] = 0.0
    upper = ~np.tri(M + 1, dtype=bool)
    for arr in (k, s, syy):
        arr[upper] = np.nan
        arr.setflags(write=False)

    traces = KernelTraces(
        kL=k[M].copy(), sL=s[M].copy(), kxL=kxL[sl], sxL=sxL[sl], syyL=syyL[sl], sy_diag=sy_diag[sl],
        kLL=float(k[M, M]), sLL=float(s[M, M]), syLL=float(sy_diag[-1]),
        hL=scalars.hL, hpL=scalars.hpL,
    )
    h_c = np.cosh(_values_on(scalars.Phi, scalars.x, grid.x))
    args = (m_c, sd_c, h_c, scalars.d)
    kp = KernelPair(grid, k, s, syy, traces, (np.nan, np.nan), iters, refine, upd, *args)
    res = kernel_residual(kp, scalars)
    return KernelPair(grid, k, s, syy, traces, res, iters, refine, upd, *args)


def kernel_residual(kp, scalars):
    """Max-norm residuals ``(rk, rs)`` of both kernel PDEs at interior nodes.

    Every derivative is a central difference on the kernel grid.
    """
    M, h = kp.grid.M, kp.grid.h
    if M < 4:
        warnings.warn("kernel grid too coarse for a residual", RuntimeWarning, stacklevel=2)
        return (np.inf, np.inf)
    rho = np.vstack([_values_on(r, scalars.x, kp.grid.x) for r in scalars.rho])
    k = np.nan_to_num(kp.k)
    s = np.nan_to_num(kp.s)
    c = (slice(1, -1), slice(1, -1))
    lap_k = (k[2:, 1:-1] + k[:-2, 1:-1] - k[1:-1, 2:] - k[1:-1, :-2]) / h**2
    lap_s = (s[2:, 1:-1] + s[:-2, 1:-1] - s[1:-1, 2:] - s[1:-1, :-2]) / h**2
    sy = (s[1:-1, 2:] - s[1:-1, :-2]) / (2.0 * h)
    syy = (s[1:-1, 2:] - 2.0 * s[c] + s[1:-1, :-2]) / h**2
    r1, r2, r3, r4, r5 = (r[None, 1:-1] for r in rho)
    Rk = lap_k - (r1 * syy + r2 * k[c] + r3 * s[c] + r4 * sy)
    Rs = lap_s - (r1 * k[c] + r5 * s[c])
    # interior: 1 <= j <= i-1, 1 <= i <= M-1
    inner = np.tri(M - 1, k=-1, dtype=bool)
    return (float(np.max(np.abs(Rk[inner]))), float(np.max(np.abs(Rs[inner]))))


def kernel_traces(kp):
    """The trace record of a converged pair."""
    if kp.grid.M < 4:
        raise GridError("traces need M >= 4")
    return kp.traces


def kernel_table(kp):
    """Columns ``x, y, k, s`` over all nodes, row by row."""
    i, j = kp.grid.nodes()
    x = kp.grid.x
    return {"x": x[i], "y": x[j], "k": kp.k[i, j], "s": kp.s[i, j]}


def trace_table(kp):
    """Trace columns plus the scalar header values."""
    t = kp.traces
    cols = {"y": kp.grid.x, "kL": t.kL, "sL": t.sL, "kxL": t.kxL, "sxL": t.sxL, "syyL": t.syyL}
    header = {"kLL": t.kLL, "sLL": t.sLL, "syLL": t.syLL, "hL": t.hL, "hpL": t.hpL}
    return cols, header


def convergence_orders(residuals, min_order=1.5):
    """Observed orders ``log2(r_M / r_2M)`` along a doubling ladder.

    Returns ``(orders, flagged)``; ``flagged`` is true when any finite order
    falls below ``min_order``, which usually means the coefficients are too
    rough for the scheme's nominal second order.
    """
    r = np.asarray(residuals, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(r[:-1] / r[1:])
    finite = orders[np.isfinite(orders)]
    return orders, bool(finite.size and np.any(finite < min_order))
