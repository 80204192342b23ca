"""The acceptance battery: one function per criterion, each returning a verdict dict.

Every verdict has ``id``, ``name``, ``passed`` and criterion-specific numbers.
Wall-clock times are kept out of the verdicts so reports stay reproducible;
:func:`run_acceptance` returns them separately.
"""

import math
import time

import numpy as np

from .coeffs import CoefficientProfile, eval_scalars
from .energy import constant_K, energy_E, energy_V, equivalence_bounds, fit_decay, x_inner
from .kernel import TriangularGrid, solve_kernels
from .resolvent import (
    ResolventProblem,
    functional_J,
    h2_norm,
    monotonicity_gap,
    resolvent_limit,
    sigma_schedule,
    solve_regularized,
    _slope_L,
)
from .simulate import Disturbance, SimConfig, plant_kernels, run_closed_loop, run_target_direct
from .transform import TransformOperator, WaveState, forward_transform, operator_norms

__all__ = ["CRITERIA", "run_acceptance", "random_smooth", "admissible_pair", "resolvent_datasets"]

# shared scenario: nontrivial profile, d = 1, L = 1, N = 200, T = 5
LAM, BETA, D, L, N, T = 0.5, 8.0, 1.0, 1.0, 200, 5.0


def random_smooth(rng, x, L=1.0, modes=6, vanish_end=False):
    """Random smooth function vanishing at ``x = 0`` with decaying sine modes."""
    c = rng.normal(size=modes) / np.arange(1, modes + 1) ** 2
    k = np.arange(1, modes + 1)
    if vanish_end:
        return np.sin(np.outer(x, k) * np.pi / L) @ c
    # quarter-wave sines all have zero slope at L; the ramp keeps it generic
    return np.sin(np.outer(x, 2 * k - 1) * np.pi / (2 * L)) @ c + rng.normal() * x / L


def _random_states(rng, n, N, L=1.0):
    x = np.linspace(0.0, L, N + 1)
    out = []
    for _ in range(n):
        pos = random_smooth(rng, x, L)
        vel = rng.normal() * np.cos(np.outer(x, np.arange(4)) * np.pi / L) @ rng.normal(size=4)
        out.append(WaveState(0.0, pos, vel, "plant", L))
    return out


class _Cache:
    def __init__(self):
        self.store = {}

    def get(self, key, fn):
        if key not in self.store:
            self.store[key] = fn()
        return self.store[key]


def _profile(N=N):
    return CoefficientProfile.from_functions(L, N, LAM, BETA)


def _scenario(case, eps=1e-3, disturbed=False):
    dist = Disturbance("raised_cosine", 1.0, 2.0 * math.pi) if disturbed else Disturbance()
    return SimConfig(case, _profile(), d=D, P=1.0, disturbance=dist, N=N, T=T, eps=eps, stride=1)


def _kernels(cache):
    return cache.get("kp", lambda: plant_kernels(_scenario("DD")))


def _target_run(cache, case, eps=1e-3, disturbed=False):
    return cache.get(("target", case, eps, disturbed),
                     lambda: run_target_direct(_scenario(case, eps, disturbed), kernels=_kernels(cache)))


def _plant_run(cache):
    return cache.get("plant", lambda: run_closed_loop(_scenario("DD", disturbed=True), kernels=_kernels(cache)))


# 1 -----------------------------------------------------------------------------

def criterion_1(cache, seed=0):
    rows, ok_exact = [], True
    for M in (32, 64, 128):
        p = CoefficientProfile.from_functions(1.0, M, 0.0, 0.0)
        kp = solve_kernels(eval_scalars(p, 1.0), TriangularGrid(1.0, M))
        x = kp.grid.x
        i = np.arange(M + 1)
        diag = max(np.max(np.abs(kp.k[i, i] - np.sinh(x))), np.max(np.abs(kp.s[i, i] + np.sinh(x))))
        base = max(np.max(np.abs(kp.k[:, 0])), np.max(np.abs(kp.s[:, 0])))
        ok_exact &= bool(diag <= 1e-14 and base <= 1e-14)
        rows.append({"M": M, "rk": kp.residual[0], "rs": kp.residual[1], "diag_err": diag, "base_err": base})
    ratios = []
    for a, b in zip(rows, rows[1:]):
        ratios.append([a["rk"] / b["rk"], a["rs"] / b["rs"]])
    ok_ratio = all(3.0 <= r <= 5.0 for pair in ratios for r in pair)
    return {"passed": ok_ratio and ok_exact, "ladder": rows, "ratios": ratios, "runtime_limit_s": 30}


# 2 -----------------------------------------------------------------------------

def criterion_2(cache, seed=0):
    d = D
    p = CoefficientProfile.from_functions(L, N, -d, -d * d)
    kp = solve_kernels(eval_scalars(p, d), TriangularGrid(L, N))
    kmax = float(np.nanmax(np.abs(kp.k)))
    smax = float(np.nanmax(np.abs(kp.s)))
    rng = np.random.default_rng(seed)
    err = 0.0
    for st in _random_states(rng, 20, N):
        w = forward_transform(st, kp, profile=p)
        err = max(err, float(np.max(np.abs(w.pos - st.pos))), float(np.max(np.abs(w.vel - st.vel))))
    ok = kmax <= 1e-14 and smax <= 1e-14 and err <= 1e-13
    return {"passed": ok, "k_max": kmax, "s_max": smax, "identity_err": err}


# 3 -----------------------------------------------------------------------------

def criterion_3(cache, seed=0):
    p = _profile()
    op = TransformOperator(_kernels(cache), p, N)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for st in _random_states(rng, 100, N):
        w, wt = op.apply(st.pos, st.vel)
        u, v = op.solve(w, wt)
        diff = WaveState(0.0, u[0] - st.pos, v[0] - st.vel, "plant", L)
        worst = max(worst, math.sqrt(x_inner(diff, diff)) / math.sqrt(x_inner(st, st)))
    bound = 5.0 * (L / N) ** 2
    return {"passed": worst <= bound, "max_rel_err": worst, "bound": bound}


# 4 -----------------------------------------------------------------------------

def criterion_4(cache, seed=0):
    lo, hi = equivalence_bounds(1.0, 1.0)
    K = constant_K(1.0, 1.0)
    rng = np.random.default_rng(seed)
    viol, worst_lo, worst_hi = 0, math.inf, math.inf
    for st in _random_states(rng, 1000, N):
        tgt = WaveState(0.0, st.pos, st.vel * rng.uniform(0.1, 10.0), "target", 1.0)
        base = 2.0 * energy_E(tgt)
        twoV = 2.0 * energy_V(tgt, 1.0)
        slack = 1e-12 * max(base, twoV)
        viol += (lo * base > twoV + slack) + (twoV > hi * base + slack)
        worst_lo = min(worst_lo, twoV / base / lo)
        worst_hi = min(worst_hi, hi * base / twoV)
    ok = viol == 0 and K == 81.0 and (lo, hi) == (1.0 / 9.0, 9.0)
    return {"passed": ok, "violations": int(viol), "K": K, "lo": lo, "hi": hi,
            "min_lower_margin": worst_lo, "min_upper_margin": worst_hi}


# 5 -----------------------------------------------------------------------------

def criterion_5(cache, seed=0):
    tr = _target_run(cache, "DD")
    env = tr.V * np.exp(2.0 * D * tr.times) / tr.V[0]
    rep = fit_decay(tr)
    ok = float(env.max()) <= 1.02 and rep.slope <= -2.0 * D + 0.1
    return {"passed": ok, "max_envelope_ratio": float(env.max()), "slope": rep.slope, "runtime_limit_s": 60}


# 6 -----------------------------------------------------------------------------

def criterion_6(cache, seed=0):
    out, ok = {}, True
    for case in ("DD", "DN"):
        s1 = fit_decay(_target_run(cache, case, 1e-3, True)).slope
        s2 = fit_decay(_target_run(cache, case, 5e-4, True)).slope
        good = s1 <= -2.0 * D + 0.2 and abs(s1 - s2) < 0.05
        ok &= good
        out[case] = {"slope": s1, "slope_half_eps": s2, "passed": good}
    return {"passed": bool(ok), **out}


# 7 -----------------------------------------------------------------------------

def criterion_7(cache, seed=0):
    pl = _plant_run(cache)
    tg = _target_run(cache, "DD", 1e-3, True)
    op = TransformOperator(_kernels(cache), _profile(), N)
    err = 0.0
    for a, b in zip(pl.states, tg.states):
        w, wt = op.apply(a.pos, a.vel)
        w[0] = 0.0
        diff = WaveState(0.0, w - b.pos, wt - b.vel, "plant", L)
        err = max(err, math.sqrt(x_inner(diff, diff)))
    dt = pl.dt
    bound = 5.0 * (L / N) ** 2 + 5.0 * dt**2
    return {"passed": err <= bound, "max_err": err, "bound": bound}


# 8 -----------------------------------------------------------------------------

def criterion_8(cache, seed=0):
    pl = _plant_run(cache)
    C1, C2 = operator_norms(_kernels(cache), _profile())
    K = constant_K(L, D)
    C = C1 * C2 * math.sqrt(K)
    ratio = float(np.max(pl.E * np.exp(2.0 * D * pl.times)) / pl.E[0])
    return {"passed": ratio <= 1.1 * C, "max_ratio": ratio, "C": C, "C1": C1, "C2": C2, "K": K}


# 9 -----------------------------------------------------------------------------

RES_N = 2000


def resolvent_datasets(seed=0, N=RES_N, L=1.0):
    x = np.linspace(0.0, L, N + 1)
    rng = np.random.default_rng(seed)
    return {
        "zero": (np.zeros_like(x), np.zeros_like(x)),
        "constant_n": (np.zeros_like(x), np.full_like(x, 4.0)),
        "random": (random_smooth(rng, x, L), random_smooth(rng, x, L)),
    }


def _resolvent_problems(seed):
    for case in ("DD", "DN"):
        for name, (m, n) in resolvent_datasets(seed).items():
            yield case, name, ResolventProblem(case, m, n, d=1.0, P=1.0, hL=1.0, sigma=1e-1)


def criterion_9(cache, seed=0):
    out, ok = [], True
    for case, name, prob in _resolvent_problems(seed):
        lim = resolvent_limit(prob, sigma_schedule())
        cols = lim.columns()
        bc_ok = bool(np.all(cols["bc_residual"] <= 1e-10))
        good = lim.cauchy_ratio < 0.1 and bc_ok and lim.uniform_ok and lim.inclusion_ok
        ok &= good
        out.append({"case": case, "data": name, "passed": bool(good), "b": lim.b, "argument": lim.arg,
                    "cauchy_ratio": lim.cauchy_ratio, "max_bc_residual": float(cols["bc_residual"].max()),
                    "norms_H2": cols["norm_H2"], "inclusion_ok": lim.inclusion_ok})
    return {"passed": bool(ok), "runs": out, "runtime_limit_s": 30}


# 10 ----------------------------------------------------------------------------

def admissible_pair(rng, case, d, P, hL, N=200, L=1.0):
    """A random ``(q, l)`` obeying the boundary inclusion with an explicit selection."""
    x = np.linspace(0.0, L, N + 1)
    h = L / N
    q, l = random_smooth(rng, x, L), random_smooth(rng, x, L)
    if case == "DD":
        if rng.random() < 0.3:
            q = q - _slope_L(q, h) * x  # q'(L) = 0 leaves the selection free
        qp = _slope_L(q, h)
        th = math.copysign(1.0, qp) if abs(qp) > 1e-9 else rng.uniform(-1.0, 1.0)
        l = l + (-d * hL * P * th - d * q[-1] - l[-1]) * x / L
    else:
        arg = l[-1] + d * q[-1]
        if rng.random() < 0.3:
            l = l - arg * x / L
            arg = 0.0
        th = math.copysign(1.0, arg) if abs(arg) > 1e-9 else rng.uniform(-1.0, 1.0)
        phi = x * x * (x - L) / L**2  # phi(0) = phi(L) = 0
        q = q + (-hL * P * th - _slope_L(q, h)) / _slope_L(phi, h) * phi
    return q, l


def criterion_10(cache, seed=0):
    rng = np.random.default_rng(seed)
    out, ok = {}, True
    for case in ("DD", "DN"):
        worst, same = math.inf, 0.0
        for _ in range(200):
            d, P, hL = rng.uniform(0.2, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.5, 3.0)
            p1 = admissible_pair(rng, case, d, P, hL)
            p2 = admissible_pair(rng, case, d, P, hL)
            gap = monotonicity_gap(p1, p2, case, d, P, hL)
            dq = WaveState(0.0, p1[0] - p2[0], p1[1] - p2[1], "target", 1.0)
            scale = max(1.0, x_inner(dq, dq, d))
            worst = min(worst, gap / scale)
            same = max(same, abs(monotonicity_gap(p1, p1, case, d, P, hL)))
        good = worst >= -1e-6 and same == 0.0
        ok &= good
        out[case] = {"min_scaled_gap": worst, "identical_gap": same, "passed": good}
    return {"passed": bool(ok), **out}


# 11 ----------------------------------------------------------------------------

def criterion_11(cache, seed=0, n_dirs=20, deltas=(1e-3, 1e-4), band=(90.0, 110.0)):
    rng = np.random.default_rng(seed + 11)
    x = np.linspace(0.0, 1.0, RES_N + 1)
    h = 1.0 / RES_N
    dirs = []
    for _ in range(n_dirs):
        rho = random_smooth(rng, x)
        dirs.append(rho / h2_norm(rho, h))
    runs, ok, n_bad, n_not_min = [], True, 0, 0
    for case, name, prob in _resolvent_problems(seed):
        for s in sigma_schedule():
            pr = prob.with_sigma(float(s))
            sol = solve_regularized(pr)
            q = sol.q
            J0 = functional_J(q, pr)
            ratios = []
            for rho in dirs:
                dJ = [functional_J(q + dl * rho, pr) - J0 for dl in deltas]
                n_not_min += sum(v < -1e-12 * max(1.0, abs(J0)) for v in dJ)
                ratios.append(abs(dJ[0]) / abs(dJ[1]) if dJ[1] != 0 else math.inf)
            bad = sum(not band[0] <= r <= band[1] for r in ratios)
            n_bad += bad
            ok &= bad == 0
            runs.append({"case": case, "data": name, "sigma": float(s), "argument": sol.arg,
                         "kink_zone": abs(sol.arg) < s, "min_ratio": float(min(ratios)),
                         "max_ratio": float(max(ratios)), "bad_directions": bad})
    return {"passed": bool(ok), "band": list(band), "failed_checks": n_bad,
            "total_checks": len(runs) * n_dirs, "minimality_violations": int(n_not_min), "runs": runs}


CRITERIA = {
    "1": ("kernel correctness", criterion_1),
    "2": ("identity profile", criterion_2),
    "3": ("transform round trip", criterion_3),
    "4": ("energy sandwich", criterion_4),
    "5": ("undisturbed rapid decay", criterion_5),
    "6": ("disturbance rejection", criterion_6),
    "7": ("plant/target commutation", criterion_7),
    "8": ("energy decay bound", criterion_8),
    "9": ("resolvent construction", criterion_9),
    "10": ("monotonicity", criterion_10),
    "11": ("variational consistency", criterion_11),
}


def run_acceptance(only=None, seed=0):
    """Evaluate the selected criteria; returns ``(verdicts, runtimes)``."""
    ids = list(CRITERIA) if not only else [str(i) for i in only]
    unknown = [i for i in ids if i not in CRITERIA]
    if unknown:
        raise KeyError(f"unknown criteria {unknown}")
    cache = _Cache()
    verdicts, runtimes = {}, {}
    for cid in ids:
        name, fn = CRITERIA[cid]
        t0 = time.perf_counter()
        res = fn(cache, seed=seed)
        runtimes[cid] = time.perf_counter() - t0
        limit = res.get("runtime_limit_s")
        if limit is not None and runtimes[cid] > limit:
            res["passed"] = False
            res["runtime_exceeded"] = True
        verdicts[cid] = {"id": cid, "name": name, **res}
    return verdicts, runtimes
