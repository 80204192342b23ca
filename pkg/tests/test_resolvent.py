import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavestab.exceptions import ContractError, NoBracketError
from wavestab.resolvent import (
    ResolventProblem,
    _bisect,
    functional_J,
    h2_norm,
    moreau,
    monotonicity_gap,
    resolvent_limit,
    resolvent_point,
    sigma_schedule,
    sign_set,
    solve_regularized,
    yosida,
)

finite = st.floats(-1e3, 1e3)
sig = st.floats(1e-4, 10.0)


def _const(case, n=4.0, m_slope=0.0, N=400, **kw):
    x = np.linspace(0.0, 1.0, N + 1)
    return ResolventProblem(case, m_slope * x, np.full(N + 1, n), **kw)


# the sign graph and its regularizations ----------------------------------------------

def test_sign_set():
    assert sign_set(2.0) == (1.0, 1.0)
    assert sign_set(-1e-9) == (-1.0, -1.0)
    assert sign_set(0.0) == (-1.0, 1.0)


def test_regularization_examples():
    s = 0.3
    assert yosida(2 * s, s) == 1.0
    assert yosida(0.5 * s, s) == pytest.approx(0.5)
    assert resolvent_point(2 * s, s) == pytest.approx(s)
    assert moreau(2 * s, s) == pytest.approx(1.5 * s)
    assert moreau(0.5 * s, s) == pytest.approx(0.125 * s)
    np.testing.assert_allclose(yosida(np.array([-1.0, 0.0, 1.0]), 0.5), [-1.0, 0.0, 1.0])


@given(x=finite, s=sig)
def test_resolvent_identity(x, s):
    # J_s x + s alpha_s(x) = x and alpha_s(x) lies in sign(J_s x)
    j, a = resolvent_point(x, s), yosida(x, s)
    assert j + s * a == pytest.approx(x, abs=1e-9 * (1 + abs(x)))
    lo, hi = sign_set(j)
    assert lo - 1e-12 <= a <= hi + 1e-12


@given(x=finite, s=sig)
def test_moreau_gradient_is_yosida(x, s):
    e = 1e-6 * max(s, 1.0)
    fd = (moreau(x + e, s) - moreau(x - e, s)) / (2 * e)
    assert fd == pytest.approx(yosida(x, s), abs=1e-3 + e / s)


@given(x=finite, y=finite, s=sig)
def test_yosida_monotone_lipschitz(x, y, s):
    ax, ay = yosida(x, s), yosida(y, s)
    assert (ax - ay) * (x - y) >= 0
    assert abs(ax - ay) <= abs(x - y) / s * (1 + 1e-12) + 1e-15


def test_sigma_schedule():
    np.testing.assert_allclose(sigma_schedule(), [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])


# regularized problems --------------------------------------------------------------

@pytest.mark.parametrize("case", ["DD", "DN"])
def test_zero_data_zero_solution(case):
    sol = solve_regularized(_const(case, n=0.0, N=50))
    assert np.all(sol.q == 0) and sol.bc_residual == 0.0


def _linear_regime_exact(case, x, n, d, k, s):
    # -q'' + c^2 q = n, q(0) = 0, alpha_s(z) = z / s: q = n/c^2 (1 - cosh cx) + A sinh cx
    c = 1.0 + d
    p0 = n / c**2 * (1 - np.cosh(c * x))
    p0L, p0pL = p0[-1], -n / c * np.sinh(c)
    sL, spL = np.sinh(c), c * np.cosh(c)
    if case == "DD":
        # c q(L) + d k q'(L) / s = 0
        A = -(c * p0L + d * k / s * p0pL) / (c * sL + d * k / s * spL)
    else:
        # q'(L) + k c q(L) / s = 0
        A = -(p0pL + k * c / s * p0L) / (spL + k * c / s * sL)
    return p0 + A * np.sinh(c * x)


@pytest.mark.parametrize("case", ["DD", "DN"])
def test_linear_regime_closed_form(case):
    prob = _const(case, n=4.0, N=2000, sigma=100.0, P=1.5, hL=1.3)
    sol = solve_regularized(prob)
    exact = _linear_regime_exact(case, prob.x, 4.0, 1.0, 1.5 * 1.3, 100.0)
    assert abs(sol.arg) < 100.0  # stays on the linear piece
    assert np.max(np.abs(sol.q - exact)) < 1e-6


@pytest.mark.parametrize("case, n, b", [("DD", 4.0, -1.0), ("DN", 4.0, 1.0), ("DD", -4.0, 1.0)])
def test_sigma_sweep_constant_data(case, n, b):
    lim = resolvent_limit(_const(case, n=n, N=1000))
    assert lim.b == pytest.approx(b, abs=1e-12)
    assert lim.inclusion_ok and lim.uniform_ok
    assert lim.cauchy_ratio < 0.1
    assert np.all(np.abs(lim.columns()["b"]) <= 1.0)
    assert np.all(lim.columns()["bc_residual"] < 1e-10)


@pytest.mark.parametrize("case", ["DD", "DN"])
@given(seed=st.integers(0, 2**31 - 1))
def test_sweep_random_data(case, seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, 401)
    m = rng.normal() * x + rng.normal() * np.sin(math.pi * x)
    n = rng.normal() + rng.normal() * np.cos(2 * x)
    lim = resolvent_limit(ResolventProblem(case, m, n, P=rng.uniform(0, 3)))
    assert abs(lim.b) <= 1.0 + 1e-12
    assert lim.inclusion_ok


def test_problem_validation():
    x = np.linspace(0, 1, 21)
    with pytest.raises(ContractError):
        ResolventProblem("DD", x + 1.0, x)
    with pytest.raises(ContractError):
        ResolventProblem("DD", x[:5], x[:5])
    with pytest.raises(ContractError):
        resolvent_limit(_const("DD", N=50), sigmas=[1e-1, 1e-2, 1e-1])


def test_no_bracket_reports_scan():
    with pytest.raises(NoBracketError) as exc:
        _bisect(lambda z: 1.0, 1.0, max_expand=5)
    assert len(exc.value.scan) == 7


def test_h2_norm_of_sine():
    x = np.linspace(0, 1, 2001)
    v = h2_norm(np.sin(math.pi * x), x[1])
    assert v == pytest.approx(math.sqrt(0.5 * (1 + math.pi**2 + math.pi**4)), rel=1e-5)


# monotonicity ---------------------------------------------------------------------

def _pair(rng, case, d=1.0, P=1.0, hL=1.0, N=200):
    x = np.linspace(0.0, 1.0, N + 1)
    h = x[1]
    q = rng.normal() * x + rng.normal() * np.sin(1.5 * math.pi * x) + 0.3 * rng.normal() * x**2
    l = rng.normal() * np.sin(math.pi * x / 2) + rng.normal() * x**3
    slope = (1.5 * q[-1] - 2.0 * q[-2] + 0.5 * q[-3]) / h
    if case == "DD":
        # choose l(L) so that -(d q + l)(L) / (d hL P) is in sign(q'(L))
        sel = math.copysign(1.0, slope) if slope != 0 else rng.uniform(-1, 1)
        l += (-d * hL * P * sel - d * q[-1] - l[-1]) * x
    else:
        arg = l[-1] + d * q[-1]
        sel = math.copysign(1.0, arg)
        target = -hL * P * sel
        # bend q near L so the one-sided slope hits the target without moving q(L)
        bump = (x - 1.0) * x**8
        bslope = (1.5 * bump[-1] - 2.0 * bump[-2] + 0.5 * bump[-3]) / h
        q = q + (target - slope) / bslope * bump
    return q, l


@pytest.mark.parametrize("case", ["DD", "DN"])
def test_monotonicity_identical_pairs(case):
    p = _pair(np.random.default_rng(1), case)
    assert monotonicity_gap(p, p, case, 1.0, 1.0, 1.0) == 0.0


@pytest.mark.parametrize("case", ["DD", "DN"])
@given(seed=st.integers(0, 2**31 - 1))
def test_monotonicity_random_pairs(case, seed):
    rng = np.random.default_rng(seed)
    p1, p2 = _pair(rng, case), _pair(rng, case)
    scale = sum(float(np.sum((a - b) ** 2)) for a, b in zip(p1, p2)) / 200
    assert monotonicity_gap(p1, p2, case, 1.0, 1.0, 1.0) >= -1e-8 * max(1.0, scale)


def test_monotonicity_rejects_inadmissible():
    x = np.linspace(0, 1, 101)
    with pytest.raises(ContractError):
        monotonicity_gap((x, 0 * x), (x, 0 * x), "DD", 1.0, 1.0, 1.0)


# variational functional -------------------------------------------------------------

@pytest.mark.parametrize("case", ["DD", "DN"])
def test_J_minimized_by_solution(case):
    prob = _const(case, n=4.0, m_slope=0.5, N=400, sigma=1e-1)
    sol = solve_regularized(prob)
    J0 = functional_J(sol.q, prob)
    rng = np.random.default_rng(3)
    x = prob.x
    for _ in range(10):
        rho = rng.normal() * x + rng.normal() * np.sin(math.pi * x)
        rho /= h2_norm(rho, prob.dx)
        dJ = functional_J(sol.q + 1e-2 * rho, prob) - J0
        assert dJ >= 0.0
        # quadratic growth with the unit-size coefficient away from the kink
        ratio = dJ / (functional_J(sol.q + 1e-3 * rho, prob) - J0)
        assert ratio == pytest.approx(100.0, rel=0.1)


@pytest.mark.parametrize("case", ["DD", "DN"])
@given(seed=st.integers(0, 2**31 - 1), t=st.floats(0, 1))
def test_J_convex_on_segments(case, seed, t):
    rng = np.random.default_rng(seed)
    prob = _const(case, n=rng.normal(), N=100, sigma=1e-2)
    x = prob.x
    a = rng.normal() * x + rng.normal() * np.sin(2 * x)
    b = rng.normal() * x + rng.normal() * x**2
    Jt = functional_J((1 - t) * a + t * b, prob)
    bound = (1 - t) * functional_J(a, prob) + t * functional_J(b, prob)
    assert Jt <= bound + 1e-9 * (1 + abs(bound))


def test_J_zero():
    prob = _const("DN", n=0.0, N=50)
    assert functional_J(np.zeros(51), prob) == 0.0
