import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from wavestab.coeffs import CoefficientProfile, eval_scalars
from wavestab.exceptions import ContractError, ParameterError
from wavestab.kernel import solve_kernels
from wavestab.transform import (
    BacksteppingController,
    BacksteppingTransform,
    TransformOperator,
    WaveState,
    control_U1_dd,
    control_U1_dn,
    control_U2,
    forward_transform,
    inverse_transform,
    operator_norms,
    sat,
    trace_U3,
    trace_U4_dd,
    trace_U4_dn,
)

from .oracles import golden


def _setup(N, lam=0.0, beta=0.0, d=1.0):
    p = CoefficientProfile.from_functions(1.0, N, lam, beta)
    kp = solve_kernels(eval_scalars(p, d))
    return p, kp


def _state(pos, vel, frame="plant"):
    return WaveState(0.0, pos, vel, frame, 1.0)


@pytest.fixture(scope="module")
def unstable():
    return _setup(100, 0.5, 8.0)


@pytest.fixture(scope="module")
def identity():
    return _setup(40, -1.0, -1.0)


def test_zero_state(unstable):
    p, kp = unstable
    z = np.zeros(101)
    w = forward_transform(_state(z, z), kp, profile=p)
    assert np.all(w.pos == 0) and np.all(w.vel == 0)
    u = inverse_transform(_state(z, z, "target"), kp, profile=p)
    assert np.all(u.pos == 0) and np.all(u.vel == 0)
    st_ = _state(z, z)
    assert trace_U3(st_, kp, p) == 0 and trace_U4_dd(st_, kp, p) == 0 and trace_U4_dn(st_, kp, p) == 0
    assert control_U1_dd(st_, kp) == 0 and control_U1_dn(st_, kp, 1.0) == 0


def test_identity_profile_maps(identity):
    p, kp = identity
    x = np.linspace(0, 1, 41)
    st_ = _state(np.sin(2 * x), np.cos(3 * x))
    w = forward_transform(st_, kp, profile=p)
    np.testing.assert_array_equal(w.pos, st_.pos)
    np.testing.assert_array_equal(w.vel, st_.vel)
    assert trace_U3(st_, kp, p) == st_.vel[-1]
    assert trace_U4_dn(st_, kp, p) == st_.pos[-1]
    h = 1 / 40
    one_sided = (1.5 * st_.pos[-1] - 2 * st_.pos[-2] + 0.5 * st_.pos[-3]) / h
    assert trace_U4_dd(st_, kp, p) == pytest.approx(one_sided, abs=1e-12)
    assert control_U1_dd(st_, kp) == 0.0
    u = _state(2 * x, 0 * x)
    assert control_U1_dn(u, kp, gamma=1.0) == pytest.approx(-2.0, abs=1e-14)


def test_w_at_L_against_closed_form():
    errs = []
    for N in (50, 100, 200):
        p, kp = _setup(N)
        x = np.linspace(0, 1, N + 1)
        w = forward_transform(_state(np.sin(np.pi * x / 2), 0 * x), kp, profile=p)
        errs.append(abs(w.pos[-1] - golden.W_L_QUARTER_SINE))
    assert errs[-1] < 1e-5
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_u1_dd_against_closed_form():
    N = 200
    p, kp = _setup(N)
    x = np.linspace(0, 1, N + 1)
    assert control_U1_dd(_state(x, 0 * x), kp) == pytest.approx(golden.U1_DD_LINEAR, abs=1e-5)


def test_u4_dn_is_last_row(unstable):
    p, kp = unstable
    x = np.linspace(0, 1, 101)
    st_ = _state(x * np.cos(x), np.sin(3 * x))
    # same quadrature; only the BLAS summation order differs
    assert trace_U4_dn(st_, kp, p) == pytest.approx(forward_transform(st_, kp, profile=p).pos[-1], rel=1e-14)


def test_u4_dd_matches_differentiated_transform():
    errs = []
    for N in (50, 100, 200):
        p, kp = _setup(N, 0.5, 8.0)
        x = np.linspace(0, 1, N + 1)
        st_ = _state(np.sin(np.pi * x / 2) * x, np.sin(np.pi * x))
        w = forward_transform(st_, kp, profile=p).pos
        h = 1 / N
        fd = (1.5 * w[-1] - 2 * w[-2] + 0.5 * w[-3]) / h
        errs.append(abs(trace_U4_dd(st_, kp, p) - fd))
    assert errs[-1] < 0.05
    assert errs[0] / errs[2] > 8.0


def test_round_trip_second_order_or_better(unstable):
    p, kp = unstable
    op = TransformOperator(kp, p)
    rng = np.random.default_rng(5)
    x = np.linspace(0, 1, 101)
    for _ in range(5):
        c = rng.normal(size=4)
        u = np.sin(np.outer(x, [1, 2, 3, 4]) * np.pi / 2) @ c
        v = np.cos(np.outer(x, [0, 1, 2, 3]) * np.pi) @ c
        w, wt = op.apply(u, v)
        uu, vv = op.solve(w, wt)
        assert np.max(np.abs(uu[0] - u)) <= 5 * (1 / 100) ** 2
        assert np.max(np.abs(vv[0] - v)) <= 5 * (1 / 100) ** 2


def test_matrix_matches_apply(unstable):
    p, kp = unstable
    op = TransformOperator(kp, p, 50)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=51), rng.normal(size=51)
    w, wt = op.apply(u, v)
    np.testing.assert_allclose(op.matrix() @ np.concatenate([u, v]), np.concatenate([w, wt]), atol=1e-10)


def test_operator_norms(unstable):
    p, kp = unstable
    C1, C2 = operator_norms(kp, p, N=50)
    assert math.isfinite(C1) and math.isfinite(C2)
    assert C1 * C2 >= 1 - 1e-6


@given(z=st.floats(-50, 50, allow_nan=False))
def test_sat_bounds(z):
    assert -1.0 <= sat(z) <= 1.0
    if abs(z) <= 1:
        assert sat(z) == z


def test_control_u2_examples():
    eps = 1e-3
    cv = control_U2("DD", (0.7, 0.0), 1.0, 1.0, 2.0, eps)
    assert cv.selection == 0.0 and cv.u2 == pytest.approx(-0.7 / 2.0)
    cv = control_U2("DN", (5 * eps, 0.0), 1.0, 1.5, 2.0, eps)
    assert cv.selection == 1.0 and cv.u2 == -1.5
    cv = control_U2("DN", (eps / 2, 0.0), 1.0, 1.0, 2.0, eps)
    assert cv.selection == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        control_U2("DD", (0.0, 0.0), 1.0, 1.0, 1.0, 0.0)


@given(u3=st.floats(-10, 10), u4=st.floats(-10, 10), case=st.sampled_from(["DD", "DN"]))
def test_control_u2_formula(u3, u4, case):
    d, P, hL, eps = 1.3, 0.8, 1.7, 1e-2
    cv = control_U2(case, (u3, u4), d, P, hL, eps)
    assert abs(cv.selection) <= 1.0
    if case == "DD":
        assert cv.u2 == pytest.approx(-u3 / (d * hL) - P * cv.selection)
    else:
        assert cv.u2 == pytest.approx(-P * cv.selection)


def test_state_contracts():
    with pytest.raises(ContractError):
        WaveState(0.0, np.array([0.1, 0, 0]), np.zeros(3))
    with pytest.raises(ContractError):
        WaveState(0.0, np.zeros(4), np.zeros(3))
    p, kp = _setup(20)
    z = np.zeros(21)
    with pytest.raises(ContractError):
        forward_transform(_state(z, z, "target"), kp, profile=p)


def test_estimator_api(unstable):
    p, _ = unstable
    est = BacksteppingTransform(d=1.0)
    assert clone(est).get_params() == est.get_params()
    est.fit(profile=p)
    rng = np.random.default_rng(1)
    x = np.linspace(0, 1, 101)
    X = np.stack([np.concatenate([np.sin(k * x), np.cos(k * x)]) for k in rng.uniform(0.5, 3, 4)])
    Y = est.transform(X)
    back = est.inverse_transform(Y)
    np.testing.assert_allclose(back, X, atol=1e-10)
    ctl = BacksteppingController(case="DD", P=1.0, eps=1e-3).fit(est)
    assert ctl.predict(X).shape == (4,)
