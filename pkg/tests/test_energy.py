import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavestab.energy import (
    constant_K,
    energy_E,
    energy_V,
    equivalence_bounds,
    fit_decay,
    x_inner,
    x_norm,
)
from wavestab.exceptions import ContractError, FitError
from wavestab.transform import WaveState


def _st(pos, vel, frame="target", L=1.0):
    return WaveState(0.0, pos, vel, frame, L)


def test_zero_energies():
    z = np.zeros(51)
    assert energy_E(_st(z, z)) == 0.0 and energy_V(_st(z, z), 1.0) == 0.0 and x_norm(_st(z, z)) == 0.0


def test_energy_examples():
    x = np.linspace(0, 1, 201)
    assert energy_E(_st(x, 0 * x)) == pytest.approx(0.5, abs=1e-13)
    assert energy_V(_st(0 * x, 1 + 0 * x), 3.0) == pytest.approx(0.5, abs=1e-13)
    errs = []
    for N in (50, 100, 200):
        x = np.linspace(0, 1, N + 1)
        w = np.sin(np.pi * x)
        w[-1] = 0.0
        errs.append(abs(energy_E(_st(w, 0 * x)) - math.pi**2 / 4))
        assert energy_V(_st(w, -2.0 * w), 2.0) == pytest.approx(energy_E(_st(w, 0 * x)), rel=1e-13)
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_energy_v_needs_target():
    z = np.zeros(11)
    with pytest.raises(ContractError):
        energy_V(_st(z, z, "plant"), 1.0)


@given(seed=st.integers(0, 2**32 - 1), d=st.floats(0.0, 3.0))
def test_inner_symmetry_and_norm(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 31))
    b = rng.normal(size=(2, 31))
    a[0, 0] = b[0, 0] = 0.0
    sa, sb = _st(a[0], a[1]), _st(b[0], b[1])
    assert x_inner(sa, sb, d) == x_inner(sb, sa, d)
    assert 2.0 * energy_E(sa) == pytest.approx(x_norm(sa) ** 2, rel=1e-14)


def test_equivalence_constants():
    lo, hi = equivalence_bounds(1.0, 1.0)
    assert (lo, hi) == (1.0 / 9.0, 9.0) and constant_K(1.0, 1.0) == 81.0
    lo, hi = equivalence_bounds(1e-6, 1e-3)
    assert lo == 0.5 and hi == 2.0 and constant_K(1e-6, 1e-3) == 4.0


@given(L=st.floats(0.01, 10.0), d=st.floats(0.01, 10.0))
def test_K_at_least_four(L, d):
    assert constant_K(L, d) >= 4.0


@given(seed=st.integers(0, 2**32 - 1), L=st.floats(0.2, 3.0), d=st.floats(0.1, 3.0))
def test_sandwich_random_states(seed, L, d):
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, L, 81)
    pos = np.sin(np.outer(x, np.arange(1, 6)) * np.pi / (2 * L)) @ rng.normal(size=5)
    vel = np.cos(np.outer(x, np.arange(5)) * np.pi / L) @ rng.normal(size=5) * rng.uniform(0.1, 10)
    s = _st(pos, vel, L=L)
    lo, hi = equivalence_bounds(L, d)
    base = 2.0 * energy_E(s)
    twoV = 2.0 * energy_V(s, d)
    assert lo * base <= twoV * (1 + 1e-12) and twoV <= hi * base * (1 + 1e-12)


class _Trace:
    def __init__(self, t, V, d=1.0, L=1.0):
        self.times, self.V, self.E, self.d, self.L = t, V, V, d, L


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 101)
    assert fit_decay(_Trace(t, np.exp(-2 * t))).slope == pytest.approx(-2.0, abs=1e-12)


def test_fit_perturbed_exponential():
    t = np.linspace(0, 5, 201)
    rep = fit_decay(_Trace(t, 3.0 * np.exp(-3 * t) * (1 + 0.01 * np.sin(t))))
    assert abs(rep.slope + 3.0) < 0.02
    assert rep.residual >= 0.0 and rep.K == 81.0


def test_fit_too_few_samples():
    t = np.linspace(0, 1, 5)
    with pytest.raises(FitError):
        fit_decay(_Trace(t, np.exp(-t)))
