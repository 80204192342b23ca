"""Symbolic oracle for the coefficient normalization and the scalar m.

Run:  python3 tests/oracles/coeff_symbolic.py
"""

import sympy as sp

x = sp.symbols("x", real=True)


def normalized_beta(alpha, beta):
    """beta after removing alpha u_x, and the multiplier exp(1/2 int alpha)."""
    t = sp.symbols("t", real=True)
    bt = -sp.diff(alpha, x) / 2 - alpha**2 / 4 + beta
    scale = sp.exp(sp.integrate(alpha.subs(x, t), (t, 0, x)) / 2)
    return sp.simplify(bt), sp.simplify(scale)


def m_scalar(lam, beta, d):
    """m(x) = sinh(Phi)/2 (2 lam + a + a(0)) + cosh(Phi)/2 int_0^x (-lam^2 - beta)."""
    t = sp.symbols("t", real=True)
    a = lam + d
    Phi = sp.integrate(a.subs(x, t), (t, 0, x))
    tail = sp.integrate((-(lam**2) - beta).subs(x, t), (t, 0, x))
    return sp.sinh(Phi) / 2 * (2 * lam + a + a.subs(x, 0)) + sp.cosh(Phi) / 2 * tail


if __name__ == "__main__":
    bt, sc = normalized_beta(x, sp.Integer(0))
    print("beta~ =", bt, " scale(1) =", sp.N(sc.subs(x, 1), 17))
    m = m_scalar(x, sp.Integer(0), 1)
    print("m(1) =", sp.nsimplify(m.subs(x, 1)), "=", sp.N(m.subs(x, 1), 17))
