"""Independent oracle for the kernels when the coefficients are constant.

The Goursat data are entire, so the kernels are entire too. Their Taylor
coefficients at the origin are fixed by matching the PDEs and the data as
polynomial identities up to a total degree D. The resulting linear system is
solved in exact rational arithmetic and the series is summed at a point.

Run:  python3 tests/oracles/kernel_series.py
"""

from fractions import Fraction
from math import factorial

import sympy as sp


def series_kernels(lam, beta, d, D):
    lam, beta, d = (sp.Rational(v) for v in (lam, beta, d))
    a = lam + d
    r1, r2, r3, r4, r5 = 2 * lam + 2 * d, d**2 + beta, 2 * lam * beta + 2 * d * beta, 0, 4 * lam**2 + 4 * d * lam + d**2 + beta
    x, y = sp.symbols("x y")
    idx = [(p, q) for n in range(D + 1) for p in range(n + 1) for q in [n - p]]
    ck = sp.symbols(f"k0:{len(idx)}")
    cs = sp.symbols(f"s0:{len(idx)}")
    K = sum(c * x**p * y**q for c, (p, q) in zip(ck, idx))
    S = sum(c * x**p * y**q for c, (p, q) in zip(cs, idx))
    # diagonal data: m = (sinh(a x)/2)(2 lam + 2 a) + cosh(a x)/2 * (-(lam^2 + beta) x)
    t = sp.symbols("t")
    m = sp.sinh(a * t) / 2 * (2 * lam + 2 * a) + sp.cosh(a * t) / 2 * (-(lam**2 + beta) * t)
    sd = -sp.sinh(a * t)
    mser = sp.Poly(sp.series(m, t, 0, D + 1).removeO(), t)
    sser = sp.Poly(sp.series(sd, t, 0, D + 1).removeO(), t)
    eqs = []
    Rk = sp.Poly(sp.expand(sp.diff(K, x, 2) - sp.diff(K, y, 2) - r1 * sp.diff(S, y, 2) - r2 * K - r3 * S - r4 * sp.diff(S, y)), x, y)
    Rs = sp.Poly(sp.expand(sp.diff(S, x, 2) - sp.diff(S, y, 2) - r1 * K - r5 * S), x, y)
    for R in (Rk, Rs):
        for (p, q), c in zip(R.monoms(), R.coeffs()):
            if p + q <= D - 2:
                eqs.append(c)
    for G, ser in ((K, mser), (S, sser)):
        Pd = sp.Poly(sp.expand(G.subs(y, x)), x)
        for n in range(D + 1):
            eqs.append(Pd.coeff_monomial(x**n) - ser.coeff_monomial(t**n))
        Pb = sp.Poly(sp.expand(G.subs(y, 0)), x)
        for n in range(D + 1):
            eqs.append(Pb.coeff_monomial(x**n))
    sol = sp.solve(eqs, list(ck) + list(cs), dict=True)[0]
    return K.subs(sol), S.subs(sol), (x, y)


if __name__ == "__main__":
    import sys

    D = int(sys.argv[1]) if len(sys.argv) > 1 else 24
    K, S, (x, y) = series_kernels(0, 0, 1, D)
    print(D, sp.N(K.subs({x: 1, y: sp.Rational(1, 2)}), 20), sp.N(S.subs({x: 1, y: sp.Rational(1, 2)}), 20))
