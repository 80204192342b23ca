"""Frozen oracle values. Each entry records how it was produced.

Regenerate with the scripts in this directory; never from the package.
"""

# kernel_series.series_kernels(0, 0, 1, D=26) at (x, y) = (1, 0.5); equals sinh(1/2)
K_ZERO_PROFILE_1_HALF = 0.52109530549374736

# kernel_series.series_kernels(1/2, 8, 1, D=26) at (1, 0.5); converged to ~1e-8 in D
K_UNSTABLE_1_HALF = -3.752912549768334
S_UNSTABLE_1_HALF = -2.976936166478555

# coeff_symbolic.m_scalar(x, 0, 1) at x = 1: 5 sinh(3/2)/2 - cosh(3/2)/6
M_LAMBDA_X_AT_1 = 4.9311303685298359

# coeff_symbolic.normalized_beta(x, 0): multiplier at x = 1 is e^{1/4}
SCALE_ALPHA_X_AT_1 = 1.2840254166877415

# lambda = beta = 0, d = 1: the series oracle gives k = sinh(y), s = -sinh(y) exactly.
# w(L) for u = sin(pi x / 2), u_t = 0: cosh(1) - int_0^1 sinh(y) sin(pi y / 2) dy (sympy)
W_L_QUARTER_SINE = 1.0980555021030099  # = pi^2 cosh(1) / (4 + pi^2)

# U1 (DD) for u = x, u_t = 0: int_0^1 y sinh(y) dy / cosh(1) = 1 - tanh(1)
U1_DD_LINEAR = 0.23840584404423511
