"""Finite-difference stencils and quadrature weights on uniform grids."""

import numpy as np


def first_derivative(f, h):
    """Central differences inside, 3-point one-sided at both ends (second order)."""
    return np.gradient(f, h, edge_order=2)


def second_derivative(f, h):
    """Central second difference inside, 4-point one-sided at both ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    if f.size >= 4:
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
        out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return out


def backward_derivative(f, h):
    """Derivative at every node from the current and previous nodes.

    Second order (3-point) from node 2 on, first order at node 1 and a
    forward difference at node 0. Only data to the left is used, which keeps
    operators built from it lower triangular.
    """
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[0] = (f[1] - f[0]) / h
    out[1] = (f[1] - f[0]) / h
    out[2:] = (3.0 * f[2:] - 4.0 * f[1:-1] + f[:-2]) / (2.0 * h)
    return out


def trapezoid_weights(n, h):
    """Composite trapezoid weights for n+1 equally spaced nodes."""
    w = np.full(n + 1, h)
    if n == 0:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * h
    return w


def cumulative_trapezoid(f, h):
    """Running trapezoid integral starting at 0."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]))
    return out


def triangle_weights(n, h):
    """Lower-triangular matrix W with W[i, :i+1] the trapezoid weights on [0, x_i]."""
    W = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        W[i, : i + 1] = h
        W[i, 0] = W[i, i] = 0.5 * h
    return W
