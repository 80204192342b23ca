"""Small input-checking helpers."""

import numbers

import numpy as np

from .exceptions import ContractError, ParameterError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ParameterError(f"{name} must be a finite real, got {value!r}")
    if strict and value <= 0:
        raise ParameterError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ParameterError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_vector(arr, name, size=None):
    """Return ``arr`` as a finite 1-D float array, optionally of a given size."""
    out = np.asarray(arr, dtype=float)
    if out.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {out.shape}")
    if size is not None and out.size != size:
        raise ContractError(f"{name} must have {size} entries, got {out.size}")
    if not np.all(np.isfinite(out)):
        raise ContractError(f"{name} contains non-finite values")
    return out


def check_case(case):
    c = str(case).upper()
    if c not in ("DD", "DN"):
        raise ParameterError(f"case must be 'DD' or 'DN', got {case!r}")
    return c
