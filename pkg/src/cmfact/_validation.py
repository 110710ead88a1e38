"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np

from .exceptions import DimensionError


def check_matrix(M, name="M", ndim=2, dtype=complex, allow_empty=False):
    """Return ``M`` as a finite ndarray of the requested dtype and rank.

    Raises
    ------
    DimensionError
        If ``M`` does not have ``ndim`` dimensions or is empty.
    ValueError
        If ``M`` contains NaN or Inf.
    """
    arr = np.asarray(M)
    if dtype is float and np.iscomplexobj(arr):
        raise TypeError(f"{name} must be real, got complex values")
    arr = arr.astype(dtype, copy=False)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise DimensionError(f"{name} is empty (shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise DimensionError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_rf_dims(n_t, n_s, n_rf):
    """Enforce ``N_s <= N_rf <= N_t``."""
    if not n_s <= n_rf <= n_t:
        raise DimensionError(
            f"need N_s <= N_rf <= N_t, got N_s={n_s}, N_rf={n_rf}, N_t={n_t}"
        )


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator`` (PCG64)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
