"""Input validation helpers shared by the estimators and the harness."""

import math
from numbers import Integral

import numpy as np
from sklearn.utils import check_array

SIMPLEX_ATOL = 1e-9


def check_loss_vector(loss, n_actions=None, name="loss"):
    """Return ``loss`` as a 1-D float array with entries in [0, 1]."""
    arr = np.asarray(loss, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if n_actions is not None and arr.shape[0] != n_actions:
        raise ValueError(f"{name} has {arr.shape[0]} entries, expected {n_actions}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return arr


def check_loss_matrix(losses, n_actions=None):
    """Validate a (T, N) loss matrix with entries in [0, 1]."""
    arr = check_array(losses, dtype=np.float64, ensure_2d=True)
    if n_actions is not None and arr.shape[1] != n_actions:
        raise ValueError(f"loss matrix has {arr.shape[1]} columns, expected {n_actions}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("losses must lie in [0, 1]")
    return arr


def as_simplex(z, atol=SIMPLEX_ATOL):
    """Validate a probability vector and renormalize it.

    Entries must be non-negative and sum to one within ``atol``; the sum is
    then rescaled to exactly one so that rounding does not drift across rounds.
    """
    arr = np.asarray(z, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("a simplex point must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
        raise ValueError("simplex entries must be finite and non-negative")
    total = arr.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"simplex entries sum to {total!r}, not 1")
    return arr / total


def is_power_of_two(T):
    return isinstance(T, Integral) and T >= 1 and (T & (T - 1)) == 0


def check_horizon(T, power_of_two=True):
    if not isinstance(T, Integral) or T < 1:
        raise ValueError(f"horizon must be a positive integer, got {T!r}")
    if power_of_two and not is_power_of_two(T):
        raise ValueError(f"horizon must be a power of two, got {T}")
    return int(T)


def check_Z(Z):
    if not (0.0 < Z <= 1.0 / math.e):
        raise ValueError(f"Z must lie in (0, 1/e], got {Z!r}")
    return float(Z)


def check_switching_cost(D):
    if not (D >= 1.0 and math.isfinite(D)):
        raise ValueError(f"switching cost D must be >= 1, got {D!r}")
    return float(D)


def as_generator(rng):
    """Turn a seed or ``Generator`` into a ``numpy.random.Generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
