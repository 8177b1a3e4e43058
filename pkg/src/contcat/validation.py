"""Input checks shared by the estimators and the CLI."""

import numbers

import numpy as np


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite number > 0, got {value!r}")
    return float(value)


def check_open_interval(value, name, lo, hi):
    if not isinstance(value, numbers.Real) or not lo < value < hi:
        raise ValueError(f"{name} must lie in ({lo}, {hi}), got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_unique(ids, what):
    ids = [str(i) for i in ids]
    seen = set()
    for i in ids:
        if i in seen:
            raise ValueError(f"duplicate {what} id {i!r}")
        seen.add(i)
    return ids


def check_score_array(values, *, allow_nan=True):
    """Return ``values`` as a 2-D float array with entries in [0, 1] (NaN = missing)."""
    arr = np.array(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D score array, got shape {arr.shape}")
    if np.isinf(arr).any():
        raise ValueError("scores must be finite")
    if not allow_nan and np.isnan(arr).any():
        raise ValueError("score array has missing entries")
    obs = arr[~np.isnan(arr)]
    if obs.size and (obs.min() < 0 or obs.max() > 1):
        raise ValueError("scores must lie in [0, 1]")
    return arr
