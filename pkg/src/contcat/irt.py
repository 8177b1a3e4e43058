"""Heteroskedastic normal response model for continuous scores in [0, 1].

Scores follow ``N(mu, k * mu * (1 - mu))`` where ``mu`` is the 1PL logistic
curve in ``theta - b``. All functions accept scalars or numpy arrays and
broadcast like ufuncs.
"""

import numpy as np
from scipy.special import expit

MU_CLAMP = 1e-9
_LOG_2PI = float(np.log(2.0 * np.pi))


def _check_positive(value, name):
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def logistic_mean(theta, b):
    """Expected score ``1 / (1 + exp(-(theta - b)))``."""
    return _scalar(expit(np.subtract(theta, b, dtype=float)))


def response_variance(mu, k):
    _check_positive(k, "k")
    mu = np.asarray(mu, dtype=float)
    if np.any((mu < 0) | (mu > 1)):
        raise ValueError("mu must lie in [0, 1]")
    return _scalar(k * mu * (1.0 - mu))


def fisher_information(theta, b, k):
    """Information ``mu * (1 - mu) / k`` carried by one item about ``theta``."""
    _check_positive(k, "k")
    mu = logistic_mean(theta, b)
    return _scalar(np.asarray(mu) * (1.0 - np.asarray(mu)) / np.asarray(k, dtype=float))


def binary_fisher_information(theta, a, b):
    """Binary 1PL information ``a^2 * P * (1 - P)``.

    ``P`` is the logistic curve in ``theta - b`` and ``a`` enters only as the
    squared prefactor, so ``binary_fisher_information(theta, a, b)`` equals
    ``fisher_information(theta, b, 1 / a**2)`` exactly.
    """
    _check_positive(a, "a")
    p = np.asarray(logistic_mean(theta, b))
    return _scalar(np.asarray(a, dtype=float) ** 2 * p * (1.0 - p))


def log_likelihood(y, theta, b, k):
    """Log normal density of score ``y`` given ability ``theta``.

    ``mu`` is clamped to ``[1e-9, 1 - 1e-9]`` so the variance never vanishes.
    """
    _check_positive(k, "k")
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)) or np.any(np.isnan(y)):
        raise ValueError("score must lie in [0, 1]")
    mu = np.clip(np.asarray(logistic_mean(theta, b)), MU_CLAMP, 1.0 - MU_CLAMP)
    var = np.asarray(k, dtype=float) * mu * (1.0 - mu)
    return _scalar(-0.5 * (_LOG_2PI + np.log(var)) - 0.5 * (y - mu) ** 2 / var)


def discrimination_from_noise(k):
    """Equivalent 1PL discrimination ``a = 1 / sqrt(k)``."""
    _check_positive(k, "k")
    return _scalar(1.0 / np.sqrt(np.asarray(k, dtype=float)))


def noise_from_discrimination(a):
    _check_positive(a, "a")
    return _scalar(1.0 / np.asarray(a, dtype=float) ** 2)
