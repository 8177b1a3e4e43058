"""Item difficulty, noise and item-filter estimation from historical scores."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .irt import discrimination_from_noise, logistic_mean
from .matrix import ScoreMatrix
from .validation import check_open_interval, check_score_array

DEFAULT_EPSILON = 0.01
K_FLOOR = 1e-6


@dataclass(frozen=True)
class NormalizationTransform:
    """Affine map of ``[lo, hi]`` onto ``[epsilon, 1 - epsilon]``; inputs outside clamp."""

    lo: float
    hi: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError(f"normalization needs hi > lo, got lo={self.lo}, hi={self.hi}")
        check_open_interval(self.epsilon, "epsilon", 0.0, 0.5)

    def __call__(self, values):
        x = np.clip(np.asarray(values, dtype=float), self.lo, self.hi)
        out = self.epsilon + (x - self.lo) / (self.hi - self.lo) * (1.0 - 2.0 * self.epsilon)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ItemParams:
    id: str
    b: float
    active: bool = True
    correlation: float = 0.0
    # per-item noise; None means the bank's global k
    k: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.b):
            raise ValueError(f"item {self.id!r} has non-finite difficulty")
        if self.k is not None and not self.k > 0:
            raise ValueError(f"item {self.id!r} has non-positive k")


@dataclass(frozen=True)
class CalibrationArtifact:
    items: tuple
    k: float
    a: float
    transform: NormalizationTransform
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise ValueError(f"k must be > 0, got {self.k}")
        if abs(self.a - discrimination_from_noise(self.k)) > 1e-12:
            raise ValueError("a must equal 1/sqrt(k)")
        object.__setattr__(self, "items", tuple(self.items))
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("item ids must be unique")
        for it in self.items:
            if it.active != (it.correlation >= 0):
                raise ValueError(f"item {it.id!r}: active flag disagrees with correlation")

    @property
    def active_items(self):
        return tuple(it for it in self.items if it.active)

    @property
    def difficulties(self):
        return {it.id: it.b for it in self.items}


def _as_matrix(matrix):
    if isinstance(matrix, ScoreMatrix):
        return matrix
    arr = check_score_array(matrix)
    return ScoreMatrix(
        tuple(f"m{j}" for j in range(arr.shape[0])),
        tuple(f"i{i}" for i in range(arr.shape[1])),
        arr,
    )


def estimate_item_means(matrix):
    """Mean observed score per item."""
    counts = matrix.observed.sum(axis=0)
    empty = [matrix.items[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise ValueError(f"item {empty[0]!r} has no observed scores")
    means = np.nanmean(matrix.scores, axis=0)
    return dict(zip(matrix.items, means.tolist()))


def fit_normalization(values, epsilon=DEFAULT_EPSILON):
    values = np.asarray(list(values), dtype=float)
    if values.size < 2:
        raise ValueError("normalization needs at least 2 values")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        raise ValueError("degenerate score range: all values identical")
    return NormalizationTransform(lo, hi, epsilon)


def estimate_difficulties(p_hat, transform):
    """``b_i = log((1 - p) / p)`` on normalized item means; easy items get negative b."""
    keys = list(p_hat)
    p = np.asarray(transform([p_hat[key] for key in keys]), dtype=float)
    return dict(zip(keys, (-logit(p)).tolist()))


def estimate_abilities(matrix, transform):
    """``theta_j = logit(transform(mean score of model j))``."""
    counts = matrix.observed.sum(axis=1)
    empty = [matrix.models[j] for j in np.flatnonzero(counts == 0)]
    if empty:
        raise ValueError(f"model {empty[0]!r} has no observed scores")
    y_bar = np.nanmean(matrix.scores, axis=1)
    p = np.clip(transform(y_bar), transform.epsilon, 1.0 - transform.epsilon)
    return dict(zip(matrix.models, logit(p).tolist()))


def _cell_means(matrix, b, theta):
    b_vec = np.array([b[i] for i in matrix.items])
    theta_vec = np.array([theta[m] for m in matrix.models])
    return logistic_mean(theta_vec[:, None], b_vec[None, :])


def estimate_noise(matrix, b, theta):
    """Method-of-moments noise ``k = sum (y - mu)^2 / sum mu (1 - mu)`` over observed cells."""
    obs = matrix.observed
    if not obs.any():
        raise ValueError("cannot estimate k from an empty score matrix")
    mu = _cell_means(matrix, b, theta)[obs]
    y = matrix.scores[obs]
    k = float(np.sum((y - mu) ** 2) / np.sum(mu * (1.0 - mu)))
    if k < K_FLOOR:
        warnings.warn(f"estimated k={k:.3g} below floor; using {K_FLOOR}", stacklevel=2)
        k = K_FLOOR
    return k


def filter_items(matrix, theta):
    """Pearson correlation of each item's scores with model ability.

    Returns ``item -> (correlation, active)``. Items with fewer than 3 paired
    observations or zero variance on either side keep ``active=True`` and
    record correlation 0.
    """
    theta_vec = np.array([theta[m] for m in matrix.models])
    out = {}
    for i, item in enumerate(matrix.items):
        col = matrix.scores[:, i]
        mask = ~np.isnan(col)
        r = 0.0
        if mask.sum() >= 3:
            y, t = col[mask], theta_vec[mask]
            dy, dt = y - y.mean(), t - t.mean()
            denom = np.sqrt(np.sum(dy * dy) * np.sum(dt * dt))
            if denom > 0:
                r = float(np.clip(np.sum(dy * dt) / denom, -1.0, 1.0))
        out[item] = (r, r >= 0)
    return out


def calibrate(matrix, epsilon=DEFAULT_EPSILON, metadata=None):
    """Run the full estimation pipeline and return a :class:`CalibrationArtifact`."""
    matrix = _as_matrix(matrix)
    if len(matrix.models) < 2 or len(matrix.items) < 2:
        raise ValueError("calibration needs at least 2 models and 2 items")
    p_hat = estimate_item_means(matrix)
    transform = fit_normalization(p_hat.values(), epsilon)
    b = estimate_difficulties(p_hat, transform)
    theta = estimate_abilities(matrix, transform)
    k = estimate_noise(matrix, b, theta)
    filt = filter_items(matrix, theta)
    items = tuple(
        ItemParams(id=i, b=b[i], active=filt[i][1], correlation=filt[i][0]) for i in matrix.items
    )
    meta = {"n_models": len(matrix.models), "n_items": len(matrix.items)}
    meta.update(metadata or {})
    return CalibrationArtifact(
        items=items, k=k, a=discrimination_from_noise(k), transform=transform, metadata=meta
    )


class ContinuousIRTCalibrator(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`calibrate`.

    ``fit`` takes a :class:`ScoreMatrix` or a models x items array with NaN for
    missing cells. ``transform`` maps score rows of (possibly new) models to
    abilities on the calibrated logit scale.

    Attributes set by ``fit``: ``artifact_``, ``difficulties_``, ``k_``, ``a_``,
    ``correlations_``, ``active_``, ``abilities_``, ``transform_``.
    """

    def __init__(self, epsilon=DEFAULT_EPSILON):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        matrix = _as_matrix(X)
        art = calibrate(matrix, self.epsilon)
        self.artifact_ = art
        self.items_ = np.array(matrix.items, dtype=object)
        self.difficulties_ = np.array([it.b for it in art.items])
        self.correlations_ = np.array([it.correlation for it in art.items])
        self.active_ = np.array([it.active for it in art.items])
        self.k_ = art.k
        self.a_ = art.a
        self.transform_ = art.transform
        self.abilities_ = np.array(list(estimate_abilities(matrix, art.transform).values()))
        return self

    def transform(self, X):
        check_is_fitted(self, "artifact_")
        scores = X.scores if isinstance(X, ScoreMatrix) else check_score_array(X)
        if scores.shape[1] != len(self.items_):
            raise ValueError(f"expected {len(self.items_)} item columns, got {scores.shape[1]}")
        y_bar = np.nanmean(scores, axis=1)
        eps = self.transform_.epsilon
        return logit(np.clip(self.transform_(y_bar), eps, 1.0 - eps))
