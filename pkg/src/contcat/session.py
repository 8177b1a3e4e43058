"""Single-model adaptive testing on a discretized ability posterior."""

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationArtifact, ItemParams
from .irt import fisher_information, log_likelihood
from .validation import check_count, check_positive

GRID_SIZE = 1001
GRID_BOUNDS = (-10.0, 10.0)
PRIOR_VARIANCE = 25.0
SE_MODES = ("posterior", "fisher")


class PoolExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    mean: float
    variance: float = PRIOR_VARIANCE

    def __post_init__(self):
        if not np.isfinite(self.mean):
            raise ValueError("prior mean must be finite")
        check_positive(self.variance, "prior variance")


@dataclass(frozen=True)
class AbilityEstimate:
    theta_hat: float
    se: float
    n_items: int
    mode: str = "posterior"


class ItemBank:
    """Item difficulties and per-item noise as parallel arrays.

    Bank order is the canonical item order: selection ties go to the item
    that appears first.
    """

    def __init__(self, items, k):
        items = tuple(items)
        if not items:
            raise ValueError("item bank is empty")
        self.k = check_positive(k, "k")
        self.items = items
        self.ids = tuple(it.id for it in items)
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("item ids must be unique")
        self.b = np.array([it.b for it in items], dtype=float)
        self.item_k = np.array([self.k if it.k is None else it.k for it in items], dtype=float)
        self.active = np.array([it.active for it in items], dtype=bool)
        self._index = {item_id: i for i, item_id in enumerate(self.ids)}

    @classmethod
    def from_artifact(cls, artifact: CalibrationArtifact):
        return cls(artifact.items, artifact.k)

    @classmethod
    def from_difficulties(cls, b, k, ids=None):
        ids = [f"i{i}" for i in range(len(b))] if ids is None else list(ids)
        return cls([ItemParams(str(i), float(x)) for i, x in zip(ids, b)], k)

    def __len__(self):
        return len(self.ids)

    @property
    def n_active(self):
        return int(self.active.sum())

    def index(self, item_id):
        try:
            return self._index[item_id]
        except KeyError:
            raise KeyError(f"item {item_id!r} is not in the bank") from None

    def default_prior(self):
        return PriorSpec(float(np.median(self.b[self.active])), PRIOR_VARIANCE)


class PosteriorGrid:
    """Log-weights over an equally spaced ability grid."""

    def __init__(self, prior: PriorSpec, size=GRID_SIZE, bounds=GRID_BOUNDS):
        check_count(size, "grid size", 3)
        self.grid = np.linspace(bounds[0], bounds[1], size)
        self.log_weights = -0.5 * (self.grid - prior.mean) ** 2 / prior.variance
        self._normalize()

    def _normalize(self):
        self.log_weights -= self.log_weights.max()
        w = np.exp(self.log_weights)
        self.weights = w / w.sum()
        self.mean = float(self.weights @ self.grid)
        self.sd = float(np.sqrt(self.weights @ (self.grid - self.mean) ** 2))

    def update(self, loglik):
        self.log_weights = self.log_weights + loglik
        self._normalize()


class CATSession:
    """Adaptive test state for one model.

    Items are drawn without replacement from the active part of ``bank`` by
    maximum Fisher information at the posterior mean. ``estimate`` reports
    the posterior mean with either the posterior sd or the Fisher standard
    error ``1 / sqrt(1 / prior_var + sum I_i)``.
    """

    def __init__(self, bank: ItemBank, prior: PriorSpec | None = None, model_id=None,
                 grid_size=GRID_SIZE):
        if bank.n_active == 0:
            raise ValueError("item bank has no active items")
        self.bank = bank
        self.model_id = model_id
        self.prior = bank.default_prior() if prior is None else prior
        self.posterior = PosteriorGrid(self.prior, grid_size)
        self.remaining = bank.active.copy()
        self.administered = []
        self.fisher_sum = 0.0

    @property
    def n_items(self):
        return len(self.administered)

    @property
    def theta_hat(self):
        return self.posterior.mean

    @property
    def n_remaining(self):
        return int(self.remaining.sum())

    def remaining_ids(self):
        return [self.bank.ids[i] for i in np.flatnonzero(self.remaining)]

    def item_information(self, theta=None):
        theta = self.theta_hat if theta is None else theta
        return fisher_information(theta, self.bank.b, self.bank.item_k)

    def select_item(self):
        """Remaining item with maximal information at the current estimate."""
        if not self.remaining.any():
            raise PoolExhausted(f"item pool exhausted for model {self.model_id!r}")
        info = np.where(self.remaining, self.item_information(), -np.inf)
        return self.bank.ids[int(np.argmax(info))]

    def record_response(self, item_id, score):
        idx = self.bank.index(item_id)
        if not self.remaining[idx]:
            state = "inactive" if not self.bank.active[idx] else "already administered"
            raise ValueError(f"item {item_id!r} is {state} for model {self.model_id!r}")
        b, k = self.bank.b[idx], self.bank.item_k[idx]
        self.posterior.update(log_likelihood(score, self.posterior.grid, b, k))
        self.remaining[idx] = False
        self.administered.append((item_id, float(score)))
        self.fisher_sum += fisher_information(self.theta_hat, b, k)
        return self

    def estimate(self, mode="posterior"):
        if mode == "posterior":
            se = self.posterior.sd
        elif mode == "fisher":
            se = 1.0 / np.sqrt(1.0 / self.prior.variance + self.fisher_sum)
        else:
            raise ValueError(f"unknown SE mode {mode!r}; expected one of {SE_MODES}")
        return AbilityEstimate(self.theta_hat, float(se), self.n_items, mode)


def init_session(bank, k=None, prior=None, model_id=None):
    """Start a session; ``bank`` may be an :class:`ItemBank`, an artifact or a list of items."""
    if isinstance(bank, CalibrationArtifact):
        bank = ItemBank.from_artifact(bank)
    elif not isinstance(bank, ItemBank):
        if k is None:
            raise ValueError("k is required when the bank is a list of items")
        bank = ItemBank(bank, k)
    return CATSession(bank, prior, model_id)
