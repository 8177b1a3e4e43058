"""Adaptive multi-model ranking with pairwise stopping and cost-aware allocation."""

import math
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .session import SE_MODES, AbilityEstimate, CATSession, ItemBank, PriorSpec
from .validation import check_count, check_open_interval, check_positive

CONFIDENCE_RULES = ("band", "two-sided")
STOP_REASONS = ("all-confident", "budget-exhausted", "n-max-everywhere", "pool-exhausted")


class ScoreOracle(Protocol):
    def respond(self, model_id: str, item_id: str) -> float: ...


class CallbackOracle:
    """Adapts a plain ``fn(model_id, item_id) -> score`` callable."""

    def __init__(self, fn):
        self.fn = fn

    def respond(self, model_id, item_id):
        return float(self.fn(model_id, item_id))


@dataclass(frozen=True)
class ModelSpec:
    id: str
    cost_per_item: float = 1.0

    def __post_init__(self):
        check_positive(self.cost_per_item, f"cost of model {self.id!r}")


@dataclass(frozen=True)
class RankerConfig:
    gamma: float = 0.95
    n_init: int = 10
    n_max: int = 200
    budget: float = math.inf
    seed: int = 0
    confidence_rule: str = "band"
    se_mode: str = "posterior"

    def __post_init__(self):
        check_open_interval(self.gamma, "gamma", 0.5, 1.0)
        check_count(self.n_init, "n_init", 1)
        check_count(self.n_max, "n_max", self.n_init)
        if not self.budget > 0:
            raise ValueError(f"budget must be > 0, got {self.budget!r}")
        if self.confidence_rule not in CONFIDENCE_RULES:
            raise ValueError(f"confidence_rule must be one of {CONFIDENCE_RULES}")
        if self.se_mode not in SE_MODES:
            raise ValueError(f"se_mode must be one of {SE_MODES}")


@dataclass(frozen=True)
class PairConfidence:
    i: str
    j: str
    p_i_gt_j: float
    confident: bool


@dataclass
class RankingResult:
    order: list
    estimates: dict
    pairs: list
    items_used: dict
    cost_used: dict
    stop_reason: str
    administered: list = field(default_factory=list)
    bank_size: int = 0

    @property
    def ties(self):
        return [(p.i, p.j) for p in self.pairs if not p.confident]

    @property
    def total_items(self):
        return sum(self.items_used.values())

    @property
    def total_cost(self):
        return math.fsum(self.cost_used.values())

    def pair(self, i, j):
        for p in self.pairs:
            if (p.i, p.j) == (i, j):
                return p
            if (p.i, p.j) == (j, i):
                return PairConfidence(i, j, 1.0 - p.p_i_gt_j, p.confident)
        raise KeyError((i, j))

    def to_dict(self):
        return {
            "order": list(self.order),
            "estimates": {m: asdict(e) for m, e in self.estimates.items()},
            "pairs": [asdict(p) for p in self.pairs],
            "ties": [list(t) for t in self.ties],
            "items_used": dict(self.items_used),
            "cost_used": dict(self.cost_used),
            "total_items": self.total_items,
            "total_cost": self.total_cost,
            "stop_reason": self.stop_reason,
            "administered": [list(a) for a in self.administered],
            "bank_size": self.bank_size,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            order=list(d["order"]),
            estimates={m: AbilityEstimate(**e) for m, e in d["estimates"].items()},
            pairs=[PairConfidence(**p) for p in d["pairs"]],
            items_used=dict(d["items_used"]),
            cost_used=dict(d["cost_used"]),
            stop_reason=d["stop_reason"],
            administered=[tuple(a) for a in d["administered"]],
            bank_size=d["bank_size"],
        )


def pairwise_confidence(est_i, est_j):
    """``P(theta_i > theta_j) = Phi((theta_i - theta_j) / sqrt(se_i^2 + se_j^2))``."""
    scale = math.sqrt(est_i.se**2 + est_j.se**2)
    if not scale > 0:
        raise ValueError("standard errors must be positive")
    return float(norm.cdf((est_i.theta_hat - est_j.theta_hat) / scale))


def is_confident(p, config=RankerConfig()):
    """Whether ``p = P(i > j)`` settles the order of a pair.

    ``band`` is confident outside the open interval ``(1 - gamma, gamma)``;
    ``two-sided`` uses the thresholds of a two-sided interval at level gamma.
    """
    gamma = config.gamma
    if config.confidence_rule == "band":
        return p >= gamma or p <= 1.0 - gamma
    tail = (1.0 - gamma) / 2.0
    return p >= 1.0 - tail or p <= tail


def rank_order(estimates, models):
    """Models by descending ability; equal estimates keep ``models`` order."""
    pos = {m: n for n, m in enumerate(models)}
    return sorted(models, key=lambda m: (-estimates[m].theta_hat, pos[m]))


def uncertain_pairs(order, estimates, items_used, config):
    """Adjacent pairs in ``order`` that are not yet confident and both below ``n_max``."""
    if len(order) < 2:
        raise ValueError("need at least 2 models")
    out = []
    for hi, lo in zip(order, order[1:]):
        p = pairwise_confidence(estimates[hi], estimates[lo])
        if is_confident(p, config):
            continue
        if items_used[hi] < config.n_max and items_used[lo] < config.n_max:
            out.append((hi, lo))
    return out


def select_model(candidates, estimates, items_used, costs, remaining_budget=math.inf):
    """Candidate with the largest ``se^2 / ((n + 1) * cost)`` among affordable ones.

    Returns None when no candidate is affordable. Ties go to the earlier candidate.
    """
    best, best_value = None, -math.inf
    for m in candidates:
        if costs[m] > remaining_budget:
            continue
        value = estimates[m].se ** 2 / ((items_used[m] + 1) * costs[m])
        if value > best_value:
            best, best_value = m, value
    return best


def _as_specs(models, costs=None):
    specs = []
    for m in models:
        if isinstance(m, ModelSpec):
            specs.append(m)
        else:
            c = 1.0 if costs is None else costs.get(m, 1.0)
            specs.append(ModelSpec(str(m), float(c)))
    ids = [s.id for s in specs]
    if len(ids) < 2:
        raise ValueError("ranking needs at least 2 models")
    if len(set(ids)) != len(ids):
        raise ValueError("model ids must be unique")
    return specs


def _as_bank(bank, k=None):
    if isinstance(bank, ItemBank):
        return bank
    from .calibration import CalibrationArtifact

    if isinstance(bank, CalibrationArtifact):
        return ItemBank.from_artifact(bank)
    if k is None:
        raise ValueError("k is required when the bank is a list of items")
    return ItemBank(bank, k)


class _Run:
    """Bookkeeping shared by the ranking procedures."""

    def __init__(self, specs, bank, oracle, config, prior=None):
        self.ids = [s.id for s in specs]
        self.costs = {s.id: s.cost_per_item for s in specs}
        self.bank = bank
        self.oracle = oracle
        self.config = config
        prior = bank.default_prior() if prior is None else prior
        self.sessions = {m: CATSession(bank, prior, m) for m in self.ids}
        self.items_used = dict.fromkeys(self.ids, 0)
        self.cost_used = dict.fromkeys(self.ids, 0.0)
        self.spent = 0.0
        self.log = []

    def check_warmup(self, n):
        warmup = 0.0
        for m in self.ids:
            for _ in range(n):
                warmup += self.costs[m]
        if warmup > self.config.budget:
            raise ValueError(
                f"budget below warm-up cost: budget {self.config.budget} < {warmup}"
            )
        if self.bank.n_active < n:
            raise ValueError(f"active bank has {self.bank.n_active} items, need {n}")

    def remaining_budget(self):
        return self.config.budget - self.spent

    def administer(self, m, item=None):
        session = self.sessions[m]
        item = session.select_item() if item is None else item
        y = float(self.oracle.respond(m, item))
        session.record_response(item, y)
        self.items_used[m] += 1
        self.cost_used[m] += self.costs[m]
        self.spent += self.costs[m]
        self.log.append((m, item, y))

    def estimates(self):
        return {m: s.estimate(self.config.se_mode) for m, s in self.sessions.items()}

    def result(self, stop_reason):
        est = self.estimates()
        order = rank_order(est, self.ids)
        pairs = []
        for a in range(len(order)):
            for b in range(a + 1, len(order)):
                p = pairwise_confidence(est[order[a]], est[order[b]])
                pairs.append(PairConfidence(order[a], order[b], p, is_confident(p, self.config)))
        return RankingResult(
            order=order,
            estimates=est,
            pairs=pairs,
            items_used=dict(self.items_used),
            cost_used=dict(self.cost_used),
            stop_reason=stop_reason,
            administered=list(self.log),
            bank_size=len(self.bank),
        )


def run_ranker(models, bank, oracle, config=RankerConfig(), *, k=None, costs=None, prior=None):
    """Rank ``models`` adaptively, querying ``oracle`` for one item at a time.

    Every model first gets ``n_init`` maximum-information items. Afterwards
    each step picks, among members of not-yet-confident adjacent pairs, the
    model with the best uncertainty-per-cost value and gives it its most
    informative remaining item. Stops when no adjacent pair is uncertain,
    the budget cannot pay for any candidate, or candidate pools run dry.
    """
    specs = _as_specs(models, costs)
    run = _Run(specs, _as_bank(bank, k), oracle, config, prior)
    run.check_warmup(config.n_init)
    for m in run.ids:
        for _ in range(config.n_init):
            run.administer(m)

    exhausted = set()
    while True:
        est = run.estimates()
        order = rank_order(est, run.ids)
        pending = uncertain_pairs(order, est, run.items_used, config)
        if not pending:
            confident = all(
                is_confident(pairwise_confidence(est[a], est[b]), config)
                for a, b in zip(order, order[1:])
            )
            stop = "all-confident" if confident else "n-max-everywhere"
            break
        candidates = [m for m in run.ids if any(m in pair for pair in pending)]
        candidates = [m for m in candidates if m not in exhausted]
        if not candidates:
            stop = "pool-exhausted"
            break
        m = select_model(candidates, est, run.items_used, run.costs, run.remaining_budget())
        if m is None:
            stop = "budget-exhausted"
            break
        if run.sessions[m].n_remaining == 0:
            exhausted.add(m)
            continue
        run.administer(m)
    return run.result(stop)


def run_random_baseline(models, bank, oracle, config=RankerConfig(), *, k=None, costs=None,
                        prior=None):
    """Spend the budget on uniformly random (affordable model, unseen item) draws."""
    specs = _as_specs(models, costs)
    run = _Run(specs, _as_bank(bank, k), oracle, config, prior)
    run.check_warmup(config.n_init)
    rng = np.random.default_rng(config.seed)
    while True:
        open_models = [m for m in run.ids if run.items_used[m] < config.n_max]
        stocked = [m for m in open_models if run.sessions[m].n_remaining > 0]
        eligible = [m for m in stocked if run.costs[m] <= run.remaining_budget()]
        if not eligible:
            if not open_models:
                stop = "n-max-everywhere"
            elif not stocked:
                stop = "pool-exhausted"
            else:
                stop = "budget-exhausted"
            break
        m = eligible[int(rng.integers(len(eligible)))]
        pool = np.flatnonzero(run.sessions[m].remaining)
        run.administer(m, run.bank.ids[int(pool[rng.integers(len(pool))])])
    return run.result(stop)


def run_fixed_length(models, bank, oracle, n, config=RankerConfig(), *, k=None, costs=None,
                     prior=None):
    """Give every model exactly ``n`` maximum-information items; no early stopping."""
    bank = _as_bank(bank, k)
    check_count(n, "n", 1)
    if n > bank.n_active:
        raise ValueError(f"n={n} exceeds the active pool of {bank.n_active} items")
    specs = _as_specs(models, costs)
    run = _Run(specs, bank, oracle, config, prior)
    for m in run.ids:
        for _ in range(n):
            run.administer(m)
    return run.result("n-max-everywhere")


class _RankerBase(BaseEstimator):
    def _config(self):
        return RankerConfig(
            gamma=self.gamma,
            n_init=self.n_init,
            n_max=self.n_max,
            budget=self.budget,
            seed=self.seed,
            confidence_rule=self.confidence_rule,
            se_mode=self.se_mode,
        )

    def predict(self):
        """Predicted order, best model first."""
        check_is_fitted(self, "result_")
        return list(self.result_.order)

    def score(self, true_order):
        """Kendall's tau between the fitted order and ``true_order``."""
        from .evaluation import kendall_tau

        return kendall_tau(self.predict(), true_order)


class AdaptiveRanker(_RankerBase):
    """Estimator facade over :func:`run_ranker`.

    ``fit(bank, oracle, models, costs=None)`` stores a :class:`RankingResult`
    in ``result_``; ``predict()`` returns the order.
    """

    def __init__(self, gamma=0.95, n_init=10, n_max=200, budget=math.inf, seed=0,
                 confidence_rule="band", se_mode="posterior"):
        self.gamma = gamma
        self.n_init = n_init
        self.n_max = n_max
        self.budget = budget
        self.seed = seed
        self.confidence_rule = confidence_rule
        self.se_mode = se_mode

    def fit(self, bank, oracle, models, costs=None):
        self.result_ = run_ranker(models, bank, oracle, self._config(), costs=costs)
        return self


class RandomBaselineRanker(AdaptiveRanker):
    """Random allocation under the same budget; see :func:`run_random_baseline`."""

    def fit(self, bank, oracle, models, costs=None):
        self.result_ = run_random_baseline(models, bank, oracle, self._config(), costs=costs)
        return self


class FixedLengthRanker(_RankerBase):
    """Fixed-length CAT with ``n_items`` items per model; see :func:`run_fixed_length`."""

    def __init__(self, n_items=50, gamma=0.95, confidence_rule="band", se_mode="posterior"):
        self.n_items = n_items
        self.gamma = gamma
        self.confidence_rule = confidence_rule
        self.se_mode = se_mode

    def _config(self):
        return RankerConfig(
            gamma=self.gamma, n_init=1, n_max=max(self.n_items, 1),
            confidence_rule=self.confidence_rule, se_mode=self.se_mode,
        )

    def fit(self, bank, oracle, models, costs=None):
        self.result_ = run_fixed_length(models, bank, oracle, self.n_items, self._config(),
                                        costs=costs)
        return self
