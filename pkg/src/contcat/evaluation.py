"""Ground truth, ranking-quality metrics, synthetic data and conformance checks."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau

from .calibration import CalibrationArtifact, estimate_abilities
from .irt import logistic_mean
from .matrix import ScoreMatrix
from .ranker import RankerConfig, run_fixed_length
from .validation import check_count, check_open_interval, check_positive


class MatrixOracle:
    """Replays recorded scores; a missing cell is an error."""

    def __init__(self, matrix: ScoreMatrix):
        self.matrix = matrix
        self._row = {m: j for j, m in enumerate(matrix.models)}
        self._col = {i: n for n, i in enumerate(matrix.items)}

    def respond(self, model_id, item_id):
        try:
            y = self.matrix.scores[self._row[model_id], self._col[item_id]]
        except KeyError as exc:
            raise KeyError(f"no score for model {model_id!r}, item {item_id!r}") from exc
        if np.isnan(y):
            raise KeyError(f"no score for model {model_id!r}, item {item_id!r}")
        return float(y)


@dataclass(frozen=True)
class GroundTruth:
    order: list
    means: dict
    gt_ties: frozenset = frozenset()
    exact_ties: tuple = ()


@dataclass
class EvalReport:
    tau: float
    adapt_tie_pct: float
    gt_tie_pct: float
    tie_precision: float
    tie_recall: float
    tie_f1: float
    confident_accuracy: float | None
    items_pct: float
    cost_total: float
    counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "tau": self.tau,
            "adapt_tie_pct": self.adapt_tie_pct,
            "gt_tie_pct": self.gt_tie_pct,
            "tie_precision": self.tie_precision,
            "tie_recall": self.tie_recall,
            "tie_f1": self.tie_f1,
            "confident_accuracy": self.confident_accuracy,
            "items_pct": self.items_pct,
            "cost_total": self.cost_total,
            "counts": dict(self.counts),
        }


def _pair(i, j):
    return frozenset((i, j))


def ground_truth_ranking(matrix, models=None):
    """Order models by mean score over all items; equal means keep matrix order."""
    if models is not None:
        matrix = matrix.select_models(models)
    missing = matrix.missing_cells()
    if missing:
        shown = ", ".join(f"({m}, {i})" for m, i in missing[:5])
        more = f" and {len(missing) - 5} more" if len(missing) > 5 else ""
        raise ValueError(f"ground truth needs complete rows; missing cells: {shown}{more}")
    means = dict(zip(matrix.models, matrix.scores.mean(axis=1).tolist()))
    pos = {m: n for n, m in enumerate(matrix.models)}
    order = sorted(matrix.models, key=lambda m: (-means[m], pos[m]))
    exact = tuple(
        (a, b) for n, a in enumerate(order) for b in order[n + 1:] if means[a] == means[b]
    )
    return GroundTruth(order=order, means=means, exact_ties=exact)


def bootstrap_ties(matrix, n_boot=1000, level=0.95, seed=0, models=None):
    """Pairs whose paired-bootstrap percentile interval of the mean difference covers 0.

    Items are resampled with replacement, the same indices for every model.
    """
    if models is not None:
        matrix = matrix.select_models(models)
    n_boot = check_count(n_boot, "n_boot", 100)
    check_open_interval(level, "level", 0.0, 1.0)
    if matrix.missing_cells():
        raise ValueError("bootstrap needs a complete score matrix")
    rng = np.random.default_rng(seed)
    n_items = matrix.shape[1]
    idx = rng.integers(0, n_items, size=(n_boot, n_items))
    boot_means = np.stack([row[idx].mean(axis=1) for row in matrix.scores])
    q = [50.0 * (1.0 - level), 50.0 * (1.0 + level)]
    ties = set()
    models = matrix.models
    for a in range(len(models)):
        for b in range(a + 1, len(models)):
            lo, hi = np.percentile(boot_means[a] - boot_means[b], q)
            if lo <= 0.0 <= hi:
                ties.add(_pair(models[a], models[b]))
    return frozenset(ties)


def ground_truth(matrix, models=None, n_boot=1000, level=0.95, seed=0):
    gt = ground_truth_ranking(matrix, models)
    ties = bootstrap_ties(matrix, n_boot, level, seed, models=gt.order if models else None)
    return GroundTruth(gt.order, gt.means, ties, gt.exact_ties)


def kendall_tau(pred_order, true_order):
    """Kendall's tau-b between two orders over the same ids (best first)."""
    pred_order, true_order = list(pred_order), list(true_order)
    if sorted(map(str, pred_order)) != sorted(map(str, true_order)) or len(
        set(pred_order)
    ) != len(pred_order):
        raise ValueError("orders must contain the same distinct ids")
    if len(pred_order) < 2:
        raise ValueError("need at least 2 ids")
    rank = {m: n for n, m in enumerate(true_order)}
    tau = kendalltau(np.arange(len(pred_order)), [rank[m] for m in pred_order]).statistic
    return float(tau)


def tie_metrics(result, gt):
    """Tie precision/recall/F1 and accuracy of confident calls against ground truth.

    A confident call on a pair that the ground truth counts as tied is scored
    as wrong. Precision is 1 with no predicted ties, recall is 1 with no true
    ties; F1 is 1 when both sets are empty.
    """
    if set(result.order) != set(gt.order):
        raise ValueError("result and ground truth cover different models")
    rank = {m: n for n, m in enumerate(gt.order)}
    pred_ties = {_pair(i, j) for i, j in result.ties}
    tp = fp = fn = tn = correct = confident = 0
    for p in result.pairs:
        key = _pair(p.i, p.j)
        in_gt = key in gt.gt_ties
        if not p.confident:
            tp += in_gt
            fp += not in_gt
            continue
        fn += in_gt
        tn += not in_gt
        confident += 1
        winner, loser = (p.i, p.j) if p.p_i_gt_j >= 0.5 else (p.j, p.i)
        correct += (not in_gt) and rank[winner] < rank[loser]
    n_pairs = len(result.pairs)
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "adapt_tie_pct": (tp + fp) / n_pairs,
        "gt_tie_pct": (tp + fn) / n_pairs,
        "tie_precision": precision,
        "tie_recall": recall,
        "tie_f1": f1,
        "confident_accuracy": correct / confident if confident else None,
        "counts": {"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    }


def evaluate(result, truth, n_boot=1000, level=0.95, seed=0):
    """Full report for ``result`` against a complete score matrix ``truth``."""
    gt = ground_truth(truth, models=result.order, n_boot=n_boot, level=level, seed=seed)
    tm = tie_metrics(result, gt)
    denom = result.bank_size * len(result.order)
    return EvalReport(
        tau=kendall_tau(result.order, gt.order),
        items_pct=result.total_items / denom if denom else math.nan,
        cost_total=result.total_cost,
        **tm,
    )


def conformance(matrix, calib: CalibrationArtifact, n_bins=20, min_count=5):
    """R^2 between binned residual variance and the predicted ``k * mu * (1 - mu)``.

    Cells are binned by predicted mean on equal-width bins over [0, 1]; bins
    with fewer than ``min_count`` cells are skipped. The result can be negative.
    """
    check_count(n_bins, "n_bins", 2)
    b = calib.difficulties
    unknown = [i for i in matrix.items if i not in b]
    if unknown:
        raise ValueError(f"item {unknown[0]!r} is not in the calibration")
    theta = estimate_abilities(matrix, calib.transform)
    b_vec = np.array([b[i] for i in matrix.items])
    t_vec = np.array([theta[m] for m in matrix.models])
    mu = logistic_mean(t_vec[:, None], b_vec[None, :])
    obs = matrix.observed
    mu, resid = mu[obs], (matrix.scores - mu)[obs]
    bins = np.minimum((mu * n_bins).astype(int), n_bins - 1)
    observed, predicted = [], []
    for k in range(n_bins):
        sel = bins == k
        if sel.sum() < min_count:
            continue
        m = mu[sel].mean()
        observed.append(np.var(resid[sel], ddof=1))
        predicted.append(calib.k * m * (1.0 - m))
    if len(observed) < 2:
        raise ValueError(f"only {len(observed)} bin(s) hold >= {min_count} cells; need 2")
    observed, predicted = np.array(observed), np.array(predicted)
    ss_tot = np.sum((observed - observed.mean()) ** 2)
    ss_res = np.sum((observed - predicted) ** 2)
    return float(1.0 - ss_res / ss_tot) if ss_tot > 0 else -math.inf if ss_res > 0 else 1.0


@dataclass(frozen=True)
class SyntheticConfig:
    """Generative-model settings.

    ``theta_gen`` and ``b_gen`` are either explicit value lists or
    ``("normal", mean, sd)`` / ``("uniform", lo, hi)`` tuples.
    """

    n_models: int = 4
    n_items: int = 500
    theta_gen: tuple = ("normal", 0.0, 1.0)
    b_gen: tuple = ("normal", 0.0, 1.0)
    k_true: float = 0.1
    seed: int = 0
    model_prefix: str = "m"
    item_prefix: str = "i"

    def __post_init__(self):
        check_count(self.n_models, "n_models", 2)
        check_count(self.n_items, "n_items", 2)
        check_positive(self.k_true, "k_true")


def _draw(spec, n, rng, what):
    if len(spec) == 3 and spec[0] in ("normal", "uniform"):
        kind, p1, p2 = spec
        if kind == "normal":
            return rng.normal(p1, p2, size=n)
        return rng.uniform(p1, p2, size=n)
    values = np.asarray(spec, dtype=float)
    if values.shape != (n,):
        raise ValueError(f"{what} has {values.size} values, expected {n}")
    return values.copy()


@dataclass(frozen=True)
class SyntheticTruth:
    theta: dict
    b: dict
    k: float


def generate_synthetic(config: SyntheticConfig):
    """Sample ``y ~ N(mu, k mu (1 - mu))`` clamped to [0, 1]; returns ``(matrix, truth)``."""
    rng = np.random.default_rng(config.seed)
    b = _draw(config.b_gen, config.n_items, rng, "b_gen")
    theta = _draw(config.theta_gen, config.n_models, rng, "theta_gen")
    mu = logistic_mean(theta[:, None], b[None, :])
    sd = np.sqrt(config.k_true * mu * (1.0 - mu))
    y = np.clip(mu + sd * rng.standard_normal(mu.shape), 0.0, 1.0)
    width_m = len(str(config.n_models - 1))
    width_i = len(str(config.n_items - 1))
    models = tuple(f"{config.model_prefix}{j:0{width_m}d}" for j in range(config.n_models))
    items = tuple(f"{config.item_prefix}{i:0{width_i}d}" for i in range(config.n_items))
    truth = SyntheticTruth(
        theta=dict(zip(models, theta.tolist())),
        b=dict(zip(items, b.tolist())),
        k=config.k_true,
    )
    return ScoreMatrix(models, items, y), truth


def true_order(truth: SyntheticTruth, models=None):
    models = list(truth.theta) if models is None else list(models)
    pos = {m: n for n, m in enumerate(models)}
    return sorted(models, key=lambda m: (-truth.theta[m], pos[m]))


def fixed_length_cat(models, bank, k, oracle, n, seed=0, config=None, costs=None):
    """Fixed-length CAT ablation: ``n`` items for every model, then rank."""
    config = RankerConfig(n_init=1, n_max=max(int(n), 1), seed=seed) if config is None else config
    return run_fixed_length(models, bank, oracle, n, config, k=k, costs=costs)
