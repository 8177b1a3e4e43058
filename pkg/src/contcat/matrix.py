"""Sparse model x item score tables."""

from dataclasses import dataclass

import numpy as np

from .validation import check_score_array, check_unique


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Scores indexed by ``(model, item)``; missing cells are NaN.

    ``scores[j, i]`` is model ``models[j]`` on item ``items[i]``.
    """

    models: tuple
    items: tuple
    scores: np.ndarray

    def __post_init__(self):
        models = tuple(check_unique(self.models, "model"))
        items = tuple(check_unique(self.items, "item"))
        scores = check_score_array(self.scores)
        if scores.shape != (len(models), len(items)):
            raise ValueError(
                f"score array shape {scores.shape} does not match "
                f"{len(models)} models x {len(items)} items"
            )
        scores.setflags(write=False)
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_entries(cls, entries, models=None, items=None):
        """Build from a mapping ``(model, item) -> score``."""
        if models is None:
            models = list(dict.fromkeys(m for m, _ in entries))
        if items is None:
            items = list(dict.fromkeys(i for _, i in entries))
        row = {m: j for j, m in enumerate(models)}
        col = {i: j for j, i in enumerate(items)}
        arr = np.full((len(models), len(items)), np.nan)
        for (m, i), y in entries.items():
            arr[row[m], col[i]] = y
        return cls(tuple(models), tuple(items), arr)

    @property
    def shape(self):
        return self.scores.shape

    @property
    def observed(self):
        return ~np.isnan(self.scores)

    def entries(self):
        out = {}
        for j, i in zip(*np.nonzero(self.observed)):
            out[(self.models[j], self.items[i])] = float(self.scores[j, i])
        return out

    def score(self, model, item):
        return float(self.scores[self.models.index(model), self.items.index(item)])

    def select_models(self, models):
        idx = [self._index(self.models, m, "model") for m in models]
        return ScoreMatrix(tuple(models), self.items, self.scores[idx])

    def drop_models(self, models):
        drop = set(models)
        return self.select_models([m for m in self.models if m not in drop])

    def select_items(self, items):
        idx = [self._index(self.items, i, "item") for i in items]
        return ScoreMatrix(self.models, tuple(items), self.scores[:, idx])

    def missing_cells(self):
        return [(self.models[j], self.items[i]) for j, i in zip(*np.nonzero(~self.observed))]

    @staticmethod
    def _index(ids, key, what):
        try:
            return ids.index(key)
        except ValueError:
            raise KeyError(f"unknown {what} {key!r}") from None

    def __eq__(self, other):
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.models == other.models
            and self.items == other.items
            and np.array_equal(self.scores, other.scores, equal_nan=True)
        )
