"""One-plus-random ranking evaluation with Recall@N and MRR@N."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .core import FMModel, ItemAttributes, SparseVector, score_items
from .data import Dataset, Interaction
from .errors import EvaluationError

# scorer(user feature id or None, item feature ids (-1 = unseen), aux) -> scores
Scorer = Callable[[int | None, np.ndarray, SparseVector], np.ndarray]


class RankResult(NamedTuple):
    index: int
    rank: int
    candidates: int


class TestPoint(NamedTuple):
    user: int | None
    item: int
    aux: SparseVector


def encode_test(test: Sequence[Interaction], train: Dataset, aux_builder=None) -> list[TestPoint]:
    """Map held-out interactions onto the training feature space.

    Users or items absent from training become ``None`` / -1. Aux vectors
    are built against the frozen space, so unseen aux values are dropped.
    """
    space = train.space.freeze()
    out = []
    for it in test:
        aux = aux_builder(it, space) if aux_builder else SparseVector()
        out.append(TestPoint(space.get("user", it.user), space.get("item", it.item, -1), aux))
    return out


def one_plus_random_rank(
    scorer: Scorer,
    test: TestPoint,
    train: Dataset,
    pool: int,
    rng: np.random.Generator,
    universe: np.ndarray | None = None,
    index: int = 0,
    observed: np.ndarray | None = None,
) -> RankResult:
    """Rank the test item among ``pool`` random items the user has not interacted with.

    ``observed`` lists the user's known items; by default their training
    positives. Candidates share the test point's user and aux vector. Ties
    count against the test item: rank = 1 + #(candidates scoring >= test item).
    """
    if pool < 1:
        raise EvaluationError("pool must be >= 1")
    if universe is None:
        universe = np.arange(train.item_lo, train.item_hi)
    if len(universe) < 2:
        raise EvaluationError(f"item universe has {len(universe)} item(s); need at least 2")
    if observed is None:
        observed = train.positives(test.user) if test.user is not None else np.zeros(0, np.int64)
    if test.item >= 0:
        observed = np.append(observed, test.item)
    available = np.setdiff1d(universe, observed)
    if len(available) > pool:
        available = available[np.sort(rng.choice(len(available), size=pool, replace=False))]
    scores = np.asarray(scorer(test.user, np.concatenate(([test.item], available)), test.aux), dtype=np.float64)
    rank = 1 + int(np.count_nonzero(scores[1:] >= scores[0]))
    return RankResult(index, rank, len(available))


def observed_items(train: Dataset, interactions: Sequence[Interaction]) -> dict[int, np.ndarray]:
    """Item ids each training user is observed with in ``interactions``.

    Pass every known positive (training and held-out) to keep a user's
    other held-out items out of their candidate sets. Pairs outside the
    training feature space are skipped.
    """
    space = train.space
    acc: dict[int, set] = {}
    for it in interactions:
        u = space.get("user", it.user)
        i = space.get("item", it.item)
        if u is not None and i is not None:
            acc.setdefault(u, set()).add(i)
    return {u: np.array(sorted(v), dtype=np.int64) for u, v in acc.items()}


def _ranks(results) -> np.ndarray:
    ranks = np.array([r.rank if isinstance(r, RankResult) else r for r in results], dtype=np.float64)
    if ranks.size == 0:
        raise EvaluationError("no rank results")
    return ranks


def recall_at_n(results: Sequence[RankResult], n: int) -> float:
    return float(np.mean(_ranks(results) <= n))


def mrr_at_n(results: Sequence[RankResult], n: int) -> float:
    ranks = _ranks(results)
    return float(np.mean(np.where(ranks <= n, 1.0 / ranks, 0.0)))


@dataclass
class FoldResult:
    fold: int
    ranks: list[RankResult]
    recall: dict[int, float]
    mrr: dict[int, float]


def evaluate_fold(
    scorer: Scorer,
    test: Sequence[TestPoint],
    train: Dataset,
    ns: Sequence[int] | int = (10,),
    pool: int = 1000,
    seed=0,
    fold: int = 0,
    universe: np.ndarray | None = None,
    observed: Mapping[int, np.ndarray] | None = None,
) -> FoldResult:
    """Rank every test point; candidate draws are seeded by (seed, fold, index).

    ``observed`` maps user ids to the items excluded from their candidate
    sets (see ``observed_items``); without it, training positives are used.
    """
    if not test:
        raise EvaluationError("empty test set")
    ns = [ns] if isinstance(ns, int) else list(ns)
    empty = np.zeros(0, np.int64)
    results = []
    for i, tp in enumerate(test):
        seen = None
        if observed is not None:
            seen = observed.get(tp.user, empty) if tp.user is not None else empty
        rng = np.random.default_rng([int(seed), fold, i])
        results.append(one_plus_random_rank(scorer, tp, train, pool, rng, universe, i, seen))
    return FoldResult(
        fold,
        results,
        {n: recall_at_n(results, n) for n in ns},
        {n: mrr_at_n(results, n) for n in ns},
    )


@dataclass
class EvalReport:
    """Per-fold metrics with their mean and sample (n-1) standard deviation."""

    method: str
    ns: list[int]
    pool: int
    seed: int
    folds: list[FoldResult] = field(default_factory=list)

    def values(self, metric: str, n: int) -> np.ndarray:
        return np.array([getattr(f, metric)[n] for f in self.folds])

    def mean(self, metric: str, n: int) -> float:
        return float(np.mean(self.values(metric, n)))

    def std(self, metric: str, n: int) -> float:
        v = self.values(metric, n)
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    def rows(self):
        for f in self.folds:
            for metric in ("recall", "mrr"):
                for n in self.ns:
                    yield str(f.fold), metric, n, getattr(f, metric)[n]
        for agg in ("mean", "std"):
            for metric in ("recall", "mrr"):
                for n in self.ns:
                    yield agg, metric, n, getattr(self, agg)(metric, n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("fold,metric,N,value\n")
        for fold, metric, n, value in self.rows():
            buf.write(f"{fold},{metric},{n},{value!r}\n")
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"method: {self.method}",
            f"protocol: one-plus-random, {self.pool} candidates per test point, seed {self.seed}",
            "std: sample standard deviation over folds (n-1 denominator)",
            "",
        ]
        header = "fold    " + "  ".join(f"{m + '@' + str(n):>12}" for m in ("Recall", "MRR") for n in self.ns)
        lines.append(header)
        for f in self.folds:
            cells = [f.recall[n] for n in self.ns] + [f.mrr[n] for n in self.ns]
            lines.append(f"{f.fold:<8}" + "  ".join(f"{c:12.4f}" for c in cells))
        cells = [f"{self.mean(m, n):.4f} ({self.std(m, n):.4f})" for m in ("recall", "mrr") for n in self.ns]
        lines.append("mean    " + "  ".join(f"{c:>12}" for c in cells))
        return "\n".join(lines) + "\n"


def fm_scorer(model: FMModel, attributes: ItemAttributes | None = None) -> Scorer:
    return lambda user, items, aux: score_items(model, user, items, aux, attributes)


def mf_scorer(model) -> Scorer:
    def score(user, items, aux):
        items = np.asarray(items)
        out = np.zeros(len(items))
        if user is None:
            return out
        known = items >= 0
        out[known] = model.score(user, items[known])
        return out

    return score


def popularity_scorer(model) -> Scorer:
    return lambda user, items, aux: model.scores(items)
