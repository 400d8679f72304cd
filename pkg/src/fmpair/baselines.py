"""Most-Popular ranking and a standalone BPR-MF."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Dataset
from .errors import NumericDivergenceError
from .pairwise import Observer, PairSample, TrainConfig, draw_samples, seed_streams


@dataclass
class PopularityModel:
    """Positive-interaction count per item, indexed by item feature id minus ``item_lo``."""

    counts: np.ndarray
    item_lo: int = 0

    @classmethod
    def fit(cls, data: Dataset) -> PopularityModel:
        return cls(data.item_counts(), data.item_lo)

    def scores(self, items: np.ndarray) -> np.ndarray:
        local = np.asarray(items, dtype=np.int64) - self.item_lo
        known = (local >= 0) & (local < len(self.counts))
        return np.where(known, self.counts[np.where(known, local, 0)], 0).astype(np.float64)

    def ranking(self) -> np.ndarray:
        """Item feature ids by descending count, ties by ascending id."""
        order = np.lexsort((np.arange(len(self.counts)), -self.counts))
        return order + self.item_lo


def popularity_score(model: PopularityModel, user, item: int) -> float:
    return float(model.scores(np.array([item]))[0])


@dataclass
class MFModel:
    """User factors P (|U| x k) and item factors Q (|I| x k); no biases."""

    P: np.ndarray
    Q: np.ndarray
    item_lo: int

    @property
    def k(self) -> int:
        return self.P.shape[1]

    def score(self, user: int, items: np.ndarray) -> np.ndarray:
        return self.Q[np.asarray(items) - self.item_lo] @ self.P[user]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.P).all() and np.isfinite(self.Q).all())


def init_mf(n_users: int, n_items: int, k: int, sigma0: float, seed) -> MFModel:
    """Factors for users then items from one N(0, sigma0^2) block, as for an FM over (user, item)."""
    V = sigma0 * np.random.default_rng(seed).standard_normal((n_users + n_items, k))
    return MFModel(V[:n_users].copy(), V[n_users:].copy(), n_users)


def bpr_mf_step(model: MFModel, s: PairSample, cfg: TrainConfig) -> tuple[MFModel, float]:
    """Ascent step on ln sigmoid(<P_u, Q_i - Q_j>) with L2 shrinkage ``cfg.reg_v``."""
    arr = lambda v: np.array([v], dtype=np.int64)  # noqa: E731
    lo = model.item_lo
    total, status, _ = kernels.bprmf_epoch(
        model.P, model.Q, arr(s.user), arr(s.pos_item - lo), arr(s.neg_item - lo),
        float(cfg.learn_rate), float(cfg.reg_v),
    )
    if status != kernels.OK:
        raise NumericDivergenceError(kernels.STATUS_GROUPS[status])
    return model, total


def train_bpr_mf(data: Dataset, cfg: TrainConfig, callback: Observer | None = None) -> MFModel:
    """BPR-MF on the same seed streams and sampler as ``pairwise.train``."""
    data.trainable_rows()
    init_ss, rng = seed_streams(cfg.seed)
    if data.space.n_aux:
        raise ValueError("BPR-MF cannot use auxiliary features")
    model = init_mf(data.n_users, data.n_items, cfg.k, cfg.sigma0, init_ss)
    for epoch in range(cfg.epochs):
        batch = draw_samples(data, rng, len(data))
        total, status, step = kernels.bprmf_epoch(
            model.P, model.Q, batch.users, batch.pos - data.item_lo, batch.neg - data.item_lo,
            float(cfg.learn_rate), float(cfg.reg_v),
        )
        if status != kernels.OK:
            raise NumericDivergenceError(kernels.STATUS_GROUPS[status], epoch, int(step))
        if callback is not None:
            callback(epoch, total / len(batch.rows), model)
    return model
