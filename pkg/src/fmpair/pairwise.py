"""FM-Pair: factorization machines trained on BPR-style pairwise preferences."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .core import FMModel, ItemAttributes, SparseVector, init_params
from .data import Dataset
from .errors import DomainError, NumericDivergenceError


@dataclass
class TrainConfig:
    k: int = 10
    epochs: int = 300
    learn_rate: float = 0.005
    reg_w0: float = 0.0
    reg_w: float = 0.0
    reg_v: float = 0.0
    sigma0: float = 0.1
    seed: int = 0
    item_bias_enabled: bool = True

    def __post_init__(self):
        if not self.learn_rate >= 0:
            raise DomainError(f"learn_rate must be >= 0, got {self.learn_rate}")
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.k < 0:
            raise DomainError(f"k must be >= 0, got {self.k}")
        for name in ("reg_w0", "reg_w", "reg_v", "sigma0"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return asdict(self)


def seed_streams(seed) -> tuple[np.random.SeedSequence, np.random.Generator]:
    """Split a run seed into (init seed, sampling generator)."""
    init_ss, sample_ss = np.random.SeedSequence(seed).spawn(2)
    return init_ss, np.random.default_rng(sample_ss)


class PairSample(NamedTuple):
    user: int
    pos_item: int
    neg_item: int
    aux: SparseVector
    row: int = -1


def sample_pair(data: Dataset, rng: np.random.Generator) -> PairSample:
    """Bootstrap one positive (u, i, z) and a uniform unobserved item j for u."""
    rows = data.trainable_rows()
    r = int(rows[rng.integers(len(rows))])
    u = int(data.users[r])
    while True:
        j = int(rng.integers(data.item_lo, data.item_hi))
        if not data.is_positive(np.array([u]), np.array([j]))[0]:
            break
    return PairSample(u, int(data.items[r]), j, data.aux(r), r)


class SampleBatch(NamedTuple):
    rows: np.ndarray
    users: np.ndarray
    pos: np.ndarray
    neg: np.ndarray


def draw_samples(data: Dataset, rng: np.random.Generator, size: int) -> SampleBatch:
    """``size`` bootstrap draws; negatives rejected and redrawn while observed."""
    trainable = data.trainable_rows()
    rows = trainable[rng.integers(0, len(trainable), size)]
    users = data.users[rows]
    return SampleBatch(rows, users, data.items[rows], sample_negatives(data, users, rng))


def sample_negatives(data: Dataset, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uniform unobserved item per entry of ``users`` (which must all be trainable)."""
    neg = rng.integers(data.item_lo, data.item_hi, len(users))
    bad = np.flatnonzero(data.is_positive(users, neg))
    while bad.size:
        neg[bad] = rng.integers(data.item_lo, data.item_hi, bad.size)
        bad = bad[data.is_positive(users[bad], neg[bad])]
    return neg


def sgd_step(
    model: FMModel, s: PairSample, cfg: TrainConfig, attributes: ItemAttributes | None = None
) -> tuple[FMModel, float]:
    """Update ``model`` in place for one sample; returns it with ln sigmoid(g) before the step.

    With ``attributes`` the positive and negative items each bring their own
    attribute features and g = f(x(u, i, z, a(i))) - f(x(u, j, z, a(j))).
    """
    for fid in (s.user, s.pos_item, s.neg_item):
        if not 0 <= fid < model.n:
            raise IndexError(f"feature id {fid} out of range for model with n={model.n}")
    if len(s.aux) and s.aux.ids[-1] >= model.n:
        raise IndexError(f"aux feature id {int(s.aux.ids[-1])} out of range for model with n={model.n}")
    k = model.k
    lr, reg_w, reg_v, bias = float(cfg.learn_rate), float(cfg.reg_w), float(cfg.reg_v), bool(cfg.item_bias_enabled)
    if attributes is None:
        loglik, status = kernels.pair_update(
            model.w, model.V, s.user, s.pos_item, s.neg_item, s.aux.ids, s.aux.values,
            lr, reg_w, reg_v, bias, np.empty(k), np.empty(k),
        )
    else:
        a, b = attributes.get(s.pos_item), attributes.get(s.neg_item)
        m = 2 + len(a) + len(b)
        loglik, status = kernels.pair_update_attr(
            model.w, model.V, s.user, s.pos_item, s.neg_item, s.aux.ids, s.aux.values,
            a.ids, a.values, b.ids, b.values, lr, reg_w, reg_v, bias,
            np.empty(k), np.empty(k), np.empty(k), np.empty(m, np.int64), np.empty(m), np.empty(m), np.empty((m, k)),
        )
    if status != kernels.OK:
        raise NumericDivergenceError(kernels.STATUS_GROUPS[status])
    return model, loglik


def gather_aux(data: Dataset, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Copy the aux features of ``rows`` into a CSR laid out in sample order.

    The kernels then read aux sequentially instead of jumping between rows,
    which keeps epoch cost proportional to the aux width.
    """
    ptr = data.aux_ptr
    lens = ptr[rows + 1] - ptr[rows]
    out = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(lens, out=out[1:])
    sel = np.repeat(ptr[rows] - out[:-1], lens) + np.arange(out[-1])
    return out, data.aux_idx[sel], data.aux_val[sel]


def run_epoch(model: FMModel, data: Dataset, batch: SampleBatch, cfg: TrainConfig, epoch: int = 0) -> float:
    hyper = (float(cfg.learn_rate), float(cfg.reg_w), float(cfg.reg_v), bool(cfg.item_bias_enabled))
    aux = gather_aux(data, batch.rows)
    order = np.arange(len(batch.rows), dtype=np.int64)
    if data.attributes is None:
        total, status, step = kernels.pair_epoch(
            model.w, model.V, batch.users, batch.pos, batch.neg, order, *aux, *hyper,
        )
    else:
        at = data.attributes
        total, status, step = kernels.pair_epoch_attr(
            model.w, model.V, batch.users, batch.pos, batch.neg, order,
            *aux, at.ptr, at.idx, at.val, at.item_lo, *hyper,
        )
    if status != kernels.OK:
        raise NumericDivergenceError(kernels.STATUS_GROUPS[status], epoch, int(step))
    return total / max(len(batch.rows), 1)


Observer = Callable[[int, float, FMModel], object]


def train(data: Dataset, cfg: TrainConfig, callback: Observer | None = None) -> FMModel:
    """Fit FM-Pair; each epoch is ``len(data)`` bootstrap draws.

    ``callback(epoch, mean_loglik, model)`` runs after every epoch. The
    model handed to it is the live training model and must not be mutated.
    ``w0`` cancels out of every pairwise utility and stays zero.
    """
    data.trainable_rows()
    init_ss, rng = seed_streams(cfg.seed)
    model = init_params(data.space.n, cfg.k, cfg.sigma0, init_ss)
    model.space = data.space
    for epoch in range(cfg.epochs):
        batch = draw_samples(data, rng, len(data))
        mean_ll = run_epoch(model, data, batch, cfg, epoch)
        if callback is not None:
            callback(epoch, mean_ll, model)
    return model
