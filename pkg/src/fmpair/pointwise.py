"""Standard FM trained by SGD on squared loss, and the FM-Map baseline built on it."""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .core import FeatureSpace, FMModel, SparseVector, feature_vector, init_params
from .data import Dataset
from .errors import NumericDivergenceError
from .pairwise import TrainConfig, sample_negatives, seed_streams


class LabeledInstance(NamedTuple):
    x: SparseVector
    y: float


def pack(instances: Sequence[LabeledInstance]):
    """CSR triple plus label vector for a list of instances."""
    lens = np.array([len(inst.x) for inst in instances], dtype=np.int64)
    ptr = np.zeros(len(instances) + 1, dtype=np.int64)
    np.cumsum(lens, out=ptr[1:])
    if instances:
        idx = np.concatenate([inst.x.ids for inst in instances]).astype(np.int64)
        val = np.concatenate([inst.x.values for inst in instances]).astype(np.float64)
    else:
        idx, val = np.zeros(0, np.int64), np.zeros(0)
    y = np.array([inst.y for inst in instances], dtype=np.float64)
    return ptr, idx, val, y


def pointwise_step(model: FMModel, inst: LabeledInstance, cfg: TrainConfig) -> FMModel:
    """One descent step on (f(x) - y)^2 plus L2 terms, in place."""
    if len(inst.x) and inst.x.ids[-1] >= model.n:
        raise IndexError(f"feature id {int(inst.x.ids[-1])} out of range for model with n={model.n}")
    w0 = np.array([model.w0])
    _, status = kernels.pointwise_update(
        w0, model.w, model.V, inst.x.ids, inst.x.values, float(inst.y),
        float(cfg.learn_rate), float(cfg.reg_w0), float(cfg.reg_w), float(cfg.reg_v), np.empty(model.k),
    )
    model.w0 = float(w0[0])
    if status != kernels.OK:
        raise NumericDivergenceError(kernels.STATUS_GROUPS[status])
    return model


def predict_many(model: FMModel, instances: Sequence[LabeledInstance]) -> np.ndarray:
    ptr, idx, val, _ = pack(instances)
    return kernels.predict_csr(float(model.w0), model.w, model.V, ptr, idx, val)


def rmse(model: FMModel, instances: Sequence[LabeledInstance]) -> float:
    y = np.array([inst.y for inst in instances])
    return float(np.sqrt(np.mean((predict_many(model, instances) - y) ** 2)))


EpochObserver = Callable[[int, float, FMModel], object]


def _fit(model, cfg, rng, packed_for_epoch, callback):
    w0 = np.array([model.w0])
    for epoch in range(cfg.epochs):
        ptr, idx, val, y = packed_for_epoch(epoch)
        order = rng.permutation(len(y))
        total, status, step = kernels.pointwise_epoch(
            w0, model.w, model.V, order, ptr, idx, val, y,
            float(cfg.learn_rate), float(cfg.reg_w0), float(cfg.reg_w), float(cfg.reg_v),
        )
        model.w0 = float(w0[0])
        if status != kernels.OK:
            raise NumericDivergenceError(kernels.STATUS_GROUPS[status], epoch, int(step))
        if callback is not None:
            callback(epoch, total / max(len(y), 1), model)
    return model


def train_pointwise(
    data: Sequence[LabeledInstance],
    cfg: TrainConfig,
    n_features: int | None = None,
    space: FeatureSpace | None = None,
    callback: EpochObserver | None = None,
) -> FMModel:
    """Shuffled full passes of SGD over ``data``; the observer gets mean squared error."""
    if not data:
        raise ValueError("no training instances")
    if n_features is None:
        n_features = space.n if space is not None else 1 + max((int(i.x.ids[-1]) for i in data if len(i.x)), default=0)
    init_ss, rng = seed_streams(cfg.seed)
    model = init_params(n_features, cfg.k, cfg.sigma0, init_ss)
    model.space = space
    packed = pack(data)
    return _fit(model, cfg, rng, lambda epoch: packed, callback)


def instance_vector(data: Dataset, user: int, item: int, row: int) -> SparseVector:
    """x(u, item, z) with z taken from ``row``, plus the item's own attributes if any."""
    x = feature_vector(user, item, data.aux(row))
    if data.attributes is not None:
        x = x.union(data.attributes.get(item))
    return x


def build_fm_map_training(data: Dataset, rng: np.random.Generator, negative_label: float = -1.0) -> list[LabeledInstance]:
    """Positives labelled +1 plus one sampled unobserved (u, j) per positive.

    Each negative reuses the auxiliary vector of the positive it mirrors, so
    every user gets as many negatives as positives.
    """
    rows = data.trainable_rows()
    users = data.users[rows]
    negs = sample_negatives(data, users, rng)
    out = [LabeledInstance(instance_vector(data, int(data.users[r]), int(data.items[r]), r), 1.0) for r in range(len(data))]
    for r, u, j in zip(rows.tolist(), users.tolist(), negs.tolist()):
        out.append(LabeledInstance(instance_vector(data, u, j, r), float(negative_label)))
    return out


def train_fm_map(
    data: Dataset,
    cfg: TrainConfig,
    negative_label: float = -1.0,
    resample_negatives: bool = False,
    callback: EpochObserver | None = None,
) -> FMModel:
    """Pointwise FM on +1 / ``negative_label`` targets.

    By default negatives are drawn once before training; with
    ``resample_negatives`` a fresh set is drawn every epoch.
    """
    init_ss, rng = seed_streams(cfg.seed)
    neg_rng = np.random.default_rng(init_ss.spawn(1)[0])
    model = init_params(data.space.n, cfg.k, cfg.sigma0, init_ss)
    model.space = data.space
    packed = pack(build_fm_map_training(data, neg_rng, negative_label))

    def for_epoch(epoch):
        nonlocal packed
        if resample_negatives and epoch > 0:
            packed = pack(build_fm_map_training(data, neg_rng, negative_label))
        return packed

    return _fit(model, cfg, rng, for_epoch, callback)


def explicit_instances(data: Dataset, ratings: Sequence[float]) -> list[LabeledInstance]:
    """(x(u, i, z), rating) for every interaction of ``data``."""
    return [
        LabeledInstance(instance_vector(data, int(data.users[r]), int(data.items[r]), r), float(y))
        for r, y in zip(range(len(data)), ratings)
    ]
