"""Sparse feature vectors, the feature dictionary and the order-2 FM model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError

NAMESPACES = ("user", "item", "aux")


class SparseVector:
    """Canonical sparse vector: strictly increasing ids, no explicit zeros."""

    __slots__ = ("ids", "values")

    def __init__(self, ids=(), values=()):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if ids.shape != values.shape:
            raise ValueError("ids and values differ in length")
        if ids.size and ids.min() < 0:
            raise ValueError("feature ids must be non-negative")
        keep = values != 0.0
        ids, values = ids[keep], values[keep]
        order = np.argsort(ids, kind="stable")
        ids, values = ids[order], values[order]
        if ids.size > 1 and np.any(ids[1:] == ids[:-1]):
            raise ValueError("duplicate feature id in sparse vector")
        self.ids = ids
        self.values = values

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> SparseVector:
        pairs = list(pairs)
        if not pairs:
            return cls()
        ids, values = zip(*pairs)
        return cls(ids, values)

    @classmethod
    def one_hot(cls, *ids: int) -> SparseVector:
        return cls(ids, np.ones(len(ids)))

    def union(self, *others: SparseVector) -> SparseVector:
        """Concatenate vectors over disjoint id sets."""
        ids = np.concatenate([self.ids] + [o.ids for o in others])
        values = np.concatenate([self.values] + [o.values for o in others])
        return SparseVector(ids, values)

    def __len__(self):
        return self.ids.size

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return zip(self.ids.tolist(), self.values.tolist())

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"SparseVector({list(self)})"


class FeatureSpace:
    """Exact dictionary encoding of (namespace, key) pairs to feature ids.

    Ids are contiguous and blocked as users, then items, then auxiliary
    features, so a namespace may only grow while every later block is still
    empty. Auxiliary features can be appended at any time. A frozen space
    answers lookups but refuses new keys.
    """

    def __init__(self, users=(), items=(), aux=()):
        self._ids: dict[str, dict] = {ns: {} for ns in NAMESPACES}
        self._keys: dict[str, list] = {ns: [] for ns in NAMESPACES}
        self.frozen = False
        for u in users:
            self.add("user", u)
        for i in items:
            self.add("item", i)
        for z in aux:
            self.add("aux", z)

    @property
    def n_users(self) -> int:
        return len(self._keys["user"])

    @property
    def n_items(self) -> int:
        return len(self._keys["item"])

    @property
    def n_aux(self) -> int:
        return len(self._keys["aux"])

    @property
    def n(self) -> int:
        return self.n_users + self.n_items + self.n_aux

    def offset(self, namespace: str) -> int:
        if namespace == "user":
            return 0
        if namespace == "item":
            return self.n_users
        if namespace == "aux":
            return self.n_users + self.n_items
        raise DomainError(f"unknown namespace {namespace!r}")

    def range(self, namespace: str) -> range:
        lo = self.offset(namespace)
        return range(lo, lo + len(self._keys[namespace]))

    def add(self, namespace: str, key) -> int:
        table = self._ids[namespace] if namespace in self._ids else None
        if table is None:
            raise DomainError(f"unknown namespace {namespace!r}")
        if key in table:
            return table[key] + self.offset(namespace)
        if self.frozen:
            raise DomainError(f"feature space is frozen; cannot add {namespace}:{key!r}")
        later = NAMESPACES[NAMESPACES.index(namespace) + 1 :]
        if namespace != "aux" and any(self._keys[ns] for ns in later):
            raise DomainError(f"cannot add {namespace} features after {'/'.join(later)} features")
        table[key] = len(self._keys[namespace])
        self._keys[namespace].append(key)
        return table[key] + self.offset(namespace)

    def get(self, namespace: str, key, default=None):
        local = self._ids[namespace].get(key)
        if local is None:
            return default
        return local + self.offset(namespace)

    def id(self, namespace: str, key) -> int:
        fid = self.get(namespace, key)
        if fid is None:
            raise KeyError(f"{namespace}:{key!r}")
        return fid

    def lookup(self, fid: int) -> tuple[str, object]:
        for ns in NAMESPACES:
            r = self.range(ns)
            if fid in r:
                return ns, self._keys[ns][fid - r.start]
        raise IndexError(f"feature id {fid} out of range [0, {self.n})")

    def namespace_of(self, fid: int) -> str:
        return self.lookup(fid)[0]

    def keys(self, namespace: str) -> list:
        return list(self._keys[namespace])

    def freeze(self) -> FeatureSpace:
        self.frozen = True
        return self


@dataclass
class FMModel:
    """Order-2 factorization machine parameters ``w0``, ``w`` (n) and ``V`` (n x k)."""

    w0: float
    w: np.ndarray
    V: np.ndarray
    space: FeatureSpace | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        self.V = np.ascontiguousarray(self.V, dtype=np.float64)
        if self.V.ndim != 2 or self.V.shape[0] != self.w.shape[0]:
            raise ValueError(f"V must have shape ({self.w.shape[0]}, k), got {self.V.shape}")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.V.shape[1]

    def copy(self) -> FMModel:
        return FMModel(float(self.w0), self.w.copy(), self.V.copy(), self.space)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.w0) and np.isfinite(self.w).all() and np.isfinite(self.V).all())


def init_params(n: int, k: int, sigma0: float, seed) -> FMModel:
    """Zero biases and N(0, sigma0^2) factors drawn from ``numpy.random.default_rng(seed)``."""
    if n < 1 or k < 0 or sigma0 < 0:
        raise DomainError(f"need n >= 1, k >= 0, sigma0 >= 0 (got n={n}, k={k}, sigma0={sigma0})")
    rng = np.random.default_rng(seed)
    V = sigma0 * rng.standard_normal((n, k))
    return FMModel(0.0, np.zeros(n), V)


def _check_ids(model: FMModel, ids: np.ndarray):
    if ids.size and ids[-1] >= model.n:
        bad = int(ids[ids >= model.n][0])
        raise IndexError(f"feature id {bad} out of range for model with n={model.n}")


def predict(model: FMModel, x: SparseVector) -> float:
    """FM score of ``x`` in O(k * nnz(x))."""
    ids, vals = x.ids, x.values
    _check_ids(model, ids)
    if ids.size == 0:
        return float(model.w0)
    linear = model.w[ids] @ vals
    vx = model.V[ids] * vals[:, None]
    s = vx.sum(axis=0)
    pairwise = 0.5 * float(np.sum(s * s - (vx * vx).sum(axis=0)))
    return float(model.w0 + linear + pairwise)


def predict_naive(model: FMModel, x: SparseVector) -> float:
    """Literal double loop over feature pairs; a reference for ``predict``."""
    _check_ids(model, x.ids)
    pairs = list(x)
    total = float(model.w0)
    for j, xj in pairs:
        total += model.w[j] * xj
    for a in range(len(pairs)):
        j, xj = pairs[a]
        for b in range(a + 1, len(pairs)):
            jj, xjj = pairs[b]
            dot = 0.0
            for f in range(model.k):
                dot += model.V[j, f] * model.V[jj, f]
            total += dot * xj * xjj
    return total


def _require_namespace(model: FMModel, fid: int, namespace: str):
    if not 0 <= fid < model.n:
        raise IndexError(f"feature id {fid} out of range for model with n={model.n}")
    if model.space is not None and fid not in model.space.range(namespace):
        raise DomainError(f"feature id {fid} is not in the {namespace} namespace")


def pair_utility(model: FMModel, user: int, pos_item: int, neg_item: int, aux: SparseVector) -> float:
    """Score difference f(u, pos, z) - f(u, neg, z); terms without the item cancel."""
    _require_namespace(model, user, "user")
    _require_namespace(model, pos_item, "item")
    _require_namespace(model, neg_item, "item")
    _check_ids(model, aux.ids)
    if model.space is not None:
        for z in aux.ids:
            _require_namespace(model, int(z), "aux")
    V = model.V
    context = V[user] + aux.values @ V[aux.ids]
    return float((model.w[pos_item] - model.w[neg_item]) + context @ (V[pos_item] - V[neg_item]))


def feature_vector(user: int | None, item: int | None, aux: SparseVector) -> SparseVector:
    """x(u, i, z) with unit user and item entries; ``None`` drops that entry."""
    head = [f for f in (user, item) if f is not None and f >= 0]
    return SparseVector.one_hot(*head).union(aux)


class ItemAttributes:
    """Attribute features owned by each item, as CSR rows over ``item id - item_lo``.

    Unlike interaction context, attributes follow the item: a sampled
    negative or an evaluation candidate is scored with its own attributes.
    """

    def __init__(self, vectors: Sequence[SparseVector], item_lo: int):
        self.item_lo = int(item_lo)
        lens = np.array([len(v) for v in vectors], dtype=np.int64)
        self.ptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        np.cumsum(lens, out=self.ptr[1:])
        if len(vectors):
            self.idx = np.concatenate([v.ids for v in vectors]).astype(np.int64)
            self.val = np.concatenate([v.values for v in vectors]).astype(np.float64)
        else:
            self.idx, self.val = np.zeros(0, np.int64), np.zeros(0)

    def __len__(self):
        return len(self.ptr) - 1

    def get(self, item: int) -> SparseVector:
        r = item - self.item_lo
        return SparseVector(self.idx[self.ptr[r] : self.ptr[r + 1]], self.val[self.ptr[r] : self.ptr[r + 1]])

    def item_side(self, model: FMModel, items: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per item: (linear + attribute self-interaction terms, v_i + sum_a x_a v_a)."""
        local = np.asarray(items, dtype=np.int64) - self.item_lo
        lo, hi = self.ptr[local], self.ptr[local + 1]
        counts = hi - lo
        owner = np.repeat(np.arange(len(local)), counts)
        pos = np.repeat(lo - np.cumsum(counts) + counts, counts) + np.arange(counts.sum())
        ids, vals = self.idx[pos], self.val[pos]
        items = np.asarray(items, dtype=np.int64)
        vx = model.V[ids] * vals[:, None]
        S = model.V[items].copy()
        np.add.at(S, owner, vx)
        sq = model.V[items] ** 2
        np.add.at(sq, owner, vx * vx)
        lin = model.w[items] + np.bincount(owner, model.w[ids] * vals, minlength=len(items))
        return lin + 0.5 * (S * S - sq).sum(axis=1), S


def score_items(
    model: FMModel,
    user: int | None,
    items: np.ndarray,
    aux: SparseVector,
    attributes: ItemAttributes | None = None,
) -> np.ndarray:
    """Vectorized ``predict(x(user, item, aux))`` over many items.

    Entries of ``items`` equal to -1 stand for items the model has never
    seen; they get the score of the vector without an item entry. With
    ``attributes`` each known item also brings its own attribute features.
    """
    items = np.asarray(items, dtype=np.int64)
    base_vec = feature_vector(user, None, aux)
    base = predict(model, base_vec)
    known = items >= 0
    if known.any() and items[known].max() >= model.n:
        raise IndexError(f"item id {int(items.max())} out of range for model with n={model.n}")
    context = base_vec.values @ model.V[base_vec.ids] if len(base_vec) else np.zeros(model.k)
    safe = np.where(known, items, 0)
    if attributes is None:
        item_part = model.w[safe] + model.V[safe] @ context
    else:
        safe = np.where(known, items, attributes.item_lo)
        own, S = attributes.item_side(model, safe)
        item_part = own + S @ context
    return base + np.where(known, item_part, 0.0)
