"""Auxiliary feature vectors: interaction context and source-domain history."""

from __future__ import annotations

import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import FeatureSpace, SparseVector
from .errors import BinError, DomainError, SchemaError


@dataclass
class ContextDimension:
    """A context column. ``bins`` (strictly increasing edges) makes it continuous-binned."""

    name: str
    kind: str = "categorical"
    bins: Sequence[float] | None = None
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in ("categorical", "binned"):
            raise SchemaError(f"dimension {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "binned":
            edges = np.asarray(self.bins, dtype=np.float64)
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise SchemaError(f"dimension {self.name!r}: bins need >= 2 strictly increasing edges")
            self.bins = edges

    def keys(self, raw) -> list[str]:
        values = raw if isinstance(raw, (list, tuple, set, frozenset)) else [raw]
        if self.kind == "categorical":
            return [f"{self.name}={v}" for v in values]
        out = []
        for v in values:
            x = float(v)
            b = int(np.searchsorted(self.bins, x, side="right")) - 1
            if not 0 <= b < len(self.bins) - 1:
                raise BinError(f"dimension {self.name!r}: value {x} outside [{self.bins[0]}, {self.bins[-1]})")
            out.append(f"{self.name}@[{self.bins[b]:g},{self.bins[b + 1]:g})")
        return out


@dataclass
class ContextSchema:
    dimensions: list[ContextDimension] = field(default_factory=list)
    normalize: bool = False

    def __post_init__(self):
        self._by_name = {d.name: d for d in self.dimensions}

    def __getitem__(self, name) -> ContextDimension:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown context dimension {name!r}") from None


def build_context_vector(schema: ContextSchema, raw: Mapping[str, object], space: FeatureSpace) -> SparseVector:
    """One aux entry per (dimension, value); continuous values land in their bin.

    New values are registered in ``space``; once the space is frozen,
    unseen values are dropped.
    """
    acc: dict[int, float] = defaultdict(float)
    for name, value in raw.items():
        dim = schema[name]
        for key in dim.keys(value):
            fid = space.get("aux", key) if space.frozen else space.add("aux", key)
            if fid is not None:
                acc[fid] += dim.weight
    vec = SparseVector(list(acc), list(acc.values()))
    if schema.normalize and len(vec):
        vec = SparseVector(vec.ids, vec.values / vec.values.sum())
    return vec


def context_builder(schema: ContextSchema, dimensions: Sequence[str] | None = None):
    """``Dataset.from_interactions`` hook reading ``interaction.context``."""
    names = list(dimensions) if dimensions is not None else [d.name for d in schema.dimensions]

    def build(interaction, space):
        raw = {n: interaction.context[n] for n in names if n in interaction.context}
        return build_context_vector(schema, raw, space)

    return build


def attribute_builder(schema: ContextSchema, table: Mapping[str, Mapping[str, object]]):
    """``item_attributes`` hook for ``Dataset.from_interactions``.

    ``table`` maps item keys to raw attribute values; items missing from it
    get an empty vector.
    """

    def build(item, space):
        return build_context_vector(schema, table.get(item, {}), space)

    return build


@dataclass
class CrossDomainConfig:
    target: str
    sources: Sequence[str] = ()
    scheme: str = "count"
    max_features: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("binary", "count"):
            raise DomainError(f"scheme must be 'binary' or 'count', got {self.scheme!r}")
        if self.max_features < 1:
            raise DomainError("max_features must be >= 1")
        if self.target in self.sources:
            raise DomainError(f"target domain {self.target!r} is also listed as a source")

    def is_source(self, domain) -> bool:
        return domain != self.target and (not self.sources or domain in self.sources)


def user_rng(seed, user) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(str(user).encode())])


def build_cross_domain_vector(
    cfg: CrossDomainConfig,
    user_history: Mapping[str, Sequence[str]],
    space: FeatureSpace,
    rng: np.random.Generator,
) -> SparseVector:
    """Aux entries for up to ``cfg.max_features`` random source items per domain.

    With the count scheme each value is 1 / |history in that domain|, the
    full history size even when fewer items are selected.
    """
    ids, values = [], []
    for domain in sorted(user_history):
        if not cfg.is_source(domain):
            continue
        items = list(dict.fromkeys(user_history[domain]))
        if not items:
            continue
        chosen = rng.choice(len(items), size=min(cfg.max_features, len(items)), replace=False)
        value = 1.0 if cfg.scheme == "binary" else 1.0 / len(items)
        for c in np.sort(chosen):
            key = f"{domain}:{items[c]}"
            fid = space.get("aux", key) if space.frozen else space.add("aux", key)
            if fid is not None:
                ids.append(fid)
                values.append(value)
    return SparseVector(ids, values)


def user_histories(interactions) -> dict[str, dict[str, list[str]]]:
    hist: dict[str, dict[str, list[str]]] = defaultdict(lambda: defaultdict(list))
    for it in interactions:
        hist[it.user][it.domain].append(it.item)
    return hist


def cross_domain_builder(cfg: CrossDomainConfig, source_interactions):
    """``Dataset.from_interactions`` hook; one cached vector per user, seeded per user."""
    hist = user_histories(it for it in source_interactions if cfg.is_source(it.domain))
    cache: dict[str, SparseVector] = {}

    def build(interaction, space):
        if not cache and not space.frozen:
            # register every user's selection up front so held-out users keep theirs
            for user in hist:
                cache[user] = build_cross_domain_vector(cfg, hist[user], space, user_rng(cfg.seed, user))
        vec = cache.get(interaction.user)
        if vec is None:
            vec = build_cross_domain_vector(cfg, hist.get(interaction.user, {}), space, user_rng(cfg.seed, interaction.user))
            cache[interaction.user] = vec
        return vec

    return build
