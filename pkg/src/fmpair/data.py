"""Interaction parsing, implicit mapping, cross-validation splits and the training Dataset."""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import FeatureSpace, ItemAttributes, SparseVector
from .errors import DescriptorError, DomainError, ParseError, UntrainableDatasetError

ROLES = ("user", "item", "rating", "domain")


@dataclass(frozen=True)
class Interaction:
    user: str
    item: str
    rating: float | None = None
    domain: str | None = None
    context: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.user or not self.item:
            raise DomainError("user and item keys must be nonempty")

    @property
    def pair(self) -> tuple[str, str]:
        return self.user, self.item


@dataclass
class FormatDescriptor:
    """Column layout of a delimited interaction file.

    ``columns`` names every field in file order. The names user, item,
    rating and domain have fixed meaning; names listed in ``context`` are
    kept as raw context values; anything else is ignored. With
    ``header=True`` and no ``columns``, names come from the header line.
    """

    columns: Sequence[str] | None = ("user", "item", "rating")
    delimiter: str = ","
    header: bool = False
    context: Sequence[str] = ()
    encoding: str = "utf-8"

    def __post_init__(self):
        if self.delimiter in ("tab", "\\t"):
            self.delimiter = "\t"
        if self.columns is None and not self.header:
            raise DescriptorError("columns must be given when the file has no header")
        if self.columns is not None:
            self.validate(self.columns)

    def validate(self, columns):
        for role in ("user", "item"):
            if role not in columns:
                raise DescriptorError(f"descriptor has no {role!r} column")
        missing = [c for c in self.context if c not in columns]
        if missing:
            raise DescriptorError(f"context columns {missing} not among columns {list(columns)}")


def parse_csv(path, descriptor: FormatDescriptor | None = None) -> list[Interaction]:
    descriptor = descriptor or FormatDescriptor()
    out = []
    with open(path, newline="", encoding=descriptor.encoding) as fh:
        reader = csv.reader(fh, delimiter=descriptor.delimiter)
        columns = descriptor.columns
        if descriptor.header:
            head = next(reader, None)
            if columns is None:
                if head is None:
                    raise DescriptorError("header expected but file is empty")
                columns = [h.strip() for h in head]
                descriptor.validate(columns)
        pos = {name: i for i, name in enumerate(columns)}
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(columns):
                raise ParseError(f"expected {len(columns)} fields, found {len(row)}", line)
            rating = None
            if "rating" in pos and row[pos["rating"]].strip():
                try:
                    rating = float(row[pos["rating"]])
                except ValueError:
                    raise ParseError(f"rating {row[pos['rating']]!r} is not a number", line) from None
            user, item = row[pos["user"]].strip(), row[pos["item"]].strip()
            if not user or not item:
                raise ParseError("empty user or item key", line)
            domain = row[pos["domain"]].strip() if "domain" in pos else None
            context = {c: row[pos[c]].strip() for c in descriptor.context}
            out.append(Interaction(user, item, rating, domain, context))
    return out


def parse_item_table(
    path,
    item_column: int = 0,
    delimiter: str = ",",
    encoding: str = "utf-8",
    header: bool = False,
    flag_columns: Sequence[int] = (),
    flag_names: Sequence[str] = (),
    value_columns: Sequence[int] = (),
    dimension: str = "attr",
) -> dict[str, dict[str, list[str]]]:
    """Per-item attribute values from a delimited item table.

    Flag columns hold 0/1 indicators (a set flag contributes its name from
    ``flag_names``, or its column index); value columns contribute their
    nonempty cell text. All values land in one attribute ``dimension``.
    """
    names = list(flag_names) or [str(c) for c in flag_columns]
    wanted = [item_column, *flag_columns, *value_columns]
    out: dict[str, dict[str, list[str]]] = {}
    with open(path, newline="", encoding=encoding) as fh:
        reader = csv.reader(fh, delimiter=delimiter, quoting=csv.QUOTE_NONE)
        if header:
            next(reader, None)
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) <= max(wanted):
                raise ParseError(f"expected at least {max(wanted) + 1} fields, found {len(row)}", reader.line_num)
            values = []
            for name, c in zip(names, flag_columns):
                cell = row[c].strip()
                if cell not in ("0", "1", ""):
                    raise ParseError(f"flag column {c} holds {cell!r}, expected 0 or 1", reader.line_num)
                if cell == "1":
                    values.append(name)
            values += [row[c].strip() for c in value_columns if row[c].strip()]
            out[row[item_column].strip()] = {dimension: values}
    return out


def write_csv(data: Sequence[Interaction], path, descriptor: FormatDescriptor | None = None):
    descriptor = descriptor or FormatDescriptor()
    columns = descriptor.columns
    if columns is None:
        columns = ["user", "item", "rating", "domain", *descriptor.context]
    with open(path, "w", newline="", encoding=descriptor.encoding) as fh:
        writer = csv.writer(fh, delimiter=descriptor.delimiter, lineterminator="\n")
        if descriptor.header:
            writer.writerow(columns)
        for it in data:
            row = []
            for c in columns:
                if c == "user":
                    row.append(it.user)
                elif c == "item":
                    row.append(it.item)
                elif c == "rating":
                    row.append("" if it.rating is None else repr(it.rating))
                elif c == "domain":
                    row.append(it.domain or "")
                else:
                    row.append(it.context.get(c, ""))
            writer.writerow(row)


def to_implicit(data: Sequence[Interaction]) -> list[Interaction]:
    """Keep interactions rated strictly above their user's mean rating."""
    totals: dict[str, list[float]] = defaultdict(lambda: [0.0, 0])
    for it in data:
        if it.rating is None:
            raise DomainError(f"interaction {it.pair} has no rating")
        acc = totals[it.user]
        acc[0] += it.rating
        acc[1] += 1
    means = {u: s / c for u, (s, c) in totals.items()}
    return [replace(it, rating=None) for it in data if it.rating > means[it.user]]


def dedupe(data: Sequence[Interaction]) -> list[Interaction]:
    """Collapse repeated (user, item) pairs, keeping the first occurrence."""
    seen = set()
    out = []
    for it in data:
        if it.pair not in seen:
            seen.add(it.pair)
            out.append(it)
    return out


def densify(data: Sequence[Interaction], min_count: int) -> list[Interaction]:
    """Repeatedly drop users and items with fewer than ``min_count`` interactions."""
    data = list(data)
    if min_count <= 1:
        return data
    while True:
        users = Counter(it.user for it in data)
        items = Counter(it.item for it in data)
        kept = [it for it in data if users[it.user] >= min_count and items[it.item] >= min_count]
        if len(kept) == len(data):
            return kept
        data = kept


def kfold_indices(n: int, folds: int, seed) -> list[np.ndarray]:
    if folds < 2 or n < folds:
        raise DomainError(f"need folds >= 2 and at least `folds` rows (folds={folds}, n={n})")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def kfold_split(data: Sequence[Interaction], folds: int, seed) -> list[tuple[list[Interaction], list[Interaction]]]:
    data = list(data)
    out = []
    for test_idx in kfold_indices(len(data), folds, seed):
        mask = np.zeros(len(data), dtype=bool)
        mask[test_idx] = True
        train = [it for it, m in zip(data, mask) if not m]
        test = [it for it, m in zip(data, mask) if m]
        out.append((train, test))
    return out


@dataclass
class CrossDomainFold:
    train: list[Interaction]
    test: list[Interaction]
    source: list[Interaction]
    test_index: np.ndarray

    @property
    def all_train(self) -> list[Interaction]:
        """Training set of the arm that merges every domain into one dataset."""
        return self.train + self.source


def cross_domain_split(data: Sequence[Interaction], cfg, folds: int, seed) -> list[CrossDomainFold]:
    """Fold only target-domain interactions; source domains stay whole.

    ``cfg`` needs ``target`` and ``sources`` attributes; an empty
    ``sources`` means every non-target domain.
    """
    for it in data:
        if it.domain is None:
            raise DomainError(f"interaction {it.pair} has no domain")
    target = [it for it in data if it.domain == cfg.target]
    if not target:
        raise DomainError(f"target domain {cfg.target!r} absent from data")
    sources = set(cfg.sources) if cfg.sources else {it.domain for it in data} - {cfg.target}
    source = [it for it in data if it.domain in sources]
    out = []
    for test_idx in kfold_indices(len(target), folds, seed):
        mask = np.zeros(len(target), dtype=bool)
        mask[test_idx] = True
        out.append(
            CrossDomainFold(
                train=[it for it, m in zip(target, mask) if not m],
                test=[it for it, m in zip(target, mask) if m],
                source=list(source),
                test_index=test_idx,
            )
        )
    return out


def write_fold_manifest(path, folds: Sequence[np.ndarray]):
    with open(path, "w") as fh:
        fh.write("# fold\tinteraction_index (test membership)\n")
        for f, idx in enumerate(folds):
            for i in idx:
                fh.write(f"{f}\t{int(i)}\n")


class Dataset:
    """Positive interactions indexed for training.

    Holds per-interaction user/item feature ids, the auxiliary vectors as a
    CSR triple, each user's sorted positive items and, optionally, per-item
    attribute features. The item universe is the item block of ``space``.
    """

    def __init__(
        self,
        interactions: Sequence[Interaction],
        space: FeatureSpace,
        aux: Sequence[SparseVector] | None = None,
        attributes: ItemAttributes | None = None,
    ):
        self.interactions = list(interactions)
        self.space = space
        m = len(self.interactions)
        self.users = np.array([space.id("user", it.user) for it in self.interactions], dtype=np.int64)
        self.items = np.array([space.id("item", it.item) for it in self.interactions], dtype=np.int64)
        aux = list(aux) if aux is not None else [SparseVector()] * m
        if len(aux) != m:
            raise ValueError("one aux vector per interaction required")
        lens = np.array([len(a) for a in aux], dtype=np.int64)
        self.aux_ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(lens, out=self.aux_ptr[1:])
        self.aux_idx = np.concatenate([a.ids for a in aux]).astype(np.int64) if m else np.zeros(0, np.int64)
        self.aux_val = np.concatenate([a.values for a in aux]).astype(np.float64) if m else np.zeros(0)
        if self.aux_idx.size:
            aux_range = space.range("aux")
            if self.aux_idx.min() < aux_range.start or self.aux_idx.max() >= aux_range.stop:
                raise DomainError("aux vectors must hold only aux-namespace ids")

        self.item_lo = space.offset("item")
        self.item_hi = self.item_lo + space.n_items
        self.n_users = space.n_users
        self.n_items = space.n_items
        # sorted (user, item) keys; also serve membership tests
        keys = np.unique(self.users * self.n_items + (self.items - self.item_lo))
        self.pos_keys = keys
        counts = np.bincount(keys // max(self.n_items, 1), minlength=self.n_users)
        self.user_ptr = np.zeros(self.n_users + 1, dtype=np.int64)
        np.cumsum(counts, out=self.user_ptr[1:])
        self.user_items = (keys % max(self.n_items, 1)) + self.item_lo
        if attributes is not None:
            if len(attributes) != self.n_items or attributes.item_lo != self.item_lo:
                raise DomainError("item attributes must cover exactly the item block")
            if attributes.idx.size and (attributes.idx.min() < self.item_hi or attributes.idx.max() >= space.n):
                raise DomainError("item attributes must hold only aux-namespace ids")
        self.attributes = attributes

    @classmethod
    def from_interactions(
        cls,
        interactions: Sequence[Interaction],
        aux_builder: Callable[[Interaction, FeatureSpace], SparseVector] | None = None,
        space: FeatureSpace | None = None,
        item_attributes: Callable[[str, FeatureSpace], SparseVector] | None = None,
    ) -> Dataset:
        """Dedupe, register users and items in first-seen order, then build aux vectors.

        ``item_attributes(item_key, space)`` gives each item's attribute vector.
        """
        interactions = dedupe(interactions)
        if space is None:
            users = dict.fromkeys(it.user for it in interactions)
            items = dict.fromkeys(it.item for it in interactions)
            space = FeatureSpace(users, items)
        attributes = None
        if item_attributes is not None:
            vectors = [item_attributes(key, space) for key in space.keys("item")]
            attributes = ItemAttributes(vectors, space.offset("item"))
        aux = [aux_builder(it, space) for it in interactions] if aux_builder else None
        return cls(interactions, space, aux, attributes)

    def __len__(self):
        return len(self.interactions)

    def aux(self, row: int) -> SparseVector:
        lo, hi = self.aux_ptr[row], self.aux_ptr[row + 1]
        return SparseVector(self.aux_idx[lo:hi], self.aux_val[lo:hi])

    def positives(self, user: int) -> np.ndarray:
        """Sorted item feature ids of ``user`` (a user feature id)."""
        return self.user_items[self.user_ptr[user] : self.user_ptr[user + 1]]

    def is_positive(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        keys = np.asarray(users) * self.n_items + (np.asarray(items) - self.item_lo)
        pos = np.searchsorted(self.pos_keys, keys)
        pos = np.minimum(pos, len(self.pos_keys) - 1)
        return self.pos_keys[pos] == keys if len(self.pos_keys) else np.zeros(keys.shape, bool)

    def trainable_rows(self) -> np.ndarray:
        """Rows whose user leaves at least one item unobserved."""
        if getattr(self, "_trainable", None) is None:
            full = np.diff(self.user_ptr) >= self.n_items
            self._trainable = np.flatnonzero(~full[self.users])
        if self._trainable.size == 0:
            raise UntrainableDatasetError("every user has interacted with every item; no negatives exist")
        return self._trainable

    def item_counts(self) -> np.ndarray:
        return np.bincount(self.items - self.item_lo, minlength=self.n_items)
