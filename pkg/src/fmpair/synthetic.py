"""Planted datasets for tests, examples and the cross-domain check."""

from __future__ import annotations

import numpy as np

from .core import FMModel, SparseVector
from .data import Interaction


def planted_fm(n: int, k: int, seed, scale: float = 0.5) -> FMModel:
    rng = np.random.default_rng(seed)
    return FMModel(float(rng.normal(0, scale)), rng.normal(0, scale, n), rng.normal(0, scale, (n, k)))


def random_sparse(n: int, nnz: int, rng: np.random.Generator, binary: bool = False) -> SparseVector:
    ids = rng.choice(n, size=nnz, replace=False)
    values = np.ones(nnz) if binary else rng.uniform(0.5, 2.0, nnz) * rng.choice([-1.0, 1.0], nnz)
    return SparseVector(ids, values)


def planted_groups(
    n_users: int = 200,
    n_items: int = 100,
    n_groups: int = 5,
    per_user: int = 10,
    noise: float = 0.1,
    seed=0,
    domain: str | None = None,
) -> list[Interaction]:
    """Users and items split into taste groups; users mostly pick items of their own group.

    Keys are ``u<n>`` and ``i<n>``; ratings are left unset.
    """
    rng = np.random.default_rng(seed)
    item_group = np.arange(n_items) % n_groups
    out = []
    for u in range(n_users):
        g = u % n_groups
        own = np.flatnonzero(item_group == g)
        picks = set()
        while len(picks) < min(per_user, n_items):
            pool = own if rng.random() >= noise else np.arange(n_items)
            picks.add(int(rng.choice(pool)))
        out += [Interaction(f"u{u}", f"i{i}", None, domain) for i in sorted(picks)]
    return out


def planted_cross_domain(
    n_users: int = 600,
    n_target_items: int = 120,
    n_target_groups: int = 6,
    n_source_items: int = 600,
    n_source_groups: int = 30,
    target_per_user: int = 3,
    source_per_user: int = 20,
    noise: float = 0.1,
    target: str = "books",
    source: str = "music",
    seed=0,
) -> list[Interaction]:
    """Two domains linked through each user's taste.

    Every user has a source-domain taste group s; their target-domain taste
    group is ``s % n_target_groups``. Users leave many source interactions
    but only a few target ones, so a user's source history says more about
    their target taste than their own sparse target history does.
    """
    rng = np.random.default_rng(seed)
    t_group = np.arange(n_target_items) % n_target_groups
    s_group = np.arange(n_source_items) % n_source_groups
    out = []
    for u in range(n_users):
        s = int(rng.integers(n_source_groups))
        t = s % n_target_groups
        for domain, per_user, groups, g, n_items in (
            (source, source_per_user, s_group, s, n_source_items),
            (target, target_per_user, t_group, t, n_target_items),
        ):
            own = np.flatnonzero(groups == g)
            picks: set[int] = set()
            while len(picks) < per_user:
                pool = own if rng.random() >= noise else np.arange(n_items)
                picks.add(int(rng.choice(pool)))
            prefix = "t" if domain == target else "s"
            out += [Interaction(f"u{u}", f"{prefix}{i}", None, domain) for i in sorted(picks)]
    return out
