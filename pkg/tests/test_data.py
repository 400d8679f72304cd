from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmpair.core import FeatureSpace, ItemAttributes, SparseVector
from fmpair.data import (
    Dataset,
    FormatDescriptor,
    Interaction,
    cross_domain_split,
    dedupe,
    densify,
    kfold_indices,
    kfold_split,
    parse_csv,
    parse_item_table,
    to_implicit,
    write_csv,
    write_fold_manifest,
)
from fmpair.errors import DescriptorError, DomainError, ParseError
from fmpair.features import CrossDomainConfig, cross_domain_builder
from fmpair.synthetic import planted_cross_domain

ML_COLUMNS = FormatDescriptor(("user", "item", "rating", "timestamp"), delimiter="tab")


# parsing


def test_single_row(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("u1,i1,5\n")
    (it,) = parse_csv(p)
    assert (it.user, it.item, it.rating) == ("u1", "i1", 5.0)


def test_header_only(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("user,item,rating\n")
    assert parse_csv(p, FormatDescriptor(None, header=True)) == []


def test_header_names_columns(tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("mood\titem\tuser\nhappy\ta\tu\n")
    (it,) = parse_csv(p, FormatDescriptor(None, delimiter="\t", header=True, context=["mood"]))
    assert (it.user, it.item, it.rating, it.context) == ("u", "a", None, {"mood": "happy"})


def test_malformed_rows_report_line(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("u1,i1,5\nu2,i2\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_csv(p)
    p.write_text("u1,i1,5\n\nu2,i2,abc\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_csv(p)
    p.write_text(",i1,5\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_csv(p)


def test_descriptor_errors():
    with pytest.raises(DescriptorError):
        FormatDescriptor(("user", "rating"))
    with pytest.raises(DescriptorError):
        FormatDescriptor(("user", "item"), context=["mood"])
    with pytest.raises(DescriptorError):
        FormatDescriptor(None)


def test_movielens_counts(ml100k):
    data = parse_csv(ml100k / "u.data", ML_COLUMNS)
    assert len(data) == 100_000
    assert len({it.user for it in data}) == 943
    assert len({it.item for it in data}) == 1682


def test_item_table(tmp_path):
    p = tmp_path / "items"
    p.write_text("1|Film A|x|0|1|1\n2|Film B||1|0|0\n")
    table = parse_item_table(p, delimiter="|", flag_columns=[3, 4, 5], flag_names=["a", "b", "c"], value_columns=[2], dimension="g")
    assert table == {"1": {"g": ["b", "c", "x"]}, "2": {"g": ["a"]}}
    p.write_text("1|Film|2|0\n")
    with pytest.raises(ParseError):
        parse_item_table(p, delimiter="|", flag_columns=[2, 3])
    with pytest.raises(ParseError):
        parse_item_table(p, delimiter="|", flag_columns=[7])


def test_movielens_genres(ml100k):
    table = parse_item_table(ml100k / "u.item", delimiter="|", encoding="latin-1", flag_columns=range(5, 24), dimension="genre")
    assert len(table) == 1682
    assert sum(1 for v in table.values() if v.get("genre")) >= 1680


# implicit mapping


def test_strictly_above_mean():
    flat = [Interaction("u", f"i{n}", 4.0) for n in range(3)]
    assert to_implicit(flat) == []
    kept = to_implicit([Interaction("u", "a", 2.0), Interaction("u", "b", 5.0)])
    assert [(it.item, it.rating) for it in kept] == [("b", None)]


def test_missing_rating():
    with pytest.raises(DomainError):
        to_implicit([Interaction("u", "a")])


def test_movielens_implicit_tally(ml100k):
    data = parse_csv(ml100k / "u.data", ML_COLUMNS)
    # independent recount straight from the raw file with numpy
    raw = np.loadtxt(ml100k / "u.data", dtype=np.int64)
    users, ratings = raw[:, 0], raw[:, 2].astype(float)
    sums = np.bincount(users, weights=ratings)
    counts = np.bincount(users)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    expected = int(np.count_nonzero(ratings > means[users]))
    assert len(to_implicit(data)) == expected


def test_implicit_mapping_is_stable():
    rng = np.random.default_rng(0)
    data = [Interaction(f"u{rng.integers(5)}", f"i{n}", float(rng.integers(1, 6))) for n in range(60)]
    once = to_implicit(data)
    assert all(it.rating is None for it in once)
    # retained rows carry a constant rating, so mapping again drops everything; no positive changes identity
    again = to_implicit([Interaction(it.user, it.item, 1.0) for it in once])
    assert again == []
    assert {it.pair for it in once} <= {it.pair for it in data}


def test_dedupe_and_densify():
    data = [Interaction("u", "a"), Interaction("u", "a"), Interaction("v", "a")]
    kept = dedupe(data)
    assert len(kept) == 2 and kept[0] is data[0] and kept[1] is data[2]
    rows = [Interaction(u, i) for u in ("u1", "u2", "u3") for i in ("a", "b")] + [Interaction("u4", "a"), Interaction("u1", "c")]
    dense = densify(rows, 2)
    assert {it.user for it in dense} == {"u1", "u2", "u3"}
    assert {it.item for it in dense} == {"a", "b"}
    assert densify(rows, 1) == rows


# k-fold


def test_kfold_small():
    data = [Interaction("u", f"i{n}") for n in range(8)]
    splits = kfold_split(data, 4, 0)
    assert [(len(tr), len(te)) for tr, te in splits] == [(6, 2)] * 4


@given(st.integers(2, 10), st.integers(0, 200), st.integers(0, 1000))
def test_kfold_partition(folds, extra, seed):
    n = folds + extra
    parts = kfold_indices(n, folds, seed)
    joined = np.concatenate(parts)
    assert np.array_equal(np.sort(joined), np.arange(n))
    assert max(map(len, parts)) - min(map(len, parts)) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(parts, kfold_indices(n, folds, seed)))


def test_kfold_100k():
    assert [len(p) for p in kfold_indices(100_000, 4, 0)] == [25_000] * 4


def test_kfold_preconditions():
    with pytest.raises(DomainError):
        kfold_indices(10, 1, 0)
    with pytest.raises(DomainError):
        kfold_indices(3, 4, 0)


def test_kfold_no_leakage():
    data = dedupe(planted_cross_domain(n_users=80, seed=2))
    for train, test in kfold_split(data, 4, 1):
        assert not {it.pair for it in train} & {it.pair for it in test}


def test_fold_manifest(tmp_path):
    folds = kfold_indices(10, 2, 0)
    write_fold_manifest(tmp_path / "folds.txt", folds)
    lines = [line.split("\t") for line in (tmp_path / "folds.txt").read_text().splitlines()[1:]]
    assert sorted(int(i) for _, i in lines) == list(range(10))
    assert {int(f) for f, _ in lines} == {0, 1}


# cross-domain split


def test_cross_domain_small():
    data = [Interaction("u", f"b{n}", None, "books") for n in range(8)] + [Interaction("u", f"m{n}", None, "music") for n in range(4)]
    cfg = CrossDomainConfig("books")
    for fold in cross_domain_split(data, cfg, 4, 0):
        assert len(fold.test) == 2 and all(it.domain == "books" for it in fold.test)
        assert len(fold.train) == 6 and all(it.domain == "books" for it in fold.train)
        assert len(fold.all_train) == 6 + 4


def test_cross_domain_errors():
    with pytest.raises(DomainError):
        cross_domain_split([Interaction("u", "a", None, "music")] * 4, CrossDomainConfig("books"), 2, 0)
    with pytest.raises(DomainError):
        cross_domain_split([Interaction("u", "a")] * 4, CrossDomainConfig("books"), 2, 0)


def test_cross_domain_leakage_scan():
    data = dedupe(planted_cross_domain(n_users=150, seed=4))
    cfg = CrossDomainConfig("books", scheme="binary")
    for fold in cross_domain_split(data, cfg, 4, 0):
        test_pairs = {it.pair for it in fold.test}
        assert not test_pairs & {it.pair for it in fold.train}
        assert not test_pairs & {it.pair for it in fold.source}
        built = Dataset.from_interactions(fold.train, cross_domain_builder(cfg, fold.source))
        history_items = {key.split(":", 1)[1] for key in built.space.keys("aux")}
        assert not history_items & {it.item for it in fold.test}
        assert all(key.startswith("music:") for key in built.space.keys("aux"))


# round trip and Dataset


@given(
    st.lists(
        st.tuples(
            st.text("abcxyz019", min_size=1, max_size=5),
            st.text("abcxyz019", min_size=1, max_size=5),
            st.one_of(st.none(), st.floats(-10, 10, allow_nan=False)),
        ),
        max_size=20,
    )
)
def test_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "rt.csv"
    data = [Interaction(u, i, r) for u, i, r in rows]
    write_csv(data, path)
    back = parse_csv(path)
    assert Counter((it.user, it.item, it.rating) for it in back) == Counter((it.user, it.item, it.rating) for it in data)


def test_round_trip_with_domain_and_context(tmp_path):
    desc = FormatDescriptor(("user", "item", "rating", "domain", "mood"), delimiter="\t", context=["mood"])
    data = [Interaction("u1", "a", 1.5, "books", {"mood": "happy"}), Interaction("u2", "b", 3.0, "music", {"mood": "sad"})]
    write_csv(data, tmp_path / "d.tsv", desc)
    back = parse_csv(tmp_path / "d.tsv", desc)
    assert back == data and [it.context for it in back] == [it.context for it in data]


def test_dataset_indexing():
    data = Dataset.from_interactions(
        [Interaction("u1", "a"), Interaction("u2", "b"), Interaction("u1", "c"), Interaction("u1", "a")]
    )
    assert len(data) == 3
    fs = data.space
    assert data.positives(fs.id("user", "u1")).tolist() == sorted([fs.id("item", "a"), fs.id("item", "c")])
    assert data.is_positive(np.array([0, 0, 1]), np.array([2, 3, 2])).tolist() == [True, False, False]
    for r in range(len(data)):
        assert data.items[r] in data.positives(data.users[r])
        assert data.item_lo <= data.items[r] < data.item_hi


def test_dataset_validates_side_inputs():
    fs = FeatureSpace(["u"], ["a", "b"], ["z"])
    with pytest.raises(DomainError):
        Dataset([Interaction("u", "a")], fs, [SparseVector([1], [1.0])])
    with pytest.raises(DomainError):
        Dataset([Interaction("u", "a")], fs, attributes=ItemAttributes([SparseVector()], 1))
    with pytest.raises(DomainError):
        Dataset([Interaction("u", "a")], fs, attributes=ItemAttributes([SparseVector([0], [1.0]), SparseVector()], 1))
