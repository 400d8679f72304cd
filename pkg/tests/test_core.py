import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmpair.core import (
    FeatureSpace,
    FMModel,
    ItemAttributes,
    SparseVector,
    feature_vector,
    init_params,
    pair_utility,
    predict,
    predict_naive,
    score_items,
)
from fmpair.errors import DomainError
from fmpair.synthetic import planted_fm, random_sparse


def brute_force_fm(w0, w, V, x):
    """Order-2 FM written straight from its definition, dense over all features."""
    dense = np.zeros(len(w))
    for j, v in x:
        dense[j] = v
    total = w0 + float(np.dot(w, dense))
    n = len(w)
    for a in range(n):
        for b in range(a + 1, n):
            total += float(np.dot(V[a], V[b])) * dense[a] * dense[b]
    return total


# SparseVector


def test_sparse_vector_is_canonical():
    x = SparseVector([5, 1, 3], [1.0, 0.0, 2.0])
    assert x.ids.tolist() == [3, 5]
    assert x.values.tolist() == [2.0, 1.0]


def test_sparse_vector_rejects_duplicates_and_negatives():
    with pytest.raises(ValueError):
        SparseVector([1, 1], [1.0, 2.0])
    with pytest.raises(ValueError):
        SparseVector([-1], [1.0])


@given(st.dictionaries(st.integers(0, 50), st.floats(-5, 5, allow_nan=False), max_size=12))
def test_sparse_vector_invariants(entries):
    x = SparseVector(list(entries), list(entries.values()))
    assert np.all(np.diff(x.ids) > 0)
    assert np.all(x.values != 0)
    assert dict(x) == {k: v for k, v in entries.items() if v != 0}


# FeatureSpace


def test_feature_space_blocks_and_bijection():
    fs = FeatureSpace(["u1", "u2"], ["a", "b", "c"])
    fs.add("aux", "genre=x")
    assert [fs.id("user", "u1"), fs.id("item", "a"), fs.id("aux", "genre=x")] == [0, 2, 5]
    for fid in range(fs.n):
        ns, key = fs.lookup(fid)
        assert fs.id(ns, key) == fid
    assert fs.add("item", "a") == 2


def test_feature_space_keeps_block_order():
    fs = FeatureSpace(["u1"], ["a"])
    with pytest.raises(DomainError):
        fs.add("user", "u2")


def test_frozen_space_rejects_new_keys():
    fs = FeatureSpace(["u"], ["i"]).freeze()
    assert fs.get("aux", "new") is None
    with pytest.raises(DomainError):
        fs.add("aux", "new")


# predict


def test_zero_model_predicts_zero():
    model = FMModel(0.0, np.zeros(4), np.zeros((4, 3)))
    assert predict(model, SparseVector([0, 2], [1.0, 3.0])) == 0.0
    assert predict_naive(model, SparseVector([0, 2], [1.0, 3.0])) == 0.0


def test_single_interaction_hand_value():
    V = np.zeros((2, 1))
    V[0, 0], V[1, 0] = 2.0, 3.0
    model = FMModel(0.0, np.zeros(2), V)
    x = SparseVector([0, 1], [1.0, 1.0])
    assert predict(model, x) == 6.0
    assert predict_naive(model, x) == 6.0


def test_predict_matches_naive_on_1000_cases():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for case in range(1000):
        model = planted_fm(10, 4, [7, case])
        x = random_sparse(10, 5, rng)
        worst = max(worst, abs(predict(model, x) - predict_naive(model, x)))
    assert worst <= 1e-10


def test_naive_matches_dense_definition():
    rng = np.random.default_rng(5)
    for case in range(50):
        model = planted_fm(8, 3, case)
        x = random_sparse(8, 4, rng)
        assert predict_naive(model, x) == pytest.approx(brute_force_fm(model.w0, model.w, model.V, x), abs=1e-12)


def test_predict_rejects_out_of_range_id():
    model = init_params(3, 2, 0.1, 0)
    with pytest.raises(IndexError, match="7"):
        predict(model, SparseVector([7], [1.0]))


def test_init_params_shapes_and_seed():
    a = init_params(6, 3, 0.1, 11)
    b = init_params(6, 3, 0.1, 11)
    assert a.w0 == 0.0 and not a.w.any()
    assert a.V.shape == (6, 3)
    assert np.array_equal(a.V, b.V)
    assert abs(a.V.std() - 0.1) < 0.08


# pair utility


def _space_model(seed=0, n_aux=2, k=3):
    fs = FeatureSpace(["u0", "u1"], ["a", "b", "c"])
    for z in range(n_aux):
        fs.add("aux", f"z{z}")
    model = planted_fm(fs.n, k, seed)
    model.space = fs
    return fs, model


def test_pair_utility_equals_score_difference():
    fs, model = _space_model()
    aux = SparseVector([5, 6], [1.0, 0.5])
    for u in (0, 1):
        for i, j in ((2, 3), (3, 4), (4, 2)):
            expected = predict(model, feature_vector(u, i, aux)) - predict(model, feature_vector(u, j, aux))
            assert pair_utility(model, u, i, j, aux) == pytest.approx(expected, abs=1e-12)


@given(st.integers(0, 1), st.integers(2, 4), st.integers(2, 4), st.integers(0, 10_000))
def test_pair_utility_antisymmetric_and_cancels(u, i, j, seed):
    _, model = _space_model(seed)
    aux = SparseVector([5], [0.7])
    g = pair_utility(model, u, i, j, aux)
    assert pair_utility(model, u, j, i, aux) == pytest.approx(-g, abs=1e-12)
    if i == j:
        assert g == 0.0
    # w0 and the user/aux-only terms cancel
    shifted = model.copy()
    shifted.w0 += 3.0
    shifted.w[u] += 2.0
    shifted.w[5] -= 1.0
    assert pair_utility(shifted, u, i, j, aux) == pytest.approx(g, abs=1e-12)


def test_pair_utility_checks_namespaces():
    _, model = _space_model()
    with pytest.raises(DomainError):
        pair_utility(model, 2, 3, 4, SparseVector())
    with pytest.raises(DomainError):
        pair_utility(model, 0, 3, 5, SparseVector())


# vectorized scoring


def test_score_items_matches_predict():
    fs, model = _space_model(3)
    aux = SparseVector([6], [1.0])
    items = np.array([2, 3, 4, -1])
    scores = score_items(model, 1, items, aux)
    for it, s in zip(items, scores):
        x = feature_vector(1, None if it < 0 else int(it), aux)
        assert s == pytest.approx(predict(model, x), abs=1e-12)


def test_score_items_with_attributes_matches_predict():
    fs, model = _space_model(4, n_aux=4)
    attrs = ItemAttributes(
        [SparseVector([5, 6], [0.5, 0.5]), SparseVector([6], [1.0]), SparseVector()], fs.offset("item")
    )
    aux = SparseVector([8], [1.0])
    items = np.array([4, 2, 3, -1])
    scores = score_items(model, 0, items, aux, attrs)
    for it, s in zip(items, scores):
        x = feature_vector(0, None if it < 0 else int(it), aux)
        if it >= 0:
            x = x.union(attrs.get(int(it)))
        assert s == pytest.approx(predict(model, x), abs=1e-12)


def test_cold_user_scores_first_order_only():
    fs, model = _space_model(5)
    scores = score_items(model, None, np.array([2, 3]), SparseVector())
    assert np.allclose(scores, model.w0 + model.w[[2, 3]])
