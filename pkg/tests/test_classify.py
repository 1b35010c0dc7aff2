import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermochaos.classify import (
    GbdtConfig,
    GbdtModel,
    Tree,
    confusion_metrics,
    fuse,
    predict_proba,
    stratified_folds,
    stratified_kfold,
    train,
)
from thermochaos.errors import (
    DegenerateDataset,
    EmptyInput,
    FormatError,
    LengthMismatch,
    NonFiniteFeature,
    TooFewSamplesPerClass,
)
from oracles import best_stump


def separable(n=200, seed=0, tilt=0.5):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    y = (X[:, 0] + tilt * X[:, 1] > 0).astype(int)
    # push points off the boundary so the classes have a margin
    X[:, 0] += np.where(y == 1, 0.1, -0.1)
    return X, y


def node_members(tree, X):
    """Row indices reaching each node."""
    members = {0: np.arange(len(X))}
    for i, f in enumerate(tree.feature):
        if f < 0:
            continue
        idx = members[i]
        go_left = X[idx, f] < tree.threshold[i]
        members[tree.left[i]] = idx[go_left]
        members[tree.right[i]] = idx[~go_left]
    return members


# ---- fusion

def test_fuse_lengths_and_order():
    deep, hand = np.arange(2048.0), np.array([1.1, 2.2, 3.3, 4.4])
    f = fuse(deep, hand)
    assert f.shape == (2052,)
    np.testing.assert_array_equal(f[2048:], hand)
    np.testing.assert_array_equal(f[:2048], deep)


def test_fuse_errors_and_ablation():
    with pytest.raises(LengthMismatch):
        fuse(np.zeros(2047), np.zeros(4))
    with pytest.raises(LengthMismatch):
        fuse(np.zeros(2048), np.zeros(3))
    np.testing.assert_array_equal(fuse(None, [1, 2, 3, 4]), [1, 2, 3, 4])
    assert fuse(np.zeros((5, 16)), np.zeros((5, 4)), deep_dim=16).shape == (5, 20)


# ---- training

def test_stump_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    x = np.r_[rng.uniform(0, 1, 20), rng.uniform(2, 3, 20)]
    y = np.r_[np.zeros(20), np.ones(20)].astype(int)
    m = train(x[:, None], y, GbdtConfig(n_rounds=1, max_depth=1))
    tree = m.trees[0]
    gain, thr = best_stump(x, y)
    assert tree.feature[0] == 0
    assert tree.threshold[0] == pytest.approx(thr, abs=1e-15)
    assert x[y == 0].max() < tree.threshold[0] < x[y == 1].min()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(6, 40))
def test_stump_matches_oracle_noisy(seed, n):
    rng = np.random.default_rng(seed)
    x = np.round(rng.normal(size=n), 2)
    y = (x + rng.normal(scale=0.7, size=n) > 0).astype(int)
    if y.sum() < 2 or n - y.sum() < 2:
        return
    m = train(x[:, None], y, GbdtConfig(n_rounds=1, max_depth=1))
    gain, thr = best_stump(x, y)
    if gain > 0:
        assert m.trees[0].threshold[0] == pytest.approx(thr, abs=1e-12)
    else:
        assert m.trees[0].feature[0] == -1


def test_zero_rounds_predicts_prior():
    X = np.random.default_rng(0).normal(size=(10, 3))
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
    m = train(X, y, GbdtConfig(n_rounds=0))
    assert m.base_score == pytest.approx(math.log(0.3 / 0.7))
    np.testing.assert_allclose(predict_proba(m, X), 0.3)


def test_loss_non_increasing():
    X, y = separable(200, 1)
    X = X + np.random.default_rng(2).normal(scale=0.3, size=X.shape)
    m = train(X, y, GbdtConfig(n_rounds=200))
    loss = np.array(m.train_loss)
    assert len(loss) == 201
    assert np.all(np.diff(loss) <= 1e-12)


def test_separable_fit_is_correct():
    X, y = separable(100, 3)
    m = train(X, y)
    p = predict_proba(m, X)
    assert np.all((p >= 0.5) == (y == 1))
    assert np.all((p > 0) & (p < 1))


def test_leaf_bound_and_valid_features():
    X, y = separable(200, 4)
    cfg = GbdtConfig(n_rounds=20, max_depth=3)
    m = train(X, y, cfg)
    for t in m.trees:
        assert t.n_leaves <= 2 ** cfg.max_depth
        assert all(-1 <= f < X.shape[1] for f in t.feature)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_thresholds_between_observed_values(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(40, 3)), 1)
    y = rng.integers(0, 2, 40)
    y[:2], y[2:4] = 0, 1
    m = train(X, y, GbdtConfig(n_rounds=5, max_depth=3))
    for t in m.trees:
        members = node_members(t, X)
        for i, (f, thr) in enumerate(zip(t.feature, t.threshold)):
            if f < 0:
                continue
            col = X[members[i], f]
            lo, hi = col[col < thr].max(), col[col >= thr].min()
            assert lo < thr < hi
            assert thr == pytest.approx(0.5 * (lo + hi), abs=1e-15)


def test_deterministic_and_order_invariant():
    X, y = separable(120, 5)
    X = X + np.random.default_rng(6).normal(scale=0.4, size=X.shape)
    cfg = GbdtConfig(n_rounds=30)
    a, b = train(X, y, cfg, seed=3), train(X, y, cfg, seed=3)
    assert a.to_json() == b.to_json()
    perm = np.random.default_rng(7).permutation(len(y))
    c = train(X[perm], y[perm], cfg, seed=3)
    for ta, tc in zip(a.trees, c.trees):
        assert ta.feature == tc.feature
        np.testing.assert_allclose(ta.threshold, tc.threshold, rtol=0, atol=0)
    np.testing.assert_allclose(predict_proba(a, X), predict_proba(c, X), atol=1e-12)


def test_training_validation():
    X = np.zeros((4, 2))
    with pytest.raises(DegenerateDataset):
        train(X, [0, 0, 0, 1])
    with pytest.raises(DegenerateDataset):
        train(X, [0, 1, 2, 1])
    with pytest.raises(NonFiniteFeature):
        train(np.array([[0.0], [np.nan], [1.0], [2.0]]), [0, 0, 1, 1])
    with pytest.raises(LengthMismatch):
        train(X, [0, 1, 0])


def test_predict_checks_length():
    X, y = separable(40, 8)
    m = train(X, y, GbdtConfig(n_rounds=3))
    with pytest.raises(LengthMismatch):
        predict_proba(m, np.zeros(3))
    assert 0 < predict_proba(m, X[0]) < 1


def test_positive_leaf_raises_probability():
    m = GbdtModel(GbdtConfig(), base_score=-0.2, n_features=1)
    x = np.array([[0.0]])
    p0 = predict_proba(m, x)[0]
    assert p0 == pytest.approx(1 / (1 + math.exp(0.2)))
    t = Tree()
    t._add(value=0.7)
    m.trees.append(t)
    assert predict_proba(m, x)[0] > p0


def test_model_json_roundtrip():
    X, y = separable(60, 9)
    m = train(X, y, GbdtConfig(n_rounds=5))
    m.meta = {"mode": "hand"}
    back = GbdtModel.from_json(m.to_json())
    np.testing.assert_array_equal(back.decision_function(X), m.decision_function(X))
    assert back.meta == {"mode": "hand"} and back.config == m.config
    with pytest.raises(FormatError):
        GbdtModel.from_json('{"format": "other"}')
    with pytest.raises(FormatError):
        GbdtModel.from_json("not json")
    doc = m.to_json().replace('"n_features": 2', '"n_features": 0')
    with pytest.raises(FormatError):
        GbdtModel.from_json(doc)


# ---- evaluation

def test_confusion_examples():
    r = confusion_metrics([1, 1, 0, 0], [1, 0, 0, 1])
    assert (r.accuracy, r.sensitivity, r.specificity) == (50, 50, 50)
    r = confusion_metrics([1, 0, 1, 0], [1, 0, 1, 0])
    assert (r.accuracy, r.sensitivity, r.specificity) == (100, 100, 100)
    r = confusion_metrics([1, 1, 0, 0], [0, 0, 0, 0])
    assert (r.sensitivity, r.specificity) == (0, 100)


def test_confusion_undefined_and_errors():
    r = confusion_metrics([0, 0], [0, 1])
    assert math.isnan(r.sensitivity) and r.undefined == ("sensitivity",)
    assert r.specificity == 50
    with pytest.raises(LengthMismatch):
        confusion_metrics([0, 1], [0])
    with pytest.raises(EmptyInput):
        confusion_metrics([], [])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_confusion_ranges(pairs):
    yt, yp = zip(*pairs)
    r = confusion_metrics(yt, yp)
    for v in (r.accuracy, r.sensitivity, r.specificity):
        assert math.isnan(v) or 0 <= v <= 100
    assert r.tp + r.tn + r.fp + r.fn == len(pairs)


def test_folds_stratified_small():
    f = stratified_folds([0, 0, 1, 1], k=2, seed=0)
    for k in (0, 1):
        assert sorted(np.array([0, 0, 1, 1])[f == k]) == [0, 1]


@given(st.integers(10, 80), st.integers(10, 80), st.integers(2, 10), st.integers(0, 1000))
def test_folds_balanced_and_seeded(n0, n1, k, seed):
    y = np.r_[np.zeros(n0), np.ones(n1)].astype(int)
    f = stratified_folds(y, k, seed)
    np.testing.assert_array_equal(f, stratified_folds(y, k, seed))
    for c in (0, 1):
        counts = np.bincount(f[y == c], minlength=k)
        assert counts.max() - counts.min() <= 1


def test_folds_synthetic_kept_out():
    y = np.array([0] * 10 + [1] * 10)
    syn = np.zeros(20, bool)
    syn[[0, 1, 10, 11]] = True
    f = stratified_folds(y, 4, 0, syn)
    assert np.all(f[syn] == -1) and np.all(f[~syn] >= 0)
    with pytest.raises(TooFewSamplesPerClass):
        stratified_folds(y[:12], 5, 0)


def test_cv_separable_and_deterministic():
    # separable by a single split, so the stump oracle has a clean margin
    X, y = separable(200, 10, tilt=0.0)
    r = stratified_kfold(X, y, 5, seed=7)
    assert r.mean["accuracy"] >= 99.0
    assert len(r.folds) == 5
    again = stratified_kfold(X, y, 5, seed=7)
    assert r.as_dict() == again.as_dict()
    accs = [f.accuracy for f in r.folds]
    assert r.std["accuracy"] == pytest.approx(np.std(accs))


def test_cv_synthetic_only_trains():
    X, y = separable(100, 11)
    syn = np.zeros(100, bool)
    syn[:20] = True
    r = stratified_kfold(X, y, 5, GbdtConfig(n_rounds=10), seed=0, synthetic=syn)
    scored = sum(f.tp + f.tn + f.fp + f.fn for f in r.folds)
    assert scored == 80
    r2 = stratified_kfold(X, y, 5, GbdtConfig(n_rounds=10), seed=0, synthetic=syn,
                          include_synthetic=True)
    assert sum(f.tp + f.tn + f.fp + f.fn for f in r2.folds) == 100
