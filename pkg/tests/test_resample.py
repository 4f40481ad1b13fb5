"""Oversampler and neighbor-index tests.

Convexity recovery re-derives each synthetic row's interpolation
coefficient from candidate seed pairs instead of trusting the sampler's
bookkeeping, so duplicated or reordered rows would be caught.
"""

from __future__ import annotations

import warnings

import numpy as np
import pytest

from mogan.dataio import LabeledDataset
from mogan.resample import (NeighborIndex, ResampleError, adasyn,
                            adasyn_weights, apply_plan, balance_plan,
                            borderline_labels, borderline_smote, knn,
                            knn_indices, oversample_class, random_oversample,
                            smote)


def square_corners():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return NeighborIndex(pts)


def brute_force_knn(points, query, k):
    d = np.sqrt(((points - query) ** 2).sum(axis=1))
    order = np.lexsort((np.arange(len(points)), d))[:k]
    return [(int(i), float(d[i])) for i in order]


def two_cluster_dataset(rng, n_major=30, n_minor=12, dim=4):
    major = rng.normal(0.0, 1.0, size=(n_major, dim))
    minor = rng.normal(2.5, 1.0, size=(n_minor, dim))
    feats = np.vstack([major, minor])
    labels = np.array([0] * n_major + [1] * n_minor)
    return LabeledDataset(feats, labels, ["normal", "fault"])


# ---------------------------------------------------------------------------
# neighbor index


def test_knn_nearest_corner():
    idx = square_corners()
    got = knn(idx, np.array([0.4, 0.0]), 1)
    assert got == [(0, pytest.approx(0.4))]


def test_knn_tie_prefers_lower_index():
    idx = square_corners()
    got = knn(idx, np.array([0.5, 0.0]), 2)
    assert [i for i, _ in got] == [0, 1]


def test_knn_full_ordering():
    idx = square_corners()
    got = knn(idx, np.array([0.1, 0.2]), 4)
    dists = [d for _, d in got]
    assert dists == sorted(dists)
    assert sorted(i for i, _ in got) == [0, 1, 2, 3]


def test_knn_validation():
    idx = square_corners()
    with pytest.raises(ResampleError):
        knn(idx, np.array([0.0, 0.0]), 5)
    with pytest.raises(ResampleError):
        knn(idx, np.array([0.0, 0.0]), 0)
    with pytest.raises(ResampleError):
        knn(idx, np.array([0.0, 0.0, 0.0]), 1)
    with pytest.raises(ResampleError):
        NeighborIndex(np.zeros((0, 2)))


def test_knn_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        dim = int(rng.integers(1, 4))
        # quantized coordinates force frequent distance ties
        pts = rng.integers(0, 3, size=(n, dim)).astype(float)
        q = rng.integers(0, 3, size=dim).astype(float)
        k = int(rng.integers(1, n + 1))
        idx = NeighborIndex(pts)
        assert knn(idx, q, k) == pytest.approx(brute_force_knn(pts, q, k))


def test_knn_indices_excludes_self():
    pts = np.array([[0.0], [1.0], [2.0]])
    got = knn_indices(pts, pts, 1, exclude_self=True)
    assert got.tolist() == [[1], [0], [1]]


# ---------------------------------------------------------------------------
# SMOTE


def test_smote_two_point_segment():
    ds = LabeledDataset([[0.0, 0.0], [1.0, 1.0], [9.0, 9.0]],
                        [1, 1, 0], ["normal", "fault"])
    new = smote(ds, label=1, n_new=40, k=5, seed=0)
    assert new.shape == (40, 2)
    # every synthetic point lies on the segment between the two fault rows
    lam = new[:, 0]
    assert np.allclose(new[:, 1], lam)
    assert np.all((lam >= 0.0) & (lam <= 1.0))


def test_smote_duplicate_class_gives_copies():
    ds = LabeledDataset([[3.0, 4.0], [3.0, 4.0], [0.0, 0.0]],
                        [1, 1, 0], ["normal", "fault"])
    new = smote(ds, label=1, n_new=10, k=5, seed=1)
    assert np.all(new == [3.0, 4.0])


def test_smote_rejects_singleton_class():
    ds = LabeledDataset([[0.0], [1.0]], [0, 1], ["normal", "fault"])
    with pytest.raises(ResampleError):
        smote(ds, label=1, n_new=5, k=5, seed=0)


def test_smote_convexity_recovery():
    rng = np.random.default_rng(7)
    ds = two_cluster_dataset(rng)
    new = smote(ds, label=1, n_new=200, k=5, seed=3)
    seeds = ds.features[ds.labels == 1]
    for s in new:
        assert _is_convex_combination(s, seeds)


def _is_convex_combination(s, seeds, tol=1e-9):
    for ai in range(len(seeds)):
        for bi in range(len(seeds)):
            if ai == bi:
                continue
            a, b = seeds[ai], seeds[bi]
            diff = b - a
            nz = np.abs(diff) > 0
            if not nz.any():
                if np.max(np.abs(s - a)) <= tol:
                    return True
                continue
            lam = (s[nz] - a[nz]) / diff[nz]
            lam0 = lam[0]
            if not (np.max(np.abs(lam - lam0)) <= 1e-6 and -1e-9 <= lam0 <= 1 + 1e-9):
                continue
            if np.max(np.abs(a + lam0 * diff - s)) <= tol:
                return True
    return False


# ---------------------------------------------------------------------------
# borderline variant


def test_borderline_labels_crafted():
    # minority pair in a majority sea: one point surrounded, one on the rim
    feats = np.array([
        [0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1], [0.05, 0.05],  # majority
        [0.05, 0.02],   # minority engulfed by majority: every neighbor hostile
        [5.0, 5.0], [5.1, 5.0], [5.0, 5.1],  # minority cluster far away
    ])
    labels = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1])
    ds = LabeledDataset(feats, labels, ["normal", "fault"])
    got = borderline_labels(ds, label=1, k=3)
    assert got[0] == "noise"          # all 3 neighbors are majority
    assert got[1] == got[2] == got[3] == "safe"


def test_borderline_labels_brute_force():
    rng = np.random.default_rng(11)
    for trial in range(50):
        n = int(rng.integers(8, 20))
        feats = rng.integers(0, 4, size=(n, 2)).astype(float)
        labels = rng.integers(0, 2, size=n)
        if (labels == 1).sum() < 1:
            labels[0] = 1
        ds = LabeledDataset(feats, labels, ["normal", "fault"])
        k = int(rng.integers(1, min(6, n - 1) + 1))
        got = borderline_labels(ds, label=1, k=k)
        rows = np.flatnonzero(labels == 1)
        for tag, r in zip(got, rows):
            d2 = ((feats - feats[r]) ** 2).sum(axis=1)
            order = np.lexsort((np.arange(n), d2))
            order = order[order != r][:k]
            m = int((labels[order] != 1).sum())
            if m == k:
                expect = "noise"
            elif 2 * m >= k:
                expect = "danger"
            else:
                expect = "safe"
            assert tag == expect, f"trial {trial} row {r}"


def test_borderline_no_danger_warns_and_returns_empty():
    # well-separated clusters: every minority point is safe
    feats = np.vstack([np.zeros((6, 2)), np.full((4, 2), 100.0)
                       + np.arange(4)[:, None]])
    ds = LabeledDataset(feats, [0] * 6 + [1] * 4, ["normal", "fault"])
    with pytest.warns(UserWarning, match="no danger"):
        new = borderline_smote(ds, label=1, n_new=10, k=3, seed=0)
    assert new.shape == (0, 2)


def test_borderline_synthesis_starts_from_danger_rows():
    rng = np.random.default_rng(2)
    major = rng.normal(0.0, 1.0, size=(40, 2))
    minor = rng.normal(1.0, 1.0, size=(15, 2))
    ds = LabeledDataset(np.vstack([major, minor]),
                        [0] * 40 + [1] * 15, ["normal", "fault"])
    tags = borderline_labels(ds, label=1, k=5)
    assert "danger" in tags
    new = borderline_smote(ds, label=1, n_new=60, k=5, seed=4)
    assert new.shape == (60, 2)
    seeds = ds.features[ds.labels == 1]
    danger = seeds[[t == "danger" for t in tags]]
    for s in new:
        # each row interpolates a danger seed toward some minority row
        assert any(_on_segment(s, a, b) for a in danger for b in seeds)


def _on_segment(s, a, b, tol=1e-9):
    diff = b - a
    nz = np.abs(diff) > 0
    if not nz.any():
        return np.max(np.abs(s - a)) <= tol
    lam = (s[nz] - a[nz]) / diff[nz]
    lam0 = lam[0]
    if not (-1e-9 <= lam0 <= 1 + 1e-9):
        return False
    return np.max(np.abs(a + lam0 * diff - s)) <= tol


# ---------------------------------------------------------------------------
# adaptive weighting


def test_adasyn_weights_uniform_by_symmetry():
    feats = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0],
                      [0.5, 0.4], [0.5, 0.6]])
    ds = LabeledDataset(feats, [0, 0, 0, 1, 1], ["normal", "fault"])
    w = adasyn_weights(ds, label=1, k=2)
    assert w == pytest.approx([0.5, 0.5])


def test_adasyn_weights_concentrate_on_hard_point():
    feats = np.array([
        [0.0, 0.0], [0.2, 0.0], [0.0, 0.2],   # majority cluster
        [0.1, 0.1],                           # minority deep in majority
        [9.0, 9.0], [9.1, 9.0], [9.0, 9.1],   # minority cluster alone
    ])
    ds = LabeledDataset(feats, [0, 0, 0, 1, 1, 1, 1], ["normal", "fault"])
    w = adasyn_weights(ds, label=1, k=2)
    assert w[0] == pytest.approx(1.0)
    assert np.all(w[1:] == 0.0)


def test_adasyn_weights_sum_to_one():
    rng = np.random.default_rng(5)
    for _ in range(20):
        ds = two_cluster_dataset(rng, n_major=20, n_minor=8)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # isolated trials may fall back
            w = adasyn_weights(ds, label=1, k=5)
        assert abs(w.sum() - 1.0) <= 1e-12
        assert np.all(w >= 0.0)


def test_adasyn_weights_fallback_warns_uniform():
    feats = np.vstack([np.zeros((5, 2)), np.full((3, 2), 50.0)
                       + np.arange(3)[:, None]])
    ds = LabeledDataset(feats, [0] * 5 + [1] * 3, ["normal", "fault"])
    with pytest.warns(UserWarning, match="uniform"):
        w = adasyn_weights(ds, label=1, k=2)
    assert w == pytest.approx([1 / 3, 1 / 3, 1 / 3])


def test_adasyn_count_is_exact():
    rng = np.random.default_rng(9)
    for trial in range(30):
        ds = two_cluster_dataset(rng, n_major=15, n_minor=int(rng.integers(3, 9)))
        n_new = int(rng.integers(0, 23))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # isolated trials may fall back
            new = adasyn(ds, label=1, n_new=n_new, k=3, seed=trial)
        assert new.shape == (n_new, ds.dim)


def test_adasyn_rows_are_minority_interpolations():
    rng = np.random.default_rng(13)
    ds = two_cluster_dataset(rng, n_major=20, n_minor=6)
    new = adasyn(ds, label=1, n_new=50, k=3, seed=1)
    seeds = ds.features[ds.labels == 1]
    for s in new:
        assert _is_convex_combination(s, seeds)


# ---------------------------------------------------------------------------
# random oversampling


def test_random_oversample_rows_are_copies():
    rng = np.random.default_rng(3)
    ds = two_cluster_dataset(rng, n_major=10, n_minor=4)
    new = random_oversample(ds, label=1, n_new=25, seed=0)
    assert new.shape == (25, ds.dim)
    pool = ds.features[ds.labels == 1]
    for s in new:
        assert any(np.array_equal(s, p) for p in pool)


# ---------------------------------------------------------------------------
# plans


def test_balance_plan_equalizes_to_majority():
    rng = np.random.default_rng(1)
    ds = two_cluster_dataset(rng, n_major=30, n_minor=12)
    plan = balance_plan(ds)
    assert plan.tolist() == [0, 18]


def test_balance_plan_rejects_empty_class():
    ds = LabeledDataset(np.zeros((3, 2)), [0, 0, 0], ["normal", "fault"])
    with pytest.raises(ResampleError):
        balance_plan(ds)


@pytest.mark.parametrize("method", ["random", "smote", "borderline", "adasyn"])
def test_apply_plan_balances_and_preserves_originals(method):
    rng = np.random.default_rng(21)
    ds = two_cluster_dataset(rng, n_major=25, n_minor=9)
    before = ds.features.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # sparse classes may trigger fallbacks
        out = apply_plan(ds, balance_plan(ds), method, k=3, seed=0)
    assert list(out.class_counts()) == [25, 25]
    assert np.array_equal(out.features[:ds.n], before)
    assert np.array_equal(out.labels[:ds.n], ds.labels)
    assert np.array_equal(ds.features, before)  # input untouched


def test_apply_plan_zero_plan_is_identity_copy():
    rng = np.random.default_rng(4)
    ds = two_cluster_dataset(rng, n_major=8, n_minor=8)
    out = apply_plan(ds, np.zeros(2, dtype=int), "smote", k=3, seed=0)
    assert out.n == ds.n
    assert np.array_equal(out.features, ds.features)
    assert out.features is not ds.features


def test_apply_plan_validation():
    rng = np.random.default_rng(6)
    ds = two_cluster_dataset(rng, n_major=8, n_minor=4)
    with pytest.raises(ResampleError):
        apply_plan(ds, [1, 2, 3], "smote", k=3, seed=0)
    with pytest.raises(ResampleError):
        apply_plan(ds, [0, -1], "smote", k=3, seed=0)
    with pytest.raises(ResampleError):
        apply_plan(ds, [0, 1], "kmeans", k=3, seed=0)
    with pytest.raises(ResampleError):
        oversample_class(ds, 1, 1, "kmeans", 3, 0)


def test_methods_are_seed_deterministic():
    rng = np.random.default_rng(8)
    major = rng.normal(0.0, 1.0, size=(30, 4))
    minor = rng.normal(0.8, 1.0, size=(12, 4))  # overlap keeps danger rows
    ds = LabeledDataset(np.vstack([major, minor]),
                        [0] * 30 + [1] * 12, ["normal", "fault"])
    assert "danger" in borderline_labels(ds, label=1, k=3)
    for method in ("random", "smote", "borderline", "adasyn"):
        a = oversample_class(ds, 1, 12, method, 3, seed=5)
        b = oversample_class(ds, 1, 12, method, 3, seed=5)
        c = oversample_class(ds, 1, 12, method, 3, seed=6)
        assert np.array_equal(a, b)
        assert a.shape == c.shape and not np.array_equal(a, c)
