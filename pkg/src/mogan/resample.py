"""Classical oversampling: random duplication, SMOTE variants, ADASYN.

All neighbor queries use exact brute-force Euclidean distance with ties
broken by ascending row index, so results are reproducible across platforms.
`apply_plan` executes a per-class synthetic-count plan (see `balance_plan`
for the equalize-to-majority plan); original rows come first and are
byte-identical to the input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataio import LabeledDataset
from .seeding import make_rng


class ResampleError(ValueError):
    pass


@dataclass
class NeighborIndex:
    """Exact Euclidean nearest-neighbor lookup over a fixed point set."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ResampleError("index needs a non-empty 2D point matrix")

    @property
    def n(self) -> int:
        return self.points.shape[0]


def knn(index: NeighborIndex, query, k: int) -> list:
    """The k nearest indexed points to `query` as (index, distance) pairs.

    Sorted by ascending distance; exact ties are broken by ascending point
    index.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.points.shape[1],):
        raise ResampleError("query width must match indexed points")
    if not 1 <= k <= index.n:
        raise ResampleError(f"k={k} out of range for {index.n} points")
    d2 = ((index.points - q) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(index.n), d2))[:k]
    return [(int(i), float(np.sqrt(d2[i]))) for i in order]


def knn_indices(points: np.ndarray, queries: np.ndarray, k: int,
                exclude_self: bool = False) -> np.ndarray:
    """Indices of the k nearest points (Euclidean) for each query row.

    Ordered by increasing distance; equal distances are ordered by ascending
    point index. With `exclude_self`, query i never returns point i (use only
    when queries and points are the same array).
    """
    points = np.asarray(points, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if points.ndim != 2 or queries.ndim != 2 or points.shape[1] != queries.shape[1]:
        raise ResampleError("points and queries must be 2D with equal width")
    n = points.shape[0]
    limit = n - 1 if exclude_self else n
    if not 1 <= k <= limit:
        raise ResampleError(f"k={k} out of range for {n} points"
                            f"{' (self excluded)' if exclude_self else ''}")
    d2 = ((queries[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    if exclude_self:
        d2[np.arange(queries.shape[0]), np.arange(queries.shape[0])] = np.inf
    idx = np.arange(n)
    out = np.empty((queries.shape[0], k), dtype=np.int64)
    for q in range(queries.shape[0]):
        order = np.lexsort((idx, d2[q]))
        out[q] = order[:k]
    return out


def _class_rows(ds: LabeledDataset, label: int) -> np.ndarray:
    rows = np.flatnonzero(ds.labels == label)
    if rows.size == 0:
        raise ResampleError(f"class {label} has no rows")
    return rows


def _interpolate(rng, x_i: np.ndarray, x_nn: np.ndarray) -> np.ndarray:
    lam = rng.uniform(0.0, 1.0)
    return x_i + lam * (x_nn - x_i)


def random_oversample(ds: LabeledDataset, label: int, n_new: int, seed: int) -> np.ndarray:
    """Sample n_new rows of the class uniformly with replacement."""
    if n_new < 0:
        raise ResampleError("n_new must be >= 0")
    rows = _class_rows(ds, label)
    rng = make_rng(seed, f"random_oversample:{label}")
    picks = rng.integers(0, rows.size, size=n_new)
    return ds.features[rows[picks]].copy()


def smote(ds: LabeledDataset, label: int, n_new: int, k: int, seed: int) -> np.ndarray:
    """SMOTE: each synthetic row interpolates a class member toward one of
    its k nearest same-class neighbors, x_i + lam * (x_nn - x_i), lam~U[0,1].
    """
    if n_new < 0:
        raise ResampleError("n_new must be >= 0")
    rows = _class_rows(ds, label)
    if rows.size < 2:
        raise ResampleError(f"class {label} needs >= 2 rows for SMOTE")
    pts = ds.features[rows]
    nn = knn_indices(pts, pts, min(k, rows.size - 1), exclude_self=True)
    rng = make_rng(seed, f"smote:{label}")
    out = np.empty((n_new, ds.dim))
    for s in range(n_new):
        i = rng.integers(0, rows.size)
        j = nn[i][rng.integers(0, nn.shape[1])]
        out[s] = _interpolate(rng, pts[i], pts[j])
    return out


def borderline_labels(ds: LabeledDataset, label: int, k: int) -> np.ndarray:
    """Classify each class member by its k-NN neighborhood in the full set.

    With m = number of the k nearest neighbors (any class, self excluded)
    whose label differs from `label`: "noise" when m == k, "danger" when
    k/2 <= m < k, "safe" when m < k/2.
    """
    rows = _class_rows(ds, label)
    nn = knn_indices(ds.features, ds.features[rows], k + 1)
    tags = np.empty(rows.size, dtype=object)
    for t, r in enumerate(rows):
        neigh = [j for j in nn[t] if j != r][:k]
        m = sum(1 for j in neigh if ds.labels[j] != label)
        if m == k:
            tags[t] = "noise"
        elif 2 * m >= k:
            tags[t] = "danger"
        else:
            tags[t] = "safe"
    return tags


def borderline_smote(ds: LabeledDataset, label: int, n_new: int, k: int, seed: int) -> np.ndarray:
    """SMOTE restricted to "danger" seeds (class members near the boundary).

    Interpolation targets are same-class k-NN as in plain SMOTE. When no
    member is in danger the result is empty and a warning is issued.
    """
    if n_new < 0:
        raise ResampleError("n_new must be >= 0")
    rows = _class_rows(ds, label)
    if rows.size < 2:
        raise ResampleError(f"class {label} needs >= 2 rows for borderline SMOTE")
    tags = borderline_labels(ds, label, k)
    danger = np.flatnonzero(tags == "danger")
    if danger.size == 0:
        warnings.warn(f"borderline SMOTE: class {label} has no danger points; "
                      "returning no synthetic rows", stacklevel=2)
        return np.zeros((0, ds.dim))
    pts = ds.features[rows]
    nn = knn_indices(pts, pts, min(k, rows.size - 1), exclude_self=True)
    rng = make_rng(seed, f"borderline_smote:{label}")
    out = np.empty((n_new, ds.dim))
    for s in range(n_new):
        i = danger[rng.integers(0, danger.size)]
        j = nn[i][rng.integers(0, nn.shape[1])]
        out[s] = _interpolate(rng, pts[i], pts[j])
    return out


def adasyn_weights(ds: LabeledDataset, label: int, k: int) -> np.ndarray:
    """Normalized ADASYN difficulty weights for every member of a class.

    r_i = (other-class neighbors among the full-set k-NN of member i) / k,
    normalized to sum to 1. When every member sits in the class interior
    (all r_i = 0) the weights fall back to uniform with a warning.
    """
    rows = _class_rows(ds, label)
    if rows.size < 2:
        raise ResampleError(f"class {label} needs >= 2 rows for ADASYN")
    nn_full = knn_indices(ds.features, ds.features[rows], k + 1)
    r = np.empty(rows.size)
    for t, row in enumerate(rows):
        neigh = [j for j in nn_full[t] if j != row][:k]
        r[t] = sum(1 for j in neigh if ds.labels[j] != label) / k
    total = r.sum()
    if total <= 0:
        warnings.warn(f"ADASYN: class {label} has no boundary points; "
                      "using uniform weights", stacklevel=2)
        r[:] = 1.0
        total = r.sum()
    return r / total


def adasyn(ds: LabeledDataset, label: int, n_new: int, k: int, seed: int) -> np.ndarray:
    """ADASYN: synthetic counts per seed proportional to local difficulty.

    Difficulty weights come from adasyn_weights; the n_new rows are
    allocated by largest remainder so the total is exact. Interpolation
    itself matches SMOTE (same-class neighbors).
    """
    if n_new < 0:
        raise ResampleError("n_new must be >= 0")
    rows = _class_rows(ds, label)
    w = adasyn_weights(ds, label, k)
    raw = w * n_new
    alloc = np.floor(raw).astype(np.int64)
    short = n_new - int(alloc.sum())
    if short > 0:
        frac = raw - alloc
        order = np.lexsort((np.arange(rows.size), -frac))
        alloc[order[:short]] += 1
    pts = ds.features[rows]
    nn_same = knn_indices(pts, pts, min(k, rows.size - 1), exclude_self=True)
    rng = make_rng(seed, f"adasyn:{label}")
    out = np.empty((n_new, ds.dim))
    s = 0
    for i in range(rows.size):
        for _ in range(int(alloc[i])):
            j = nn_same[i][rng.integers(0, nn_same.shape[1])]
            out[s] = _interpolate(rng, pts[i], pts[j])
            s += 1
    return out


METHODS = ("random", "smote", "borderline", "adasyn")


def oversample_class(ds: LabeledDataset, label: int, n_new: int,
                     method: str, k: int, seed: int) -> np.ndarray:
    if method == "random":
        return random_oversample(ds, label, n_new, seed)
    if method == "smote":
        return smote(ds, label, n_new, k, seed)
    if method == "borderline":
        return borderline_smote(ds, label, n_new, k, seed)
    if method == "adasyn":
        return adasyn(ds, label, n_new, k, seed)
    raise ResampleError(f"unknown method {method!r}; choose from {METHODS}")


def balance_plan(ds: LabeledDataset) -> np.ndarray:
    """Per-class synthetic counts that equalize every class to the majority.

    plan[c] = majority count - count(c), so the majority class itself gets 0.
    """
    counts = ds.class_counts()
    if counts.min() == 0:
        raise ResampleError("every class needs at least one row")
    return (counts.max() - counts).astype(np.int64)


def apply_plan(ds: LabeledDataset, plan, method: str, k: int, seed: int) -> LabeledDataset:
    """Add plan[c] synthetic rows per class with one oversampler.

    The returned dataset starts with the original rows, byte-identical and in
    their original order, followed by synthetic rows grouped by class. A plan
    of zeros returns a copy of the input.
    """
    plan = np.asarray(plan, dtype=np.int64)
    if plan.shape != (ds.n_classes,):
        raise ResampleError(f"plan needs one count per class, got shape {plan.shape}")
    if plan.min() < 0:
        raise ResampleError("plan counts must be >= 0")
    feats = [ds.features.copy()]
    labels = [ds.labels.copy()]
    for c in range(ds.n_classes):
        need = int(plan[c])
        if need == 0:
            continue
        new = oversample_class(ds, c, need, method, k, seed)
        if new.shape[0]:
            feats.append(new)
            labels.append(np.full(new.shape[0], c, dtype=np.int64))
    return LabeledDataset(np.concatenate(feats, axis=0),
                          np.concatenate(labels, axis=0), ds.class_names)
