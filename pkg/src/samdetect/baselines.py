"""From-scratch baseline detectors: isolation forest, LOF, kNN distance.

All three expose score functions over a fitted, immutable model and
share the convention that larger scores mean more anomalous. Neighbor
search is exact brute force, matching the quadratic cost the
complexity comparison assumes; no spatial index is built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import Dataset
from .errors import ConfigError, DataError
from .seeding import check_seed, rng_from_seed

_EULER_GAMMA = 0.5772156649015329
_LRD_FLOOR = 1e-10


def _as_matrix(data: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.values
    arr = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
    if arr.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


def _harmonic(m: int) -> float:
    # Exact summation keeps small-count adjustments exact, e.g. H(1)=1;
    # the asymptotic expansion takes over where exactness stops mattering.
    if m <= 0:
        return 0.0
    if m < 10_000:
        return float(sum(1.0 / k for k in range(1, m + 1)))
    return math.log(m) + _EULER_GAMMA + 1.0 / (2 * m) - 1.0 / (12 * m * m)


def average_path_length(n: int) -> float:
    """c(n): expected unsuccessful-search path length in a BST of n points.

    c(n) = 2*H(n-1) - 2*(n-1)/n, with c(1) = c(0) = 0 and c(2) = 1.
    """
    if n <= 1:
        return 0.0
    return 2.0 * _harmonic(n - 1) - 2.0 * (n - 1) / n


@dataclass(frozen=True)
class IsolationForestModel:
    """A forest of random partition trees in flat-array form.

    Nodes of all trees share the arrays; feature[node] == -1 marks a
    leaf. Every leaf keeps the count of training points it received and
    the c(count) path adjustment used at scoring time.

    Attributes:
        feature: split feature per node, -1 for leaves.
        threshold: split value per node.
        left: left child index (feature value below threshold).
        right: right child index.
        leaf_size: training points that reached each leaf, 0 internally.
        adjust: c(leaf_size) per leaf, 0 internally.
        roots: root node index of each tree.
        subsample_size: rows actually drawn per tree, min(requested, n).
        c_norm: c(subsample_size), the score normalizer.
        n_features: training dimensionality.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_size: np.ndarray
    adjust: np.ndarray
    roots: np.ndarray
    subsample_size: int
    c_norm: float
    n_features: int

    @property
    def n_trees(self) -> int:
        return len(self.roots)


def iforest_fit(
    train: Dataset | np.ndarray,
    n_trees: int = 100,
    subsample: int = 256,
    seed: int = 0,
) -> IsolationForestModel:
    """Build an isolation forest on independent subsamples.

    Each tree receives min(subsample, n) rows drawn without
    replacement and splits on a feature chosen uniformly among those
    not yet constant in the node, at a uniform value between the node's
    min and max, until a point is isolated, the node is constant, or
    the depth cap ceil(log2(subsample_size)) is reached.

    Raises:
        DataError: fewer than 2 training rows.
        ConfigError: non-positive tree count or subsample size.
    """
    X = _as_matrix(train)
    n, d = X.shape
    if n < 2:
        raise DataError(f"need at least 2 rows to fit a forest, got {n}")
    if n_trees < 1:
        raise ConfigError(f"n_trees must be positive, got {n_trees!r}")
    if subsample < 2:
        raise ConfigError(f"subsample must be at least 2, got {subsample!r}")
    rng = rng_from_seed(check_seed(seed))
    psi = min(subsample, n)
    depth_cap = math.ceil(math.log2(psi))

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_size: list[int] = []
    adjust: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_size.append(0)
        adjust.append(0.0)
        return len(feature) - 1

    def build(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        count = rows.size
        if depth >= depth_cap or count <= 1:
            leaf_size[node] = count
            adjust[node] = average_path_length(count)
            return node
        sub = X[rows]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            leaf_size[node] = count
            adjust[node] = average_path_length(count)
            return node
        q = int(splittable[rng.integers(0, splittable.size)])
        cut = rng.uniform(lo[q], hi[q])
        if cut <= lo[q]:
            cut = np.nextafter(lo[q], hi[q])
        go_left = X[rows, q] < cut
        feature[node] = q
        threshold[node] = float(cut)
        left[node] = build(rows[go_left], depth + 1)
        right[node] = build(rows[~go_left], depth + 1)
        return node

    roots = []
    for _ in range(n_trees):
        rows = rng.choice(n, size=psi, replace=False)
        roots.append(build(rows, 0))

    return IsolationForestModel(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_size=np.array(leaf_size, dtype=np.int64),
        adjust=np.array(adjust, dtype=np.float64),
        roots=np.array(roots, dtype=np.int64),
        subsample_size=psi,
        c_norm=average_path_length(psi),
        n_features=d,
    )


def iforest_score(model: IsolationForestModel, X: Dataset | np.ndarray) -> np.ndarray:
    """Anomaly score 2^(-mean path length / c_norm), always in (0, 1)."""
    X = _as_matrix(X)
    if X.shape[1] != model.n_features:
        raise DataError(
            f"matrix has {X.shape[1]} columns, forest expects {model.n_features}"
        )
    mean_paths = _kernels.forest_mean_paths(
        np.ascontiguousarray(X),
        model.feature,
        model.threshold,
        model.left,
        model.right,
        model.adjust,
        model.roots,
    )
    return np.power(2.0, -mean_paths / model.c_norm)


@dataclass(frozen=True)
class NeighborIndex:
    """Reference to a training matrix plus the neighbor count k.

    Scoring the exact same array object that backs the index excludes
    each point from its own neighborhood; scoring any other matrix,
    even one with identical content, does not.
    """

    points: np.ndarray
    k: int

    def __post_init__(self) -> None:
        points = _as_matrix(self.points)
        if not 1 <= self.k < points.shape[0]:
            raise ConfigError(
                f"k must satisfy 1 <= k < n={points.shape[0]}, got {self.k!r}"
            )
        object.__setattr__(self, "points", points)


def default_k(n: int) -> int:
    """Neighbor count log(n): max(1, ln n rounded half-up)."""
    if n < 3:
        raise ConfigError(f"need at least 3 points for a default k, got {n}")
    return max(1, int(math.floor(math.log(n) + 0.5)))


def _check_query(index: NeighborIndex, X: Dataset | np.ndarray) -> tuple[np.ndarray, bool]:
    if isinstance(X, Dataset):
        X = X.values
    exclude_self = X is index.points
    X = _as_matrix(X)
    if X.shape[1] != index.points.shape[1]:
        raise DataError(
            f"matrix has {X.shape[1]} columns, index expects {index.points.shape[1]}"
        )
    return X, exclude_self


def _distance_chunks(queries: np.ndarray, train: np.ndarray):
    """Yield (row_offset, chunk x n distance block), memory-bounded.

    Distances are sqrt of the summed squared coordinate differences,
    computed per pair without algebraic shortcuts so results match a
    direct evaluation bit for bit.
    """
    n, d = train.shape
    chunk = max(1, 8_000_000 // max(1, n * d))
    for start in range(0, queries.shape[0], chunk):
        q = queries[start : start + chunk]
        diff = q[:, None, :] - train[None, :, :]
        yield start, np.sqrt(np.square(diff).sum(axis=2))


def knn_score(index: NeighborIndex, X: Dataset | np.ndarray) -> np.ndarray:
    """Mean Euclidean distance to the k nearest training points."""
    X, exclude_self = _check_query(index, X)
    k = index.k
    out = np.empty(X.shape[0])
    for start, dist in _distance_chunks(X, index.points):
        rows = dist.shape[0]
        if exclude_self:
            dist[np.arange(rows), np.arange(start, start + rows)] = np.inf
        nearest = np.partition(dist, k - 1, axis=1)[:, :k]
        nearest.sort(axis=1)
        out[start : start + rows] = nearest.mean(axis=1)
    return out


def _neighborhoods(
    queries: np.ndarray,
    index: NeighborIndex,
    exclude_self: bool,
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """k-distance and tie-inclusive neighborhood of each query row.

    The neighborhood of x is every training point within its k-distance
    (the classic definition, so ties can make it larger than k).
    """
    k = index.k
    kdist = np.empty(queries.shape[0])
    members: list[np.ndarray] = []
    dists: list[np.ndarray] = []
    for start, block in _distance_chunks(queries, index.points):
        rows = block.shape[0]
        if exclude_self:
            block[np.arange(rows), np.arange(start, start + rows)] = np.inf
        for r in range(rows):
            row = block[r]
            kd = np.partition(row, k - 1)[k - 1]
            nb = np.flatnonzero(row <= kd)
            kdist[start + r] = kd
            members.append(nb)
            dists.append(row[nb])
    return kdist, members, dists


def lof_score(index: NeighborIndex, X: Dataset | np.ndarray) -> np.ndarray:
    """Local outlier factor of each query row against the index.

    Implements reachability distance reach(x, y) = max(k-distance(y),
    d(x, y)) and local reachability density lrd(x) = 1 / mean
    reachability over x's neighborhood; the score is the mean of
    lrd(neighbor) / lrd(x). The mean reachability is floored at 1e-10
    before inversion so coincident duplicates stay finite.
    """
    X, exclude_self = _check_query(index, X)
    train_kdist, train_nb, train_nbd = _neighborhoods(
        index.points, index, exclude_self=True
    )
    lrd_train = np.array(
        [
            1.0 / max(float(np.maximum(train_kdist[nb], nd).mean()), _LRD_FLOOR)
            for nb, nd in zip(train_nb, train_nbd)
        ]
    )
    if exclude_self:
        query_nb, lrd_query = train_nb, lrd_train
    else:
        _, query_nb, query_nbd = _neighborhoods(X, index, exclude_self=False)
        lrd_query = np.array(
            [
                1.0 / max(float(np.maximum(train_kdist[nb], nd).mean()), _LRD_FLOOR)
                for nb, nd in zip(query_nb, query_nbd)
            ]
        )
    return np.array(
        [
            float(lrd_train[nb].mean()) / lrd_query[i]
            for i, nb in enumerate(query_nb)
        ]
    )
