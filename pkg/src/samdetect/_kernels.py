"""Compiled per-point loops for the two scoring hot paths.

Both kernels avoid fastmath so results are IEEE-deterministic across
runs and machines. The counterfactual scorer deliberately walks one
point at a time: per-point cost must track d*d work, not allocator or
memory-bandwidth effects of large intermediate matrices.
"""

from __future__ import annotations

import numba
import numpy as np

NORM_NONE = 0
NORM_OBSERVED = 1
NORM_COUNTERFACTUAL = 2


@numba.njit(cache=True)
def score_rows(
    X: np.ndarray,
    coefficients: np.ndarray,
    intercepts: np.ndarray,
    residual_scale: np.ndarray,
    norm_mode: int,
    epsilon: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counterfactuals, residuals, and aggregate scores for each row.

    residual[i] = (X[i] - S[i]) * residual_scale[i], then divided by
    |X[i]| + epsilon (NORM_OBSERVED) or |S[i]| + epsilon
    (NORM_COUNTERFACTUAL) when normalization is on. The score is the
    sum of absolute residuals.
    """
    n, d = X.shape
    counterfactuals = np.empty((n, d))
    residuals = np.empty((n, d))
    scores = np.empty(n)
    for r in range(n):
        for i in range(d):
            s = intercepts[i]
            for j in range(d):
                s += coefficients[i, j] * X[r, j]
            counterfactuals[r, i] = s
        total = 0.0
        for i in range(d):
            delta = (X[r, i] - counterfactuals[r, i]) * residual_scale[i]
            if norm_mode == NORM_OBSERVED:
                delta /= abs(X[r, i]) + epsilon
            elif norm_mode == NORM_COUNTERFACTUAL:
                delta /= abs(counterfactuals[r, i]) + epsilon
            residuals[r, i] = delta
            total += abs(delta)
        scores[r] = total
    return scores, residuals, counterfactuals


@numba.njit(cache=True)
def forest_mean_paths(
    X: np.ndarray,
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    adjust: np.ndarray,
    roots: np.ndarray,
) -> np.ndarray:
    """Mean isolation path length of each row across all trees.

    Nodes of every tree live in shared flat arrays; feature[node] < 0
    marks a leaf whose c(leaf_count) adjustment is adjust[node].
    """
    n = X.shape[0]
    n_trees = roots.shape[0]
    out = np.empty(n)
    for r in range(n):
        total = 0.0
        for t in range(n_trees):
            node = roots[t]
            depth = 0.0
            while feature[node] >= 0:
                if X[r, feature[node]] < threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                depth += 1.0
            total += depth + adjust[node]
        out[r] = total / n_trees
    return out
