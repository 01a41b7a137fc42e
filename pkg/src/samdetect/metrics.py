"""Threshold-free evaluation: ROC/PR curves, their areas, rank tests.

Larger scores mean more anomalous and labels use True = anomaly.
PR area is average precision (step integration over recall
increments); trapezoidal integration over PR points is a known-biased
estimator and is deliberately not used. ROC ties earn half credit,
matching the probabilistic Mann-Whitney definition.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class CurvePoints:
    """An evaluated ROC or PR curve.

    Attributes:
        kind: "roc" (x=FPR, y=TPR) or "pr" (x=recall, y=precision).
        points: m x 2 array of (x, y) pairs, one per distinct threshold
            plus the starting endpoint.
        thresholds: length-m score cutoffs per point; the first is +inf.
        auc: area under the curve (trapezoid for ROC, steps for PR).
    """

    kind: str
    points: np.ndarray
    thresholds: np.ndarray
    auc: float


@dataclass(frozen=True)
class RankTable:
    """Average ranks of models across datasets plus the Friedman statistic.

    Rank 1 is best, where best means the largest metric value; ties
    receive the average of the ranks they straddle.
    """

    model_names: tuple[str, ...]
    ranks: np.ndarray
    average_ranks: np.ndarray
    friedman_statistic: float
    p_value: float
    n_models: int
    n_datasets: int


def _check_scored(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.ndim != 1 or labels.ndim != 1:
        raise DataError("scores and labels must be 1-D")
    if scores.shape != labels.shape:
        raise DataError(
            f"{scores.size} scores vs {labels.size} labels"
        )
    if scores.size == 0:
        raise DataError("empty score vector")
    if not np.isfinite(scores).all():
        raise DataError("scores contain non-finite values")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """Probability a random anomaly outscores a random normal point.

    Computed from average ranks so tied pairs earn half credit.

    Raises:
        DataError: labels contain only one class.
    """
    scores, labels = _check_scored(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC AUC needs both classes present")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    ranks = ((starts + ends) / 2.0)[inverse]
    pos_rank_sum = float(ranks[labels].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _threshold_blocks(scores: np.ndarray, labels: np.ndarray):
    """Cumulative TP/FP after each distinct threshold, descending."""
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    is_block_end = np.ones(scores.size, dtype=bool)
    is_block_end[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    ends = np.flatnonzero(is_block_end)
    tp = np.cumsum(sorted_labels)[ends].astype(np.float64)
    fp = np.cumsum(~sorted_labels)[ends].astype(np.float64)
    return sorted_scores[ends], tp, fp


def pr_auc(scores, labels) -> float:
    """Average precision: precision summed over recall increments.

    The descending-score sweep treats tied scores as one block.

    Raises:
        DataError: no anomalies in labels.
    """
    scores, labels = _check_scored(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DataError("PR AUC needs at least one anomaly")
    _, tp, fp = _threshold_blocks(scores, labels)
    recall = tp / n_pos
    precision = tp / (tp + fp)
    recall_steps = np.diff(recall, prepend=0.0)
    return float((recall_steps * precision).sum())


def curve_points(scores, labels, kind: str) -> CurvePoints:
    """One curve point per distinct threshold plus the start endpoint.

    ROC curves start at (0, 0) and end at (1, 1); PR curves start at
    the (0, 1) anchor. The threshold of the starting point is +inf,
    after that each point's threshold is the score at which it is
    reached (predicting anomaly iff score >= threshold).

    Raises:
        ConfigError: unknown kind.
        DataError: class requirements of the respective area.
    """
    kind = kind.lower()
    if kind not in ("roc", "pr"):
        raise ConfigError(f'curve kind must be "roc" or "pr", got {kind!r}')
    scores, labels = _check_scored(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if kind == "roc" and (n_pos == 0 or n_neg == 0):
        raise DataError("ROC curve needs both classes present")
    if kind == "pr" and n_pos == 0:
        raise DataError("PR curve needs at least one anomaly")
    cuts, tp, fp = _threshold_blocks(scores, labels)
    thresholds = np.concatenate(([np.inf], cuts))
    if kind == "roc":
        xs = np.concatenate(([0.0], fp / n_neg))
        ys = np.concatenate(([0.0], tp / n_pos))
        auc = float((np.diff(xs) * (ys[1:] + ys[:-1]) / 2.0).sum())
    else:
        recall = tp / n_pos
        precision = tp / (tp + fp)
        xs = np.concatenate(([0.0], recall))
        ys = np.concatenate(([1.0], precision))
        auc = float((np.diff(recall, prepend=0.0) * precision).sum())
    return CurvePoints(
        kind=kind,
        points=np.column_stack([xs, ys]),
        thresholds=thresholds,
        auc=auc,
    )


def curve_csv(curve: CurvePoints) -> str:
    """Serialize a curve as "threshold,x,y" lines for external plotting."""
    out = io.StringIO()
    out.write("threshold,x,y\n")
    for threshold, (x, y) in zip(curve.thresholds, curve.points):
        out.write(f"{float(threshold)!r},{float(x)!r},{float(y)!r}\n")
    return out.getvalue()


def _average_ranks_desc(row: np.ndarray) -> np.ndarray:
    """Rank 1 = largest value; tied values share the average rank."""
    _, inverse, counts = np.unique(-row, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    return ((starts + ends) / 2.0)[inverse]


def friedman(values, model_names: tuple[str, ...] | None = None) -> RankTable:
    """Friedman rank statistic over a datasets x models value table.

    Each dataset row is ranked (1 = best = largest value, ties
    averaged); the statistic is chi-square distributed with m - 1
    degrees of freedom under the no-difference hypothesis:
    12D / (m(m+1)) * sum_j (mean_rank_j - (m+1)/2)^2.

    Raises:
        DataError: missing cells, fewer than 2 models or 2 datasets.
    """
    table = np.asarray(values, dtype=np.float64)
    if table.ndim != 2:
        raise DataError(f"rank input must be 2-D, got ndim={table.ndim}")
    n_datasets, n_models = table.shape
    if n_models < 2:
        raise DataError(f"need at least 2 models, got {n_models}")
    if n_datasets < 2:
        raise DataError(f"need at least 2 datasets, got {n_datasets}")
    if not np.isfinite(table).all():
        raise DataError("rank input has missing or non-finite cells")
    if model_names is None:
        model_names = tuple(f"model{j + 1}" for j in range(n_models))
    if len(model_names) != n_models:
        raise DataError(
            f"{len(model_names)} model names for {n_models} columns"
        )
    ranks = np.vstack([_average_ranks_desc(row) for row in table])
    average = ranks.mean(axis=0)
    center = (n_models + 1) / 2.0
    statistic = (
        12.0 * n_datasets / (n_models * (n_models + 1))
    ) * float(((average - center) ** 2).sum())
    return RankTable(
        model_names=tuple(model_names),
        ranks=ranks,
        average_ranks=average,
        friedman_statistic=statistic,
        p_value=chi_square_tail(statistic, n_models - 1),
        n_models=n_models,
        n_datasets=n_datasets,
    )


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series, x < a+1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(500):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction, x >= a+1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_tail(statistic: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution.

    Evaluated through the regularized incomplete gamma function,
    series form below the a+1 crossover and continued fraction above.

    Raises:
        ConfigError: non-positive degrees of freedom or negative statistic.
    """
    if df < 1:
        raise ConfigError(f"degrees of freedom must be positive, got {df!r}")
    if statistic < 0:
        raise ConfigError(f"statistic must be nonnegative, got {statistic!r}")
    if statistic == 0:
        return 1.0
    a = df / 2.0
    x = statistic / 2.0
    if x < a + 1.0:
        return 1.0 - _lower_gamma_series(a, x)
    return _upper_gamma_cf(a, x)
