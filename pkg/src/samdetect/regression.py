"""Ordinary least squares and RANSAC-robust linear regression.

These are the per-feature fitting primitives of the counterfactual
model: each feature is regressed on all remaining features, optionally
through a random-consensus loop that excludes gross outliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .seeding import check_seed, rng_from_seed


@dataclass(frozen=True)
class LinearFit:
    """Result of one linear regression.

    Attributes:
        coefficients: length-p slope vector.
        intercept: constant term.
        inlier_mask: consensus membership per training row (RANSAC only).
        converged: False when RANSAC never found a consensus of at
            least min_samples inliers and the caller should fall back
            to the plain least-squares parameters.
        degenerate: True when the design was rank-deficient and the
            coefficients are the minimum-norm solution.
    """

    coefficients: np.ndarray
    intercept: float
    inlier_mask: np.ndarray | None = None
    converged: bool = True
    degenerate: bool = False


@dataclass(frozen=True)
class RansacConfig:
    """Random-consensus fitting parameters.

    Attributes:
        max_iterations: candidate subsets to try.
        min_samples: rows per candidate subset; None means p + 1, the
            minimal determined system for p predictors.
        residual_threshold: inlier cutoff on |residual|; "auto" uses
            1.4826 times the median absolute deviation of the target.
        stop_inlier_fraction: early exit once a candidate's consensus
            reaches this fraction of all rows.
        seed: 64-bit seed for subset sampling.
    """

    max_iterations: int = 100
    min_samples: int | None = None
    residual_threshold: float | str = "auto"
    stop_inlier_fraction: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError(
                f"max_iterations must be positive, got {self.max_iterations!r}"
            )
        if self.min_samples is not None and self.min_samples < 1:
            raise ConfigError(
                f"min_samples must be positive, got {self.min_samples!r}"
            )
        if isinstance(self.residual_threshold, str):
            if self.residual_threshold != "auto":
                raise ConfigError(
                    f'residual_threshold must be positive or "auto", '
                    f"got {self.residual_threshold!r}"
                )
        elif not self.residual_threshold > 0:
            raise ConfigError(
                f"residual_threshold must be positive, got {self.residual_threshold!r}"
            )
        if not 0.0 < self.stop_inlier_fraction <= 1.0:
            raise ConfigError(
                "stop_inlier_fraction must be in (0, 1], "
                f"got {self.stop_inlier_fraction!r}"
            )
        check_seed(self.seed)


def _check_design(predictors: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    predictors = np.asarray(predictors, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predictors.ndim != 2:
        raise DataError(f"predictors must be 2-D, got ndim={predictors.ndim}")
    if target.ndim != 1:
        raise DataError(f"target must be 1-D, got ndim={target.ndim}")
    if predictors.shape[0] != target.shape[0]:
        raise DataError(
            f"{predictors.shape[0]} predictor rows vs {target.shape[0]} targets"
        )
    if predictors.shape[1] < 1:
        raise DataError("need at least one predictor column")
    if not np.isfinite(predictors).all():
        raise DataError("predictors contain a non-finite value")
    if not np.isfinite(target).all():
        raise DataError("target contains a non-finite value")
    return predictors, target


def ols_fit(predictors: np.ndarray, target: np.ndarray) -> LinearFit:
    """Least-squares fit of target on predictors plus an intercept.

    The design is mean-centered and solved with an orthogonal
    decomposition (SVD); the intercept is recovered from the column
    means. A rank-deficient design yields the minimum-norm solution
    with degenerate=True rather than an error, because the per-feature
    fitting loop must survive collinear data.

    Raises:
        DataError: shape mismatch or fewer than p + 1 rows.
    """
    predictors, target = _check_design(predictors, target)
    n, p = predictors.shape
    if n < p + 1:
        raise DataError(f"need at least {p + 1} rows for {p} predictors, got {n}")
    x_mean = predictors.mean(axis=0)
    y_mean = target.mean()
    centered = predictors - x_mean
    coef, _, rank, _ = np.linalg.lstsq(centered, target - y_mean, rcond=None)
    intercept = float(y_mean - x_mean @ coef)
    return LinearFit(
        coefficients=coef,
        intercept=intercept,
        inlier_mask=None,
        converged=True,
        degenerate=bool(rank < p),
    )


def _auto_threshold(target: np.ndarray) -> float:
    mad = float(np.median(np.abs(target - np.median(target))))
    scale = 1.4826 * mad
    # Floor keeps a zero-MAD (constant or half-constant) target usable:
    # exact refits then still pass the inlier test under roundoff.
    floor = 1e-12 * max(1.0, float(np.abs(target).max(initial=0.0)))
    return max(scale, floor)


def ransac_fit(
    predictors: np.ndarray,
    target: np.ndarray,
    cfg: RansacConfig | None = None,
) -> LinearFit:
    """Random-consensus linear fit that excludes gross outliers.

    Up to cfg.max_iterations random subsets of min_samples rows are fit
    with ols_fit; the candidate whose |residual| <= threshold consensus
    set is largest wins, and the returned model is ols_fit on that
    consensus set. When no candidate ever reaches min_samples inliers
    the full-data least-squares fit is returned with converged=False so
    the caller can record the fallback.

    Raises:
        DataError: fewer rows than min_samples.
        ConfigError: min_samples below p + 1.
    """
    predictors, target = _check_design(predictors, target)
    if cfg is None:
        cfg = RansacConfig()
    n, p = predictors.shape
    min_samples = cfg.min_samples if cfg.min_samples is not None else p + 1
    if min_samples < p + 1:
        raise ConfigError(
            f"min_samples={min_samples} below p + 1 = {p + 1} predictors"
        )
    if n < min_samples:
        raise DataError(f"need at least min_samples={min_samples} rows, got {n}")
    if isinstance(cfg.residual_threshold, str):
        threshold = _auto_threshold(target)
    else:
        threshold = float(cfg.residual_threshold)

    rng = rng_from_seed(cfg.seed)
    best_count = 0
    best_mask: np.ndarray | None = None
    for _ in range(cfg.max_iterations):
        idx = rng.choice(n, size=min_samples, replace=False)
        candidate = ols_fit(predictors[idx], target[idx])
        residuals = target - (predictors @ candidate.coefficients + candidate.intercept)
        mask = np.abs(residuals) <= threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
        if count >= cfg.stop_inlier_fraction * n:
            break

    if best_mask is None or best_count < min_samples:
        fallback = ols_fit(predictors, target)
        return LinearFit(
            coefficients=fallback.coefficients,
            intercept=fallback.intercept,
            inlier_mask=None,
            converged=False,
            degenerate=fallback.degenerate,
        )
    final = ols_fit(predictors[best_mask], target[best_mask])
    return LinearFit(
        coefficients=final.coefficients,
        intercept=final.intercept,
        inlier_mask=best_mask,
        converged=True,
        degenerate=final.degenerate,
    )
