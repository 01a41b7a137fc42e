"""The counterfactual anomaly detector.

Fitting regresses every feature on all remaining features, producing a
d x d coefficient matrix whose diagonal is exactly zero by
construction. Scoring compares each observed value with its
counterfactual prediction; the aggregate anomaly score of a point is
the sum of absolute residuals. Summation uses absolute values because
signed residuals would cancel deviations of opposite sign.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dataset import Dataset
from .errors import ConfigError, DataError, ModelFormatError
from .regression import RansacConfig, ols_fit, ransac_fit
from .seeding import check_seed, mix_seed

FORMAT_VERSION = 1

_DENOMINATORS = {
    "observed": _kernels.NORM_OBSERVED,
    "counterfactual": _kernels.NORM_COUNTERFACTUAL,
}


@dataclass(frozen=True)
class SamVariant:
    """One of the four detector variants.

    The first sign in the conventional name says whether robust
    consensus fitting is used, the second whether scores are
    normalized: ++ (both), +- (robust only), -+ (normalized only),
    -- (neither).
    """

    use_ransac: bool = False
    normalize: bool = False

    @classmethod
    def from_alias(cls, alias: str) -> SamVariant:
        """Parse names like "sam++", "sam+-", "sam-+", "sam--"."""
        key = alias.strip().lower()
        if not key.startswith("sam") or len(key) != 5 or any(
            c not in "+-" for c in key[3:]
        ):
            raise ConfigError(f"unknown detector variant alias {alias!r}")
        return cls(use_ransac=key[3] == "+", normalize=key[4] == "+")

    @property
    def alias(self) -> str:
        return "sam" + ("+" if self.use_ransac else "-") + (
            "+" if self.normalize else "-"
        )


@dataclass(frozen=True)
class FeatureFitMeta:
    """How one feature's regression was obtained.

    used_ransac is True only when the consensus fit converged and its
    parameters were kept; a fallback to plain least squares records
    used_ransac=False with converged=False.
    """

    used_ransac: bool
    converged: bool
    degenerate: bool


@dataclass(frozen=True)
class SamModel:
    """Fitted counterfactual model.

    Attributes:
        coefficients: d x d matrix; entry [i][j] weights feature j in
            the counterfactual of feature i; diagonal exactly zero.
        intercepts: length-d constant terms.
        feature_names: d column names, aligned with the matrix.
        fit_meta: per-feature fitting record.
        format_version: persisted-file schema version.
        zscore: True when residuals are reported in units of the
            training standard deviation per feature.
        residual_scale: length-d multipliers applied to raw residuals
            (1/train-std when zscore, else None meaning all ones).
        normalize_default: scoring normalization used when the caller
            does not say otherwise.
        created_unix_seconds: persisted creation time, None until saved.
    """

    coefficients: np.ndarray
    intercepts: np.ndarray
    feature_names: tuple[str, ...]
    fit_meta: tuple[FeatureFitMeta, ...]
    format_version: int = FORMAT_VERSION
    zscore: bool = False
    residual_scale: np.ndarray | None = None
    normalize_default: bool = False
    created_unix_seconds: int | None = None

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=np.float64)
        intercepts = np.asarray(self.intercepts, dtype=np.float64)
        d = len(self.feature_names)
        if coefficients.shape != (d, d):
            raise ModelFormatError(
                f"coefficient matrix shape {coefficients.shape}, expected {(d, d)}"
            )
        if intercepts.shape != (d,):
            raise ModelFormatError(
                f"{intercepts.size} intercepts for {d} features"
            )
        if not np.isfinite(coefficients).all() or not np.isfinite(intercepts).all():
            raise ModelFormatError("model contains non-finite entries")
        diag = np.diagonal(coefficients)
        if np.any(diag != 0.0):
            bad = int(np.flatnonzero(diag != 0.0)[0])
            raise ModelFormatError(
                f"nonzero diagonal: coefficient [{bad}][{bad}] = {diag[bad]!r}"
            )
        if len(self.fit_meta) != d:
            raise ModelFormatError(
                f"{len(self.fit_meta)} fit_meta records for {d} features"
            )
        scale = self.residual_scale
        if scale is not None:
            scale = np.asarray(scale, dtype=np.float64)
            if scale.shape != (d,):
                raise ModelFormatError(
                    f"{scale.size} residual scales for {d} features"
                )
            if not np.isfinite(scale).all():
                raise ModelFormatError("residual_scale contains non-finite entries")
            scale = _frozen(scale)
        object.__setattr__(self, "coefficients", _frozen(coefficients))
        object.__setattr__(self, "intercepts", _frozen(intercepts))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "fit_meta", tuple(self.fit_meta))
        object.__setattr__(self, "residual_scale", scale)

    @property
    def d(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class ScoreReport:
    """Scores and per-feature deviations for a scored matrix.

    Attributes:
        scores: length-n aggregate anomaly score, the row-sum of
            absolute residuals.
        residuals: n x d deviations (normalized when normalized=True).
        counterfactuals: n x d predicted values, always in raw units.
        normalized: whether residuals were divided by a magnitude term.
        feature_names: column names, for attribution.
    """

    scores: np.ndarray
    residuals: np.ndarray
    counterfactuals: np.ndarray
    normalized: bool
    feature_names: tuple[str, ...]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


def sam_fit(
    train: Dataset,
    variant: SamVariant = SamVariant(),
    ransac_cfg: RansacConfig | None = None,
    seed: int = 0,
    zscore: bool = False,
) -> SamModel:
    """Fit one linear counterfactual per feature.

    Feature i is regressed on all other features, with random-consensus
    fitting when variant.use_ransac (falling back to plain least
    squares when consensus never converges). Consensus subset sampling
    for feature i is seeded with mix_seed(seed, i); any seed inside
    ransac_cfg is ignored so that the fit seed is the single source of
    randomness.

    Args:
        train: training rows; labels, if any, are ignored.
        variant: fitting/normalization variant; normalize is recorded
            as the model's scoring default.
        ransac_cfg: consensus parameters, defaults when None.
        seed: 64-bit seed governing all subset sampling.
        zscore: store per-feature 1/std multipliers so residuals and
            scores are expressed in units of the training spread.

    Raises:
        DataError: fewer than 2 features, or n < d + 1 rows.
    """
    if train.d < 2:
        raise DataError(
            f"need at least 2 features to build counterfactuals, got {train.d}"
        )
    if train.n < train.d + 1:
        raise DataError(
            f"need at least d + 1 = {train.d + 1} rows to fit, got {train.n}"
        )
    seed = check_seed(seed)
    base_cfg = ransac_cfg if ransac_cfg is not None else RansacConfig()
    X = train.values
    d = train.d
    coefficients = np.zeros((d, d))
    intercepts = np.zeros(d)
    meta: list[FeatureFitMeta] = []
    for i in range(d):
        donors = np.delete(np.arange(d), i)
        predictors = X[:, donors]
        target = X[:, i]
        if variant.use_ransac:
            cfg_i = dataclasses.replace(base_cfg, seed=mix_seed(seed, i))
            fit = ransac_fit(predictors, target, cfg_i)
            meta.append(
                FeatureFitMeta(
                    used_ransac=fit.converged,
                    converged=fit.converged,
                    degenerate=fit.degenerate,
                )
            )
        else:
            fit = ols_fit(predictors, target)
            meta.append(
                FeatureFitMeta(
                    used_ransac=False,
                    converged=True,
                    degenerate=fit.degenerate,
                )
            )
        coefficients[i, donors] = fit.coefficients
        intercepts[i] = fit.intercept

    residual_scale = None
    if zscore:
        std = X.std(axis=0)
        # Constant training columns keep scale 1; their residuals stay
        # in raw units instead of dividing by zero.
        residual_scale = np.where(std > 0, 1.0 / np.where(std > 0, std, 1.0), 1.0)
    return SamModel(
        coefficients=coefficients,
        intercepts=intercepts,
        feature_names=train.feature_names,
        fit_meta=tuple(meta),
        zscore=zscore,
        residual_scale=residual_scale,
        normalize_default=variant.normalize,
    )


def _check_matrix(model: SamModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got ndim={X.ndim}")
    if X.shape[1] != model.d:
        raise DataError(
            f"matrix has {X.shape[1]} columns, model expects {model.d}"
        )
    return np.ascontiguousarray(X)


def counterfactual(model: SamModel, X: np.ndarray) -> np.ndarray:
    """Predicted value of every feature of every row from the others."""
    X = _check_matrix(model, X)
    return X @ model.coefficients.T + model.intercepts


def sam_score(
    model: SamModel,
    X: np.ndarray,
    normalize: bool | None = None,
    epsilon: float = 1e-9,
    denominator: str = "observed",
) -> ScoreReport:
    """Score rows against the fitted counterfactuals.

    The raw residual of feature i is X_i minus its counterfactual
    (times the model's residual scale when fitted with zscore). With
    normalize on, each residual is divided by |X_i| + epsilon; passing
    denominator="counterfactual" divides by |S_i| + epsilon instead,
    the alternative normalization that measures deviation relative to
    the predicted rather than the observed magnitude. The score is the
    sum of absolute residuals.

    Args:
        model: fitted model.
        X: n x d matrix with columns in model feature order.
        normalize: None uses the model's recorded default.
        epsilon: small positive constant guarding the denominator.
        denominator: "observed" or "counterfactual".

    Raises:
        DataError: dimension mismatch or non-finite input.
        ConfigError: epsilon <= 0 or unknown denominator.
    """
    X = _check_matrix(model, X)
    if not np.isfinite(X).all():
        raise DataError("matrix to score contains non-finite values")
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    if denominator not in _DENOMINATORS:
        raise ConfigError(
            f"denominator must be one of {sorted(_DENOMINATORS)}, got {denominator!r}"
        )
    if normalize is None:
        normalize = model.normalize_default
    mode = _DENOMINATORS[denominator] if normalize else _kernels.NORM_NONE
    scale = (
        model.residual_scale
        if model.residual_scale is not None
        else np.ones(model.d)
    )
    scores, residuals, counterfactuals = _kernels.score_rows(
        X,
        model.coefficients,
        model.intercepts,
        np.ascontiguousarray(scale),
        mode,
        float(epsilon),
    )
    return ScoreReport(
        scores=_frozen(scores),
        residuals=_frozen(residuals),
        counterfactuals=_frozen(counterfactuals),
        normalized=bool(normalize),
        feature_names=model.feature_names,
    )


def sam_label(report: ScoreReport | np.ndarray, percentile: float) -> np.ndarray:
    """Label points as -1 (anomaly) or 1 (normal) by a score percentile.

    The threshold is the linear-interpolation percentile of the score
    distribution; only scores strictly above it are flagged, so ties at
    the threshold stay normal.

    Raises:
        ConfigError: percentile outside (0, 100).
        DataError: empty score vector.
    """
    if not 0.0 < percentile < 100.0:
        raise ConfigError(f"percentile must be in (0, 100), got {percentile!r}")
    scores = report.scores if isinstance(report, ScoreReport) else np.asarray(report)
    if scores.size < 1:
        raise DataError("cannot label an empty score vector")
    tau = np.percentile(scores, percentile)
    return np.where(scores > tau, -1, 1)


def attribute(
    report: ScoreReport, point_index: int
) -> list[tuple[str, float, float]]:
    """Rank features by their contribution to one point's score.

    Returns:
        (feature_name, |residual|, share_of_score) triples sorted by
        |residual| descending; shares sum to 1 for a positive score and
        are all 0 for a zero score.

    Raises:
        DataError: point_index out of range.
    """
    n = report.residuals.shape[0]
    if not -n <= point_index < n:
        raise DataError(f"point index {point_index} out of range for {n} rows")
    magnitudes = np.abs(report.residuals[point_index])
    total = float(magnitudes.sum())
    order = np.argsort(-magnitudes, kind="stable")
    return [
        (
            report.feature_names[j],
            float(magnitudes[j]),
            float(magnitudes[j] / total) if total > 0 else 0.0,
        )
        for j in order
    ]


def save_model(model: SamModel, path: str | Path) -> None:
    """Write a model as a versioned JSON document.

    Numbers are serialized with full round-trip precision. The creation
    timestamp is the only non-deterministic field; it never influences
    scoring or benchmark output.
    """
    doc = {
        "format_version": model.format_version,
        "feature_names": list(model.feature_names),
        "intercepts": [float(v) for v in model.intercepts],
        "coefficients": [float(v) for v in model.coefficients.ravel()],
        "fit_meta": {
            "zscore": bool(model.zscore),
            "normalize_default": bool(model.normalize_default),
            "residual_scale": (
                None
                if model.residual_scale is None
                else [float(v) for v in model.residual_scale]
            ),
            "features": [
                {
                    "used_ransac": bool(m.used_ransac),
                    "converged": bool(m.converged),
                    "degenerate": bool(m.degenerate),
                }
                for m in model.fit_meta
            ],
        },
        "created_unix_seconds": (
            model.created_unix_seconds
            if model.created_unix_seconds is not None
            else int(time.time())
        ),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _require(doc: dict, key: str, kind: type, where: str) -> object:
    if key not in doc:
        raise ModelFormatError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise ModelFormatError(
            f"{where}: field {key!r} must be {kind.__name__}, "
            f"got {type(value).__name__}"
        )
    return value


def load_model(path: str | Path) -> SamModel:
    """Read a model file written by save_model.

    Raises:
        DataError: missing file.
        ModelFormatError: malformed JSON (reported with byte offset),
            unknown format version, or any violated model invariant
            such as a nonzero diagonal entry.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such model file: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: expected a JSON object at top level")
    version = _require(doc, "format_version", int, str(path))
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unknown format_version {version}, expected {FORMAT_VERSION}"
        )
    names = _require(doc, "feature_names", list, str(path))
    if not names or not all(isinstance(x, str) for x in names):
        raise ModelFormatError(f"{path}: feature_names must be non-empty strings")
    d = len(names)
    intercepts = _require(doc, "intercepts", list, str(path))
    flat = _require(doc, "coefficients", list, str(path))
    if len(flat) != d * d:
        raise ModelFormatError(
            f"{path}: {len(flat)} coefficients for d={d}, expected {d * d}"
        )
    meta_doc = _require(doc, "fit_meta", dict, str(path))
    features = _require(meta_doc, "features", list, f"{path} fit_meta")
    if len(features) != d:
        raise ModelFormatError(
            f"{path}: {len(features)} fit_meta records for {d} features"
        )
    meta = []
    for i, rec in enumerate(features):
        if not isinstance(rec, dict):
            raise ModelFormatError(f"{path}: fit_meta record {i} must be an object")
        where = f"{path} fit_meta[{i}]"
        meta.append(
            FeatureFitMeta(
                used_ransac=_require(rec, "used_ransac", bool, where),
                converged=_require(rec, "converged", bool, where),
                degenerate=_require(rec, "degenerate", bool, where),
            )
        )
    scale_doc = meta_doc.get("residual_scale")
    try:
        coefficients = np.array(flat, dtype=np.float64).reshape(d, d)
        intercept_vec = np.array(intercepts, dtype=np.float64)
        scale = (
            None if scale_doc is None else np.array(scale_doc, dtype=np.float64)
        )
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: non-numeric model entries: {exc}") from None
    return SamModel(
        coefficients=coefficients,
        intercepts=intercept_vec,
        feature_names=tuple(names),
        fit_meta=tuple(meta),
        format_version=version,
        zscore=bool(meta_doc.get("zscore", False)),
        residual_scale=scale,
        normalize_default=bool(meta_doc.get("normalize_default", False)),
        created_unix_seconds=_require(doc, "created_unix_seconds", int, str(path)),
    )
