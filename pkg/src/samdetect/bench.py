"""Benchmark protocol: repeated bootstrap, split, fit, score, evaluate.

Every repeat draws a bootstrap resample of the labeled dataset, splits
it into train and test, fits each detector on the training rows only,
scores the test rows, and evaluates threshold-free metrics. Results
aggregate as mean and twice the sample standard deviation. All seeds
derive from the configured seed by mixing in the dataset name hash,
the repeat number, and the detector name hash, so cell values are
independent of the order in which datasets and models are listed.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .baselines import (
    NeighborIndex,
    default_k,
    iforest_fit,
    iforest_score,
    knn_score,
    lof_score,
)
from .dataset import Dataset, bootstrap, split
from .errors import ConfigError, DataError
from .metrics import pr_auc, roc_auc
from .regression import RansacConfig
from .sam_core import SamVariant, sam_fit, sam_score
from .seeding import check_seed, fnv1a64, mix_seed

METRICS: dict[str, Callable] = {"roc_auc": roc_auc, "pr_auc": pr_auc}
_METRIC_TITLES = {"roc_auc": "ROC AUC", "pr_auc": "PR AUC"}
_SAM_ALIASES = ("sam++", "sam+-", "sam-+", "sam--")
_BASELINE_ALIASES = ("iforest", "lof", "knn")
_RANSAC_OPTION_KEYS = (
    "max_iterations",
    "min_samples",
    "residual_threshold",
    "stop_inlier_fraction",
)


@dataclass(frozen=True)
class ModelSpec:
    """One detector entry of a benchmark run.

    Attributes:
        name: unique row key in the results table.
        kind: "sam", "iforest", "lof", "knn", "external" (precomputed
            scores keyed by row fingerprint), or "callable" (options
            carry a fit_score(train, test, seed) function; the hook for
            plugging in detectors this package does not implement).
        options: kind-specific settings, never mutated.
    """

    name: str
    kind: str
    options: Mapping[str, object] = field(default_factory=dict)

    @classmethod
    def from_alias(cls, alias: str) -> ModelSpec:
        """Build a spec from a short name like "sam+-" or "iforest"."""
        key = alias.strip().lower()
        if key in _SAM_ALIASES:
            variant = SamVariant.from_alias(key)
            return cls(
                name=key,
                kind="sam",
                options={
                    "use_ransac": variant.use_ransac,
                    "normalize": variant.normalize,
                },
            )
        if key in _BASELINE_ALIASES:
            return cls(name=key, kind=key)
        raise ConfigError(
            f"unknown model alias {alias!r}; expected one of "
            f"{_SAM_ALIASES + _BASELINE_ALIASES}"
        )


@dataclass(frozen=True)
class DetectorResult:
    """Uniform detector output: scores, with labels when thresholded."""

    scores: np.ndarray
    labels: np.ndarray | None = None


@dataclass(frozen=True)
class BenchConfig:
    """Everything one benchmark run depends on."""

    datasets: tuple[Dataset, ...]
    models: tuple[ModelSpec, ...]
    repeats: int = 10
    train_fraction: float = 0.7
    seed: int = 0
    metrics: tuple[str, ...] = ("roc_auc", "pr_auc")

    def __post_init__(self) -> None:
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if not self.datasets:
            raise ConfigError("benchmark needs at least one dataset")
        if not self.models:
            raise ConfigError("benchmark needs at least one model")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be positive, got {self.repeats!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train_fraction must be in (0, 1), got {self.train_fraction!r}"
            )
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown or not self.metrics:
            raise ConfigError(
                f"metrics must be a non-empty subset of {sorted(METRICS)}, "
                f"got {list(self.metrics)}"
            )
        names = [ds.name for ds in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError(f"dataset names must be unique, got {names}")
        keys = [spec.name for spec in self.models]
        if len(set(keys)) != len(keys):
            raise ConfigError(f"model names must be unique, got {keys}")
        check_seed(self.seed)


@dataclass(frozen=True)
class BenchCell:
    """Aggregated metric values of one (dataset, model, metric) cell.

    values holds one entry per repeat, None where that repeat failed;
    mean and two_sigma are None whenever any repeat failed, with the
    reasons listed in failures.
    """

    values: tuple[float | None, ...]
    mean: float | None
    two_sigma: float | None
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class BenchTable:
    """Benchmark results plus the configuration echo that produced them."""

    cells: Mapping[tuple[str, str, str], BenchCell]
    dataset_names: tuple[str, ...]
    model_names: tuple[str, ...]
    metric_names: tuple[str, ...]
    config_echo: tuple[tuple[str, str], ...]


def row_fingerprint(row: np.ndarray) -> str:
    """Content key of one data row: sha256 of the comma-joined float hex.

    External score files use this key, so any tool that sees the same
    numeric row (including bootstrap copies) can pre-score it.
    """
    joined = ",".join(float(v).hex() for v in row)
    return hashlib.sha256(joined.encode("ascii")).hexdigest()[:16]


def matrix_fingerprints(X: np.ndarray) -> list[str]:
    """Fingerprint of every row of a matrix."""
    return [row_fingerprint(row) for row in np.asarray(X, dtype=np.float64)]


def load_score_file(path: str | Path) -> dict[str, float]:
    """Read a fingerprint,score CSV written for an external detector."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such score file: {path}")
    out: dict[str, float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["fingerprint", "score"]:
            raise DataError(
                f"{path}: expected header 'fingerprint,score', got {header}"
            )
        for row_num, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}: row {row_num} has {len(row)} cells")
            try:
                out[row[0].strip()] = float(row[1])
            except ValueError:
                raise DataError(
                    f"{path}: row {row_num}: score {row[1]!r} is not a number"
                ) from None
    return out


def write_score_file(path: str | Path, X: np.ndarray, scores: np.ndarray) -> None:
    """Write a fingerprint,score CSV covering every row of X."""
    scores = np.asarray(scores, dtype=np.float64)
    fingerprints = matrix_fingerprints(X)
    if len(fingerprints) != scores.size:
        raise DataError(
            f"{len(fingerprints)} rows vs {scores.size} scores"
        )
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fingerprint", "score"])
        for fp, s in zip(fingerprints, scores):
            writer.writerow([fp, repr(float(s))])


def run_detector(
    spec: ModelSpec,
    train: Dataset,
    test: Dataset,
    seed: int,
    external_scores: Mapping[str, float] | None = None,
) -> DetectorResult:
    """Fit one detector on train and score the test rows.

    external kind specs skip fitting and look every test row up by its
    fingerprint in external_scores.

    Raises:
        ConfigError: unknown kind or invalid options.
        DataError: fingerprints missing from the external score map.
    """
    opts = dict(spec.options)
    if spec.kind == "sam":
        if "variant" in opts:
            variant = SamVariant.from_alias(str(opts["variant"]))
        else:
            variant = SamVariant(
                use_ransac=bool(opts.get("use_ransac", False)),
                normalize=bool(opts.get("normalize", False)),
            )
        ransac_kwargs = {k: opts[k] for k in _RANSAC_OPTION_KEYS if k in opts}
        ransac_cfg = RansacConfig(**ransac_kwargs) if ransac_kwargs else None
        model = sam_fit(
            train,
            variant,
            ransac_cfg,
            seed=seed,
            zscore=bool(opts.get("zscore", False)),
        )
        report = sam_score(
            model,
            test.values,
            normalize=variant.normalize,
            epsilon=float(opts.get("epsilon", 1e-9)),
            denominator=str(opts.get("denominator", "observed")),
        )
        return DetectorResult(scores=report.scores)
    if spec.kind == "iforest":
        model = iforest_fit(
            train,
            n_trees=int(opts.get("n_trees", 100)),
            subsample=int(opts.get("subsample", 256)),
            seed=seed,
        )
        return DetectorResult(scores=iforest_score(model, test.values))
    if spec.kind in ("lof", "knn"):
        k = int(opts["k"]) if "k" in opts else default_k(train.n)
        index = NeighborIndex(train.values, k)
        scorer = lof_score if spec.kind == "lof" else knn_score
        return DetectorResult(scores=scorer(index, test.values))
    if spec.kind == "external":
        if external_scores is None:
            external_scores = load_score_file(str(opts["path"]))
        fingerprints = matrix_fingerprints(test.values)
        missing = sum(1 for fp in fingerprints if fp not in external_scores)
        if missing:
            raise DataError(
                f"external detector {spec.name!r}: {missing} of "
                f"{len(fingerprints)} test rows missing from the score file"
            )
        return DetectorResult(
            scores=np.array([external_scores[fp] for fp in fingerprints])
        )
    if spec.kind == "callable":
        fn = opts["fit_score"]
        scores = np.asarray(fn(train, test, seed), dtype=np.float64)
        if scores.shape != (test.n,):
            raise DataError(
                f"callable detector {spec.name!r} returned shape "
                f"{scores.shape}, expected ({test.n},)"
            )
        return DetectorResult(scores=scores)
    raise ConfigError(f"unknown detector kind {spec.kind!r}")


def _config_echo(cfg: BenchConfig) -> tuple[tuple[str, str], ...]:
    return (
        ("seed", str(cfg.seed)),
        ("repeats", str(cfg.repeats)),
        ("train_fraction", repr(float(cfg.train_fraction))),
        ("metrics", ",".join(cfg.metrics)),
        (
            "datasets",
            ";".join(f"{ds.name}(n={ds.n},d={ds.d})" for ds in cfg.datasets),
        ),
        (
            "models",
            ";".join(f"{spec.name}({spec.kind})" for spec in cfg.models),
        ),
    )


def run_bench(cfg: BenchConfig) -> BenchTable:
    """Execute the full protocol and aggregate per-cell statistics.

    A detector failure on any repeat leaves that cell's aggregate null
    with the reason recorded; it never aborts the run.

    Raises:
        DataError: a dataset without labels.
    """
    for ds in cfg.datasets:
        if ds.labels is None:
            raise DataError(f"dataset {ds.name!r} has no labels")
    external_maps = {
        spec.name: load_score_file(str(dict(spec.options)["path"]))
        for spec in cfg.models
        if spec.kind == "external"
    }
    values: dict[tuple[str, str, str], list[float | None]] = {
        (ds.name, spec.name, metric): []
        for ds in cfg.datasets
        for spec in cfg.models
        for metric in cfg.metrics
    }
    failures: dict[tuple[str, str, str], list[str]] = {
        key: [] for key in values
    }
    for ds in cfg.datasets:
        ds_seed = mix_seed(cfg.seed, fnv1a64(ds.name))
        for r in range(cfg.repeats):
            r_seed = mix_seed(ds_seed, r)
            boot = bootstrap(ds, mix_seed(r_seed, 1))
            pair = split(boot, cfg.train_fraction, mix_seed(r_seed, 2))
            for spec in cfg.models:
                model_seed = mix_seed(r_seed, fnv1a64(spec.name))
                try:
                    result = run_detector(
                        spec,
                        pair.train,
                        pair.test,
                        model_seed,
                        external_scores=external_maps.get(spec.name),
                    )
                except Exception as exc:
                    reason = f"repeat {r + 1}: {type(exc).__name__}: {exc}"
                    for metric in cfg.metrics:
                        values[(ds.name, spec.name, metric)].append(None)
                        failures[(ds.name, spec.name, metric)].append(reason)
                    continue
                for metric in cfg.metrics:
                    key = (ds.name, spec.name, metric)
                    try:
                        values[key].append(
                            float(METRICS[metric](result.scores, pair.test.labels))
                        )
                    except Exception as exc:
                        values[key].append(None)
                        failures[key].append(
                            f"repeat {r + 1}: {type(exc).__name__}: {exc}"
                        )

    cells: dict[tuple[str, str, str], BenchCell] = {}
    for key, series in values.items():
        fails = tuple(failures[key])
        if fails:
            cells[key] = BenchCell(
                values=tuple(series), mean=None, two_sigma=None, failures=fails
            )
            continue
        arr = np.array(series, dtype=np.float64)
        two_sigma = 2.0 * float(arr.std(ddof=1)) if cfg.repeats > 1 else 0.0
        cells[key] = BenchCell(
            values=tuple(series),
            mean=float(arr.mean()),
            two_sigma=two_sigma,
        )
    return BenchTable(
        cells=cells,
        dataset_names=tuple(ds.name for ds in cfg.datasets),
        model_names=tuple(spec.name for spec in cfg.models),
        metric_names=cfg.metrics,
        config_echo=_config_echo(cfg),
    )


def _markdown_cell(cell: BenchCell, best: float | None, second: float | None) -> str:
    if cell.mean is None:
        return "—"
    text = f"{cell.mean:.2f} ± {cell.two_sigma:.2f}"
    if best is not None and cell.mean == best:
        return f"**{text}**"
    if second is not None and cell.mean == second:
        return f"<u>{text}</u>"
    return text


def emit_table(table: BenchTable, format: str = "markdown") -> str:
    """Render results as a markdown table or machine-readable CSV.

    Markdown shows one models x datasets block per metric with cells
    "mean ± two_sigma" at two decimals, the best mean per column bold
    and the second best underlined. CSV is the long form
    dataset,model,metric,mean,two_sigma at full float precision, with
    the configuration echoed as leading comment lines.
    """
    if format == "csv":
        out = io.StringIO()
        for key, value in table.config_echo:
            out.write(f"# {key}={value}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["dataset", "model", "metric", "mean", "two_sigma"])
        for ds in table.dataset_names:
            for model in table.model_names:
                for metric in table.metric_names:
                    cell = table.cells[(ds, model, metric)]
                    writer.writerow(
                        [
                            ds,
                            model,
                            metric,
                            "" if cell.mean is None else repr(cell.mean),
                            "" if cell.two_sigma is None else repr(cell.two_sigma),
                        ]
                    )
        return out.getvalue()
    if format != "markdown":
        raise ConfigError(f'format must be "csv" or "markdown", got {format!r}')

    out = io.StringIO()
    notes: list[str] = []
    for metric in table.metric_names:
        title = _METRIC_TITLES.get(metric, metric)
        out.write(f"## {title}\n\n")
        out.write("| model | " + " | ".join(table.dataset_names) + " |\n")
        out.write("| --- " * (len(table.dataset_names) + 1) + "|\n")
        column_best: dict[str, tuple[float | None, float | None]] = {}
        for ds in table.dataset_names:
            means = [
                table.cells[(ds, model, metric)].mean
                for model in table.model_names
            ]
            present = sorted({m for m in means if m is not None}, reverse=True)
            column_best[ds] = (
                present[0] if present else None,
                present[1] if len(present) > 1 else None,
            )
        for model in table.model_names:
            row = [model]
            for ds in table.dataset_names:
                cell = table.cells[(ds, model, metric)]
                best, second = column_best[ds]
                row.append(_markdown_cell(cell, best, second))
                for reason in cell.failures:
                    notes.append(f"{model} on {ds} ({metric}): {reason}")
            out.write("| " + " | ".join(row) + " |\n")
        out.write("\n")
    if notes:
        out.write("Failures:\n")
        for note in notes:
            out.write(f"- {note}\n")
    return out.getvalue()
