"""Dataset model, CSV round-trip, synthetic generation, and resampling.

Labels use True = anomaly everywhere inside the library; the -1/1
convention of the detector output exists only at the scoring boundary.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .seeding import check_seed, rng_from_seed


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable numeric matrix with named columns and optional anomaly marks.

    Attributes:
        values: n x d float64 matrix of feature values.
        feature_names: d unique column names.
        labels: optional length-n boolean vector, True marking anomalies.
        name: identifier used in benchmark tables and seed derivation.
    """

    values: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray | None = None
    name: str = "unnamed"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"values must be a 2-D matrix, got ndim={values.ndim}")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != values.shape[1]:
            raise DataError(
                f"{len(names)} feature names for {values.shape[1]} columns"
            )
        if not np.isfinite(values).all():
            # Rows count from 1; the column is named so the message stays
            # useful after reordering.
            row, col = np.argwhere(~np.isfinite(values))[0]
            raise DataError(
                f"non-finite value at row {row + 1}, column {names[col]!r}"
            )
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate feature names: {dupes}")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=bool)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"{labels.size} labels for {values.shape[0]} rows"
                )
            labels = _freeze(labels)
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        """Number of rows."""
        return self.values.shape[0]

    @property
    def d(self) -> int:
        """Number of feature columns."""
        return self.values.shape[1]


@dataclass(frozen=True)
class SplitPair:
    """A train/test partition of one dataset.

    Attributes:
        train: training rows.
        test: held-out rows.
        seed: the seed that produced the permutation.
    """

    train: Dataset
    test: Dataset
    seed: int


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the two-cluster synthetic anomaly generator.

    Attributes:
        n: total point count.
        d: dimension.
        contamination: anomaly fraction in [0, 1).
        cluster_shift: anomaly-cluster displacement along (1, ..., 1),
            in units of the inlier standard deviation.
        seed: 64-bit unsigned seed.
    """

    n: int = 262_144
    d: int = 4
    contamination: float = 0.10
    cluster_shift: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d!r}")
        if not 0.0 <= self.contamination < 1.0:
            raise ConfigError(
                f"contamination must be in [0, 1), got {self.contamination!r}"
            )
        if self.contamination > 0 and self.contamination * self.n < 1:
            raise ConfigError(
                "contamination requests fewer than one anomaly: "
                f"contamination={self.contamination} n={self.n}"
            )
        if not self.cluster_shift > 0:
            raise ConfigError(
                f"cluster_shift must be positive, got {self.cluster_shift!r}"
            )
        check_seed(self.seed)


def load_csv(
    path: str | Path,
    label_column: str | None = None,
    anomaly_value: str = "1",
) -> Dataset:
    """Read a numeric CSV with a mandatory header row into a Dataset.

    Args:
        path: CSV file; comma-separated, UTF-8, decimal point '.'.
        label_column: if given, this column becomes the labels instead of
            a feature; a cell is an anomaly iff it equals anomaly_value.
        anomaly_value: string a label cell must equal to mark an anomaly.

    Returns:
        Dataset named after the file stem, labels present iff
        label_column was given.

    Raises:
        DataError: missing file, file without data rows, unknown label
            column, ragged rows, or a cell that does not parse as a
            finite number. Cell errors name the column and the file row,
            counting the header as row 1.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        label_idx: int | None = None
        if label_column is not None:
            if label_column not in header:
                raise DataError(
                    f"{path}: label column {label_column!r} not in header {header}"
                )
            label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        rows: list[list[float]] = []
        labels: list[bool] = []
        # Row numbers in error messages count file lines, header included,
        # so they match what an editor shows.
        for row_num, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise DataError(
                    f"{path}: row {row_num} has {len(raw)} cells, "
                    f"expected {len(header)}"
                )
            parsed: list[float] = []
            for i, cell in enumerate(raw):
                if i == label_idx:
                    labels.append(cell.strip() == anomaly_value)
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_num}, column {header[i]!r}: "
                        f"cell {cell!r} is not a number"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: row {row_num}, column {header[i]!r}: "
                        f"cell {cell!r} is not finite"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows after the header")
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return Dataset(
        values=values,
        feature_names=tuple(feature_names),
        labels=np.array(labels, dtype=bool) if label_idx is not None else None,
        name=path.stem,
    )


def write_csv(
    ds: Dataset,
    path: str | Path,
    label_column: str = "label",
) -> None:
    """Write a Dataset to CSV with full float round-trip precision.

    Labels, when present, are written as a trailing 1/0 column named
    label_column. Reading the file back with load_csv reproduces the
    values exactly.
    """
    path = Path(path)
    has_labels = ds.labels is not None
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(ds.feature_names) + ([label_column] if has_labels else [])
        writer.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.values[i]]
            if has_labels:
                row.append("1" if ds.labels[i] else "0")
            writer.writerow(row)


def generate_mulcross_like(cfg: GeneratorConfig) -> Dataset:
    """Generate the two-cluster synthetic anomaly dataset.

    Inliers are standard multivariate normal (identity covariance).
    floor(contamination * n) anomalies are split evenly across two
    clusters centered at +-cluster_shift*(1, ..., 1), each with
    covariance 0.25*identity. Rows are shuffled; output is
    deterministic under cfg.seed.
    """
    rng = rng_from_seed(cfg.seed)
    n_anom = int(cfg.contamination * cfg.n)
    n_inlier = cfg.n - n_anom
    n_first = n_anom // 2 + n_anom % 2
    n_second = n_anom // 2
    center = cfg.cluster_shift * np.ones(cfg.d)
    blocks = [rng.standard_normal((n_inlier, cfg.d))]
    if n_first:
        blocks.append(center + 0.5 * rng.standard_normal((n_first, cfg.d)))
    if n_second:
        blocks.append(-center + 0.5 * rng.standard_normal((n_second, cfg.d)))
    values = np.vstack(blocks)
    labels = np.zeros(cfg.n, dtype=bool)
    labels[n_inlier:] = True
    order = rng.permutation(cfg.n)
    return Dataset(
        values=values[order],
        feature_names=tuple(f"f{i + 1}" for i in range(cfg.d)),
        labels=labels[order],
        name="mulcross_like",
    )


def bootstrap(ds: Dataset, seed: int) -> Dataset:
    """Resample n rows uniformly with replacement, carrying labels along."""
    if ds.n < 1:
        raise DataError("cannot bootstrap an empty dataset")
    rng = rng_from_seed(seed)
    idx = rng.integers(0, ds.n, size=ds.n)
    return Dataset(
        values=ds.values[idx],
        feature_names=ds.feature_names,
        labels=ds.labels[idx] if ds.labels is not None else None,
        name=ds.name,
    )


def split(ds: Dataset, train_fraction: float, seed: int) -> SplitPair:
    """Randomly partition a dataset into train and test halves.

    A seeded permutation is cut at floor(train_fraction * n); the prefix
    becomes the training set.

    Raises:
        DataError: fewer than 2 rows.
        ConfigError: train_fraction outside (0, 1).
    """
    if ds.n < 2:
        raise DataError(f"need at least 2 rows to split, got {ds.n}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(
            f"train_fraction must be in (0, 1), got {train_fraction!r}"
        )
    seed = check_seed(seed)
    rng = rng_from_seed(seed)
    order = rng.permutation(ds.n)
    cut = int(train_fraction * ds.n)
    train_idx, test_idx = order[:cut], order[cut:]

    def _take(idx: np.ndarray) -> Dataset:
        return Dataset(
            values=ds.values[idx],
            feature_names=ds.feature_names,
            labels=ds.labels[idx] if ds.labels is not None else None,
            name=ds.name,
        )

    return SplitPair(train=_take(train_idx), test=_take(test_idx), seed=seed)
