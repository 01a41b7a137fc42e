"""Counterfactual-regression anomaly detection toolkit.

Fits one linear counterfactual per feature, scores points by how far
they sit from their counterfactuals, and benchmarks the result against
from-scratch isolation forest, LOF, and kNN baselines under a repeated
bootstrap protocol with ROC/PR evaluation and Friedman rank testing.
"""

from .baselines import (
    IsolationForestModel,
    NeighborIndex,
    average_path_length,
    default_k,
    iforest_fit,
    iforest_score,
    knn_score,
    lof_score,
)
from .bench import (
    BenchCell,
    BenchConfig,
    BenchTable,
    DetectorResult,
    ModelSpec,
    emit_table,
    load_score_file,
    matrix_fingerprints,
    row_fingerprint,
    run_bench,
    run_detector,
    write_score_file,
)
from .dataset import (
    Dataset,
    GeneratorConfig,
    SplitPair,
    bootstrap,
    generate_mulcross_like,
    load_csv,
    split,
    write_csv,
)
from .errors import ConfigError, DataError, ModelFormatError, SamError
from .metrics import (
    CurvePoints,
    RankTable,
    chi_square_tail,
    curve_csv,
    curve_points,
    friedman,
    pr_auc,
    roc_auc,
)
from .regression import LinearFit, RansacConfig, ols_fit, ransac_fit
from .sam_core import (
    FeatureFitMeta,
    SamModel,
    SamVariant,
    ScoreReport,
    attribute,
    counterfactual,
    load_model,
    sam_fit,
    sam_label,
    sam_score,
    save_model,
)
from .seeding import fnv1a64, mix_seed, rng_from_seed

__version__ = "0.1.0"

__all__ = [
    "BenchCell",
    "BenchConfig",
    "BenchTable",
    "ConfigError",
    "CurvePoints",
    "DataError",
    "Dataset",
    "DetectorResult",
    "FeatureFitMeta",
    "GeneratorConfig",
    "IsolationForestModel",
    "LinearFit",
    "ModelFormatError",
    "ModelSpec",
    "NeighborIndex",
    "RankTable",
    "RansacConfig",
    "SamError",
    "SamModel",
    "SamVariant",
    "ScoreReport",
    "SplitPair",
    "attribute",
    "average_path_length",
    "bootstrap",
    "chi_square_tail",
    "counterfactual",
    "curve_csv",
    "curve_points",
    "default_k",
    "emit_table",
    "fnv1a64",
    "friedman",
    "generate_mulcross_like",
    "iforest_fit",
    "iforest_score",
    "knn_score",
    "load_csv",
    "load_model",
    "load_score_file",
    "lof_score",
    "matrix_fingerprints",
    "mix_seed",
    "ols_fit",
    "pr_auc",
    "ransac_fit",
    "rng_from_seed",
    "roc_auc",
    "row_fingerprint",
    "run_bench",
    "run_detector",
    "sam_fit",
    "sam_label",
    "sam_score",
    "save_model",
    "split",
    "write_csv",
    "write_score_file",
]
