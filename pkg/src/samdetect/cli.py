"""Command-line entry point: fit, score, bench, gen.

Exit codes: 0 success, 1 usage or configuration error, 2 data or model
error. Standard output carries only data (CSV or markdown); all
diagnostics go to standard error.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import yaml

from .bench import BenchConfig, ModelSpec, emit_table, run_bench
from .dataset import (
    Dataset,
    GeneratorConfig,
    generate_mulcross_like,
    load_csv,
    write_csv,
)
from .errors import ConfigError, DataError, SamError
from .sam_core import (
    SamVariant,
    attribute,
    load_model,
    sam_fit,
    sam_label,
    sam_score,
    save_model,
)


@click.group(name="samdetect")
def cli() -> None:
    """Counterfactual anomaly detection, baselines, and benchmarking."""


@cli.command("fit")
@click.option("--input", "input_path", required=True, help="Training CSV.")
@click.option("--output-model", required=True, help="Model JSON to write.")
@click.option("--ransac", is_flag=True, help="Robust consensus fitting.")
@click.option(
    "--normalize-default",
    is_flag=True,
    help="Record normalized scoring as this model's default.",
)
@click.option("--seed", default=0, show_default=True, help="64-bit fit seed.")
@click.option("--label-col", default=None, help="Column to exclude from features.")
@click.option(
    "--anomaly-value",
    default="1",
    show_default=True,
    help="Label cell value marking an anomaly.",
)
@click.option(
    "--zscore",
    is_flag=True,
    help="Express residuals in units of the training standard deviation.",
)
def cmd_fit(
    input_path: str,
    output_model: str,
    ransac: bool,
    normalize_default: bool,
    seed: int,
    label_col: str | None,
    anomaly_value: str,
    zscore: bool,
) -> None:
    """Fit a counterfactual model on a CSV and save it."""
    train = load_csv(input_path, label_column=label_col, anomaly_value=anomaly_value)
    variant = SamVariant(use_ransac=ransac, normalize=normalize_default)
    model = sam_fit(train, variant, seed=seed, zscore=zscore)
    save_model(model, output_model)
    for name, meta in zip(model.feature_names, model.fit_meta):
        click.echo(
            f"{name}: ransac={'yes' if meta.used_ransac else 'no'} "
            f"converged={'yes' if meta.converged else 'no'} "
            f"degenerate={'yes' if meta.degenerate else 'no'}",
            err=True,
        )
    click.echo(f"model written to {output_model}", err=True)


@cli.command("score")
@click.option("--model", "model_path", required=True, help="Model JSON.")
@click.option("--input", "input_path", required=True, help="CSV to score.")
@click.option(
    "--normalize/--no-normalize",
    "normalize",
    default=None,
    help="Override the model's recorded normalization default.",
)
@click.option("--epsilon", default=1e-9, show_default=True)
@click.option(
    "--denominator",
    type=click.Choice(["observed", "counterfactual"]),
    default="observed",
    show_default=True,
    help="Magnitude that normalizes residuals.",
)
@click.option(
    "--threshold-percentile",
    type=float,
    default=None,
    help="Emit -1/1 labels using this score percentile as threshold.",
)
@click.option(
    "--attribute-top",
    type=int,
    default=None,
    help="Emit the K features contributing most per row.",
)
@click.option("--label-col", default=None, help="Column to exclude from features.")
def cmd_score(
    model_path: str,
    input_path: str,
    normalize: bool | None,
    epsilon: float,
    denominator: str,
    threshold_percentile: float | None,
    attribute_top: int | None,
    label_col: str | None,
) -> None:
    """Score a CSV against a model; emits per-row CSV on stdout."""
    model = load_model(model_path)
    ds = load_csv(input_path, label_column=label_col)
    if set(ds.feature_names) != set(model.feature_names):
        missing = sorted(set(model.feature_names) - set(ds.feature_names))
        extra = sorted(set(ds.feature_names) - set(model.feature_names))
        raise DataError(
            "feature names disagree with the model; "
            f"missing from input: {missing}; not in model: {extra}"
        )
    # Align by name so column order of re-exported CSVs cannot matter.
    order = [ds.feature_names.index(name) for name in model.feature_names]
    X = ds.values[:, order]
    report = sam_score(
        model, X, normalize=normalize, epsilon=epsilon, denominator=denominator
    )
    labels = (
        sam_label(report, threshold_percentile)
        if threshold_percentile is not None
        else None
    )
    top = 0
    if attribute_top is not None:
        if attribute_top < 1:
            raise ConfigError(
                f"--attribute-top must be positive, got {attribute_top}"
            )
        top = min(attribute_top, model.d)
    header = ["score"]
    if labels is not None:
        header.append("label")
    for j in range(1, top + 1):
        header += [f"top{j}_feature", f"top{j}_share"]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for i in range(report.scores.size):
        row: list[str] = [repr(float(report.scores[i]))]
        if labels is not None:
            row.append(str(int(labels[i])))
        if top:
            for name, _, share in attribute(report, i)[:top]:
                row += [name, repr(share)]
        writer.writerow(row)


def _rename(ds: Dataset, name: str) -> Dataset:
    return Dataset(
        values=ds.values,
        feature_names=ds.feature_names,
        labels=ds.labels,
        name=name,
    )


def _dataset_from_entry(entry: object) -> Dataset:
    if not isinstance(entry, dict):
        raise ConfigError(f"dataset entry must be a mapping, got {entry!r}")
    if "path" in entry:
        label_col = entry.get("label_col", "label")
        ds = load_csv(
            str(entry["path"]),
            label_column=None if label_col is None else str(label_col),
            anomaly_value=str(entry.get("anomaly_value", "1")),
        )
        return _rename(ds, str(entry.get("name", ds.name)))
    if "generate" in entry:
        params = entry["generate"]
        if not isinstance(params, dict):
            raise ConfigError(f"generate entry must be a mapping, got {params!r}")
        known = {"kind", "n", "d", "contamination", "shift", "seed"}
        unknown = sorted(set(params) - known)
        if unknown:
            raise ConfigError(f"unknown generate keys: {unknown}")
        kind = str(params.get("kind", "mulcross"))
        if kind != "mulcross":
            raise ConfigError(f"unknown generator kind {kind!r}")
        cfg = GeneratorConfig(
            n=int(params.get("n", 262_144)),
            d=int(params.get("d", 4)),
            contamination=float(params.get("contamination", 0.10)),
            cluster_shift=float(params.get("shift", 2.0)),
            seed=int(params.get("seed", 0)),
        )
        ds = generate_mulcross_like(cfg)
        return _rename(ds, str(entry.get("name", ds.name)))
    raise ConfigError(
        f"dataset entry needs either 'path' or 'generate', got keys {sorted(entry)}"
    )


def _model_from_entry(entry: object) -> ModelSpec:
    if isinstance(entry, str):
        return ModelSpec.from_alias(entry)
    if not isinstance(entry, dict):
        raise ConfigError(f"model entry must be a string or mapping, got {entry!r}")
    options = entry.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError(f"model options must be a mapping, got {options!r}")
    if "alias" in entry:
        base = ModelSpec.from_alias(str(entry["alias"]))
        return ModelSpec(
            name=str(entry.get("name", base.name)),
            kind=base.kind,
            options={**base.options, **options},
        )
    if "kind" not in entry or "name" not in entry:
        raise ConfigError(
            f"model entry needs 'alias' or both 'kind' and 'name', "
            f"got keys {sorted(entry)}"
        )
    return ModelSpec(name=str(entry["name"]), kind=str(entry["kind"]), options=options)


@cli.command("bench")
@click.option("--config", "config_path", default=None, help="YAML run description.")
@click.option(
    "--dataset",
    "dataset_paths",
    multiple=True,
    help="Labeled CSV (repeatable); replaces the config file's datasets.",
)
@click.option(
    "--label-col",
    default="label",
    show_default=True,
    help="Label column of --dataset files.",
)
@click.option("--anomaly-value", default="1", show_default=True)
@click.option(
    "--models",
    "models_text",
    default=None,
    help="Comma-separated aliases (sam++/sam+-/sam-+/sam--/iforest/lof/knn); "
    "replaces the config file's models.",
)
@click.option("--repeats", type=int, default=None)
@click.option("--train-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--metrics", "metrics_text", default=None, help="e.g. roc_auc,pr_auc")
@click.option("--out", "out_path", default=None, help="Write long-form CSV here.")
@click.option(
    "--markdown/--no-markdown",
    default=True,
    show_default=True,
    help="Print the markdown table on stdout.",
)
def cmd_bench(
    config_path: str | None,
    dataset_paths: tuple[str, ...],
    label_col: str,
    anomaly_value: str,
    models_text: str | None,
    repeats: int | None,
    train_fraction: float | None,
    seed: int | None,
    metrics_text: str | None,
    out_path: str | None,
    markdown: bool,
) -> None:
    """Run the bootstrap benchmark protocol over datasets and models."""
    doc: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"no such config file: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        doc = loaded

    if dataset_paths:
        datasets = [
            load_csv(p, label_column=label_col, anomaly_value=anomaly_value)
            for p in dataset_paths
        ]
    else:
        entries = doc.get("datasets", [])
        if not isinstance(entries, list):
            raise ConfigError("config 'datasets' must be a list")
        datasets = [_dataset_from_entry(e) for e in entries]
    if not datasets:
        raise ConfigError("no datasets configured; pass --dataset or --config")

    if models_text is not None:
        models = [
            ModelSpec.from_alias(alias)
            for alias in models_text.split(",")
            if alias.strip()
        ]
    else:
        entries = doc.get("models", [])
        if not isinstance(entries, list):
            raise ConfigError("config 'models' must be a list")
        models = [_model_from_entry(e) for e in entries]
    if not models:
        raise ConfigError("no models configured; pass --models or --config")

    if metrics_text is not None:
        metric_names = tuple(m.strip() for m in metrics_text.split(",") if m.strip())
    else:
        metric_names = tuple(doc.get("metrics", ("roc_auc", "pr_auc")))

    cfg = BenchConfig(
        datasets=tuple(datasets),
        models=tuple(models),
        repeats=repeats if repeats is not None else int(doc.get("repeats", 10)),
        train_fraction=(
            train_fraction
            if train_fraction is not None
            else float(doc.get("train_fraction", 0.7))
        ),
        seed=seed if seed is not None else int(doc.get("seed", 0)),
        metrics=metric_names,
    )
    table = run_bench(cfg)
    if out_path is not None:
        Path(out_path).write_text(emit_table(table, "csv"), encoding="utf-8")
        click.echo(f"results written to {out_path}", err=True)
    if markdown:
        click.echo(emit_table(table, "markdown"), nl=False)


@cli.command("gen")
@click.option(
    "--kind",
    type=click.Choice(["mulcross"]),
    default="mulcross",
    show_default=True,
)
@click.option("--n", default=262_144, show_default=True)
@click.option("--d", default=4, show_default=True)
@click.option("--contamination", default=0.10, show_default=True)
@click.option("--shift", default=2.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, help="CSV file to write.")
def cmd_gen(
    kind: str,
    n: int,
    d: int,
    contamination: float,
    shift: float,
    seed: int,
    out_path: str,
) -> None:
    """Generate a labeled synthetic dataset (label column: 1=anomaly)."""
    cfg = GeneratorConfig(
        n=n, d=d, contamination=contamination, cluster_shift=shift, seed=seed
    )
    ds = generate_mulcross_like(cfg)
    write_csv(ds, out_path, label_column="label")
    click.echo(
        f"wrote {ds.n} rows x {ds.d} features "
        f"({int(ds.labels.sum())} anomalies) to {out_path}",
        err=True,
    )


def main(argv: list[str] | None = None) -> int:
    """Entry point translating exceptions into documented exit codes."""
    try:
        cli.main(args=argv, prog_name="samdetect", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except SamError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0
