"""Command-line experiment runner.

Subcommands: prepare, train, baseline, sweep, plotdata, evaluate. Options
mirror the experiment config; a YAML config file (--config) overrides the
built-in defaults and explicit flags override the config file. Output paths
resolve under $FEDBOOST_OUTPUT_ROOT when that is set.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from fedboost import data as dmod
from fedboost.binning import bin_dataset
from fedboost.experiments import (
    DEFAULT_GRID,
    ConfigError,
    ExperimentConfig,
    run_experiment,
    run_sweep,
    write_plotdata,
)
from fedboost.gbdt import HyperParams, predict_output
from fedboost.metrics import compute_metrics
from fedboost.model_io import load_model

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_CONFIG_KEYS = {
    "manifest": str,
    "partition": str,
    "n_clients": int,
    "alpha": float,
    "scheme": str,
    "sampling": str,
    "fraction": int,
    "eta": float,
    "reg_lambda": float,
    "max_depth": int,
    "max_bin": int,
    "rounds": int,
    "early_stop": int,
    "min_gain": float,
    "runs": int,
    "max_clients": int,
    "seed": int,
}

_DEFAULTS = {
    "partition": "by_key",
    "n_clients": 4,
    "alpha": 0.5,
    "scheme": "80/20",
    "sampling": "none",
    "fraction": 100,
    "eta": 0.1,
    "reg_lambda": 0.1,
    "max_depth": 6,
    "max_bin": 256,
    "rounds": 200,
    "early_stop": 0,
    "min_gain": 0.0,
    "runs": 5,
    "max_clients": None,
    "seed": 0,
}


def _resolve_output(path: str) -> Path:
    root = os.environ.get("FEDBOOST_OUTPUT_ROOT")
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must be a key-value mapping")
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return {k: (_CONFIG_KEYS[k](v) if v is not None else None) for k, v in raw.items()}


def _merge_config(config_file: str | None, flags: dict) -> dict:
    merged = dict(_DEFAULTS)
    merged.update(_load_config_file(config_file))
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    if "manifest" not in merged or merged["manifest"] is None:
        raise ConfigError("a dataset manifest is required (--manifest or config file)")
    return merged


def _experiment_config(merged: dict) -> ExperimentConfig:
    if merged["sampling"] == "none" and merged["fraction"] != 100:
        raise ConfigError("sampling 'none' requires fraction 100")
    try:
        params = HyperParams(
            eta=merged["eta"],
            reg_lambda=merged["reg_lambda"],
            max_depth=merged["max_depth"],
            max_bin=merged["max_bin"],
            rounds=merged["rounds"],
            early_stop_rounds=merged["early_stop"],
            min_gain=merged["min_gain"],
        )
        return ExperimentConfig(
            manifest_path=merged["manifest"],
            partition=merged["partition"],
            n_clients=merged["n_clients"],
            alpha=merged["alpha"],
            scheme=merged["scheme"],
            sampling_method=merged["sampling"],
            sampling_fraction=merged["fraction"],
            params=params,
            n_runs=merged["runs"],
            max_clients=merged["max_clients"],
            master_seed=merged["seed"],
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _experiment_options(fn):
    options = [
        click.option("--manifest", type=str, default=None, help="Dataset manifest (YAML)."),
        click.option("--config", "config_file", type=str, default=None, help="YAML config file."),
        click.option("--partition", type=click.Choice(["by_key", "dirichlet", "single"]), default=None),
        click.option("--n-clients", type=int, default=None, help="Client count (dirichlet)."),
        click.option("--alpha", type=float, default=None, help="Dirichlet concentration."),
        click.option("--scheme", type=click.Choice(["80/20", "70/20/10"]), default=None),
        click.option("--sampling", type=click.Choice(["none", "uniform", "mvs"]), default=None),
        click.option("--fraction", type=int, default=None, help="Sampling fraction in percent."),
        click.option("--eta", type=float, default=None, help="Learning rate."),
        click.option("--reg-lambda", type=float, default=None, help="L2 regularization."),
        click.option("--max-depth", type=int, default=None),
        click.option("--max-bin", type=int, default=None),
        click.option("--rounds", type=int, default=None),
        click.option("--early-stop", type=int, default=None, help="Patience in rounds (0 = off)."),
        click.option("--min-gain", type=float, default=None),
        click.option("--runs", type=int, default=None, help="Independent runs to aggregate."),
        click.option("--max-clients", type=int, default=None, help="Subsample clients per run."),
        click.option("--seed", type=int, default=None, help="Master seed."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _fail(exc: Exception, code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, FileNotFoundError) as exc:
        _fail(exc, EXIT_CONFIG)
    except Exception as exc:  # anything past config validation is a runtime failure
        _fail(exc, EXIT_RUNTIME)


@click.group()
def main():
    """Federated gradient-boosted trees: experiments on tabular CSV data."""


@main.command()
@_experiment_options
def prepare(config_file, **flags):
    """Validate a manifest and report partition statistics."""

    def body():
        merged = _merge_config(config_file, flags)
        config = _experiment_config(merged)
        manifest = dmod.load_manifest(config.manifest_path)
        table = dmod.load_csv(manifest)
        schema = dmod.build_schema(table, manifest)
        click.echo(f"dataset: {manifest.path}")
        click.echo(f"task: {schema.task}  rows: {table.n_rows}  features: {len(schema.feature_names)}")
        if schema.task != "regression":
            click.echo(f"classes: {schema.n_classes}")
        if config.partition == "by_key":
            keys, tables = dmod.partition_by_key(table, manifest.split_feature)
            click.echo(f"partition by {manifest.split_feature!r}: {len(keys)} clients")
            for key, t in zip(keys, tables):
                click.echo(f"  {key}: {t.n_rows} rows")
        elif config.partition == "dirichlet":
            from fedboost.seeding import derive_seed

            tables = dmod.partition_dirichlet(
                table, manifest.target_column, config.n_clients, config.alpha,
                derive_seed(config.master_seed, "run", 0, "partition"),
            )
            click.echo(f"dirichlet(alpha={config.alpha}): {len(tables)} clients")
            for i, t in enumerate(tables):
                click.echo(f"  client {i}: {t.n_rows} rows")
        else:
            click.echo("partition: single client (pooled)")

    _guarded(body)


def _echo_summary(summary: dict):
    click.echo(f"method: {summary['method']}  runs: {summary['n_runs']}")
    for key in sorted(summary["aggregate"]):
        click.echo(f"  {key}: {summary['aggregate'][key]:.6g}")


@main.command()
@click.option("--output", type=str, required=True, help="Output directory.")
@_experiment_options
def train(output, config_file, **flags):
    """Federated training across n runs; writes round logs, models, summary."""

    def body():
        config = _experiment_config(_merge_config(config_file, flags))
        summary = run_experiment(config, output_dir=_resolve_output(output))
        _echo_summary(summary)

    _guarded(body)


@main.command()
@click.option("--output", type=str, required=True, help="Output directory.")
@_experiment_options
def baseline(output, config_file, **flags):
    """Pooled (centralized) training with the same config surface."""

    def body():
        config = _experiment_config(_merge_config(config_file, flags))
        summary = run_experiment(config, output_dir=_resolve_output(output), pooled=True)
        _echo_summary(summary)

    _guarded(body)


@main.command()
@click.option("--output", type=str, required=True, help="Output directory.")
@click.option("--eta-grid", type=str, default=None, help="Comma-separated eta values.")
@click.option("--lambda-grid", type=str, default=None, help="Comma-separated lambda values.")
@click.option("--depth-grid", type=str, default=None, help="Comma-separated depth values.")
@click.option("--pooled", is_flag=True, default=False, help="Sweep the pooled trainer instead.")
@_experiment_options
def sweep(output, eta_grid, lambda_grid, depth_grid, pooled, config_file, **flags):
    """Grid search over the hyperparameter space; writes a ranked table."""

    def body():
        config = _experiment_config(_merge_config(config_file, flags))
        grid = dict(DEFAULT_GRID)
        if eta_grid is not None:
            grid["eta"] = [float(v) for v in eta_grid.split(",") if v]
        if lambda_grid is not None:
            grid["reg_lambda"] = [float(v) for v in lambda_grid.split(",") if v]
        if depth_grid is not None:
            grid["max_depth"] = [int(v) for v in depth_grid.split(",") if v]
        result = run_sweep(config, grid=grid, output_dir=_resolve_output(output), pooled=pooled)
        best = result["best"]
        click.echo(
            f"swept {result['n_points']} points on {result['metric']}; best: "
            f"eta={best['eta']} reg_lambda={best['reg_lambda']} max_depth={best['max_depth']} "
            f"mean={best['mean']:.6g} std={best['std']:.6g}"
        )

    _guarded(body)


@main.command()
@click.argument("summaries", nargs=-1, required=True)
@click.option("--output", type=str, required=True, help="Output directory.")
def plotdata(summaries, output):
    """Emit boxplot and local-vs-global delta tables from summary files."""

    def body():
        loaded = []
        for path in summaries:
            payload = json.loads(Path(path).read_text())
            if payload.get("format") != "fedboost.summary":
                raise ConfigError(f"{path} is not a summary file")
            loaded.append(payload)
        paths = write_plotdata(loaded, _resolve_output(output))
        for name, path in paths.items():
            click.echo(f"{name}: {path}")

    _guarded(body)


@main.command()
@click.option("--model", "model_path", type=str, required=True, help="Model file from train.")
@click.option("--data", "data_path", type=str, required=True, help="CSV to score.")
@click.option("--predictions", type=str, default=None, help="Optional predictions CSV.")
def evaluate(model_path, data_path, predictions):
    """Reload a trained model and score a CSV with the frozen schema."""

    def body():
        model, bins, schema_dict = load_model(model_path)
        if schema_dict is None:
            raise ConfigError("model file carries no encoding schema")
        schema = dmod.EncodingSchema.from_dict(schema_dict)
        manifest = dmod.DatasetManifest(
            path=data_path, target_column=schema.target_column, task=schema.task
        )
        table = dmod.load_csv(manifest)
        x, y, _ = dmod.encode(table, manifest, schema)
        binned = bin_dataset(x, y, bins, schema.task, schema.n_classes)
        output = predict_output(model, binned.bins)
        record = compute_metrics(schema.task, binned.labels, output)
        for key in sorted(record):
            click.echo(f"{key}: {record[key]:.6g}")
        if predictions is not None:
            values = output if schema.task == "regression" else output[1]
            lines = ["prediction"] + [repr(float(v)) for v in np.asarray(values)]
            Path(predictions).write_text("\n".join(lines) + "\n")

    _guarded(body)


if __name__ == "__main__":
    main()
