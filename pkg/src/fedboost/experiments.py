"""Experiment orchestration: multi-run federated training, pooled baselines,
grid sweeps, and plot-data emission.

Every run is reproducible from (manifest, config, master seed): run r derives
its seed from the master seed, and partitioning, splitting, and per-round
sampling all draw from labelled sub-seeds of that run seed. Summary and
round-log files contain no volatile fields (timings go to a separate file),
so repeated invocations are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from fedboost import data as dmod
from fedboost.binning import bin_dataset
from fedboost.boosting import base_score_from_labels, bins_from_matrix, train_pooled
from fedboost.federation import (
    ClientSplits,
    evaluate_local_vs_global,
    make_clients,
    setup,
    train_federated,
)
from fedboost.gbdt import HyperParams
from fedboost.metrics import primary_metric
from fedboost.sampling import SamplingConfig
from fedboost.seeding import derive_seed

# hyperparameter grid the sweep command walks by default
DEFAULT_GRID = {
    "eta": [0.001, 0.01, 0.02, 0.05, 0.1],
    "reg_lambda": [0.001, 0.01, 0.02, 0.05, 0.1],
    "max_depth": [3, 4, 5, 6, 7, 8],
}


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to a distinct CLI exit code)."""


@dataclass(frozen=True)
class ExperimentConfig:
    manifest_path: str
    partition: str = "by_key"  # by_key | dirichlet | single
    n_clients: int = 4  # dirichlet only
    alpha: float = 0.5  # dirichlet only
    scheme: str = "80/20"
    sampling_method: str = "none"
    sampling_fraction: int = 100
    params: HyperParams = field(default_factory=HyperParams)
    n_runs: int = 5
    max_clients: int | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.partition not in ("by_key", "dirichlet", "single"):
            raise ConfigError(f"unknown partition {self.partition!r}")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.scheme not in ("80/20", "70/20/10"):
            raise ConfigError(f"unknown split scheme {self.scheme!r}")

    @property
    def method_label(self) -> str:
        return f"{self.sampling_method}{self.sampling_fraction}"


def config_fingerprint(config: ExperimentConfig, manifest_text: str) -> str:
    payload = asdict(config)
    payload.pop("manifest_path")
    payload["manifest_sha256"] = hashlib.sha256(manifest_text.encode()).hexdigest()
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _partition_tables(table, manifest, config: ExperimentConfig, run_seed: int):
    if config.partition == "single":
        return ["all"], [table]
    if config.partition == "by_key":
        if manifest.split_feature is None:
            raise ConfigError("by_key partition needs split_feature in the manifest")
        return dmod.partition_by_key(table, manifest.split_feature)
    if manifest.task == "regression":
        raise ConfigError("dirichlet partition applies to classification tasks only")
    tables = dmod.partition_dirichlet(
        table,
        manifest.target_column,
        config.n_clients,
        config.alpha,
        derive_seed(run_seed, "partition"),
    )
    return [str(i) for i in range(len(tables))], tables


def _client_splits(client_tables, manifest, schema, scheme, run_seed):
    splits = []
    for idx, client_table in enumerate(client_tables):
        train_t, valid_t, test_t = dmod.split_train_valid_test(
            client_table, scheme, derive_seed(run_seed, "split", idx)
        )
        train_x, train_y, _ = dmod.encode(train_t, manifest, schema)
        valid_x, valid_y, _ = dmod.encode(valid_t, manifest, schema)
        if test_t is not None:
            test_x, test_y, _ = dmod.encode(test_t, manifest, schema)
        else:
            test_x = test_y = None
        splits.append(ClientSplits(idx, train_x, train_y, valid_x, valid_y, test_x, test_y))
    return splits


@dataclass
class RunRecord:
    run: int
    seed: int
    n_clients: int
    rounds_completed: int
    best_round: int
    best_metrics: dict
    curve: list[float]
    local_vs_global: list[dict] | None = None


def _best_metrics(eval_history: list[dict], best_round: int) -> dict:
    return dict(eval_history[best_round - 1])


def _run_federated_once(config, manifest, table, schema, run_index, sinks):
    run_seed = derive_seed(config.master_seed, "run", run_index)
    names, client_tables = _partition_tables(table, manifest, config, run_seed)
    if config.max_clients is not None and config.max_clients < len(client_tables):
        keep = dmod.subsample_clients(
            list(range(len(client_tables))), config.max_clients, derive_seed(run_seed, "clients")
        )
        client_tables = [client_tables[i] for i in keep]
    splits = _client_splits(client_tables, manifest, schema, config.scheme, run_seed)
    bins, base = setup(splits, config.params.max_bin, schema.task, schema.n_classes)
    sampling = SamplingConfig(config.sampling_method, config.sampling_fraction, 0)
    clients = make_clients(
        splits, bins, schema.task, schema.n_classes, sampling,
        sampling_seed=derive_seed(run_seed, "sampling"),
    )
    on_round = sinks.round_logger(run_index) if sinks else None
    state = train_federated(
        clients, bins, base, schema.task, schema.n_classes, config.params, on_round=on_round
    )
    record = RunRecord(
        run=run_index,
        seed=run_seed,
        n_clients=len(clients),
        rounds_completed=state.round,
        best_round=state.best_round,
        best_metrics=_best_metrics(state.eval_history, state.best_round),
        curve=list(state.primary_history),
    )
    if config.scheme == "70/20/10":
        record.local_vs_global = evaluate_local_vs_global(state, clients)
    return record, state, bins


def _run_pooled_once(config, manifest, table, schema, run_index, sinks):
    run_seed = derive_seed(config.master_seed, "run", run_index)
    train_t, valid_t, test_t = dmod.split_train_valid_test(
        table, config.scheme, derive_seed(run_seed, "split", 0)
    )
    train_x, train_y, _ = dmod.encode(train_t, manifest, schema)
    valid_x, valid_y, _ = dmod.encode(valid_t, manifest, schema)
    bins = bins_from_matrix(train_x, config.params.max_bin)
    base = base_score_from_labels(schema.task, train_y, schema.n_classes)
    train = bin_dataset(train_x, train_y, bins, schema.task, schema.n_classes)
    valid = bin_dataset(valid_x, valid_y, bins, schema.task, schema.n_classes)
    sampling = SamplingConfig(
        config.sampling_method,
        config.sampling_fraction,
        derive_seed(derive_seed(run_seed, "sampling"), "client", 0),
    )
    on_round = sinks.round_logger(run_index) if sinks else None
    result = train_pooled(train, valid, bins, base, config.params, sampling, on_round=on_round)
    record = RunRecord(
        run=run_index,
        seed=run_seed,
        n_clients=1,
        rounds_completed=result.rounds_completed,
        best_round=result.best_round,
        best_metrics=_best_metrics(result.eval_history, result.best_round),
        curve=list(result.primary_history),
    )
    return record, result, bins


class ArtifactSinks:
    """Per-run file writers: round logs (deterministic) and timings (not)."""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._timing_fh = open(self.output_dir / "timings.jsonl", "w")
        self._handles: list = []

    def round_logger(self, run_index: int):
        path = self.output_dir / f"run{run_index:02d}_rounds.jsonl"
        fh = open(path, "w")
        self._handles.append(fh)
        t_prev = [time.perf_counter()]

        def log(state, record, sampled_counts):
            round_index = getattr(state, "round", None) or state.rounds_completed
            entry = {"round": round_index, "metrics": record, "sampled": list(sampled_counts)}
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()
            now = time.perf_counter()
            self._timing_fh.write(
                json.dumps({"run": run_index, "round": round_index, "wall_time_s": now - t_prev[0]})
                + "\n"
            )
            t_prev[0] = now

        return log

    def close(self):
        for fh in self._handles:
            fh.close()
        self._timing_fh.close()


def summarize(config: ExperimentConfig, schema, records: list[RunRecord], manifest_text: str) -> dict:
    """Cross-run aggregate: mean/std (ddof=1; 0.0 for a single run) of every
    metric recorded at each run's best round."""
    metric_keys = sorted(k for k in records[0].best_metrics if k != "n")
    aggregate = {}
    for key in metric_keys:
        values = np.array([r.best_metrics[key] for r in records], dtype=np.float64)
        aggregate[f"{key}_mean"] = float(np.mean(values))
        aggregate[f"{key}_std"] = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    payload = asdict(config)
    payload.pop("manifest_path")
    return {
        "format": "fedboost.summary",
        "version": 1,
        "task": schema.task,
        "method": config.method_label,
        "fingerprint": config_fingerprint(config, manifest_text),
        "config": payload,
        "n_runs": config.n_runs,
        "runs": [asdict(r) for r in records],
        "aggregate": aggregate,
    }


def run_experiment(
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
    pooled: bool = False,
    save_models: bool = True,
) -> dict:
    """Train config.n_runs times (federated, or pooled for the baseline) and
    return the summary; with an output_dir, also write round logs, models,
    and summary.json."""
    manifest = dmod.load_manifest(config.manifest_path)
    manifest_text = Path(config.manifest_path).read_text()
    table = dmod.load_csv(manifest)
    schema = dmod.build_schema(table, manifest)
    sinks = ArtifactSinks(output_dir) if output_dir is not None else None
    records = []
    runner = _run_pooled_once if pooled else _run_federated_once
    try:
        for run_index in range(config.n_runs):
            record, state, bins = runner(config, manifest, table, schema, run_index, sinks)
            records.append(record)
            if sinks is not None and save_models:
                from fedboost.model_io import save_model

                save_model(
                    sinks.output_dir / f"run{run_index:02d}_model.json",
                    state.model,
                    bins,
                    schema.to_dict(),
                )
    finally:
        if sinks is not None:
            sinks.close()
    summary = summarize(config, schema, records, manifest_text)
    summary["mode"] = "pooled" if pooled else "federated"
    if sinks is not None:
        (sinks.output_dir / "summary.json").write_text(
            json.dumps(summary, sort_keys=True, indent=1) + "\n"
        )
    return summary


def run_sweep(
    config: ExperimentConfig,
    grid: dict | None = None,
    output_dir: str | Path | None = None,
    pooled: bool = False,
) -> dict:
    """Evaluate every grid point with config.n_runs seeds and rank by the
    mean best-round validation metric (orientation-aware)."""
    grid = dict(DEFAULT_GRID) if grid is None else grid
    for key in grid:
        if key not in ("eta", "reg_lambda", "max_depth"):
            raise ConfigError(f"unknown sweep dimension {key!r}")
        if not grid[key]:
            raise ConfigError(f"empty grid for {key!r}")
    manifest = dmod.load_manifest(config.manifest_path)
    metric_name, higher = primary_metric(
        dmod.build_schema(dmod.load_csv(manifest), manifest).task
    )
    entries = []
    for eta in grid.get("eta", [config.params.eta]):
        for lam in grid.get("reg_lambda", [config.params.reg_lambda]):
            for depth in grid.get("max_depth", [config.params.max_depth]):
                point = replace(
                    config,
                    params=replace(config.params, eta=eta, reg_lambda=lam, max_depth=depth),
                )
                summary = run_experiment(point, output_dir=None, pooled=pooled)
                entries.append(
                    {
                        "eta": eta,
                        "reg_lambda": lam,
                        "max_depth": depth,
                        "mean": summary["aggregate"][f"{metric_name}_mean"],
                        "std": summary["aggregate"][f"{metric_name}_std"],
                        "aggregate": summary["aggregate"],
                    }
                )
    entries.sort(key=lambda e: -e["mean"] if higher else e["mean"])
    result = {
        "format": "fedboost.sweep",
        "version": 1,
        "metric": metric_name,
        "higher_is_better": higher,
        "method": config.method_label,
        "n_points": len(entries),
        "entries": entries,
        "best": entries[0],
    }
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(result, sort_keys=True, indent=1) + "\n")
        lines = ["rank,eta,reg_lambda,max_depth,mean,std"]
        for rank, e in enumerate(entries):
            lines.append(
                f"{rank},{e['eta']!r},{e['reg_lambda']!r},{e['max_depth']},{e['mean']!r},{e['std']!r}"
            )
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return result


def write_plotdata(summaries: list[dict], output_dir: str | Path) -> dict[str, Path]:
    """Plot-data files: per-method run-score distributions (boxplot) and
    per-client local-vs-global deltas, as plain CSV."""
    if not summaries:
        raise ConfigError("need at least one summary")
    tasks = {s["task"] for s in summaries}
    if len(tasks) != 1:
        raise ConfigError(f"mixed tasks in one comparison: {sorted(tasks)}")
    task = tasks.pop()
    metric_name, _ = primary_metric(task)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    box_lines = ["method,run,score"]
    stat_lines = ["method,mean,std,n_runs"]
    delta_lines = ["method,client_id,delta_mean,delta_std,n_runs"]
    have_deltas = False
    for summary in summaries:
        method = summary["method"]
        scores = [r["best_metrics"][metric_name] for r in summary["runs"]]
        for r, score in enumerate(scores):
            box_lines.append(f"{method},{r},{score!r}")
        arr = np.asarray(scores, dtype=np.float64)
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        stat_lines.append(f"{method},{float(np.mean(arr))!r},{std!r},{arr.size}")
        per_client: dict[int, list[float]] = {}
        for run in summary["runs"]:
            for entry in run.get("local_vs_global") or []:
                per_client.setdefault(entry["client_id"], []).append(entry["delta"])
        for client_id in sorted(per_client):
            deltas = np.asarray(per_client[client_id], dtype=np.float64)
            dstd = float(np.std(deltas, ddof=1)) if deltas.size > 1 else 0.0
            delta_lines.append(
                f"{method},{client_id},{float(np.mean(deltas))!r},{dstd!r},{deltas.size}"
            )
            have_deltas = True
    paths = {}
    paths["boxplot"] = out / "boxplot.csv"
    paths["boxplot"].write_text("\n".join(box_lines) + "\n")
    paths["boxplot_stats"] = out / "boxplot_stats.csv"
    paths["boxplot_stats"].write_text("\n".join(stat_lines) + "\n")
    if have_deltas:
        paths["local_vs_global"] = out / "local_vs_global.csv"
        paths["local_vs_global"].write_text("\n".join(delta_lines) + "\n")
    return paths
