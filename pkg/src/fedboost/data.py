"""Dataset plumbing: CSV ingestion, encoding, federated partitioning, splits.

Tables are column-major; numeric columns are float64 with NaN for missing
cells, everything else stays as strings (empty string = missing). Categorical
features are ordinal-encoded; the encoding schema is built once over the full
table and frozen for every later use, including inference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

TASKS = ("binary", "multiclass", "regression")

MANIFEST_FIELDS = (
    "path",
    "target_column",
    "task",
    "split_feature",
    "drop_columns",
    "categorical_columns",
    "positive_label",
)


@dataclass(frozen=True)
class DatasetManifest:
    """Where a dataset lives and how to interpret it."""

    path: str
    target_column: str
    task: str
    split_feature: str | None = None
    drop_columns: tuple[str, ...] = ()
    categorical_columns: tuple[str, ...] = ()
    positive_label: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"manifest {path} is not a key-value mapping")
    unknown = set(raw) - set(MANIFEST_FIELDS)
    if unknown:
        raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
    for key in ("path", "target_column", "task"):
        if key not in raw:
            raise ValueError(f"manifest missing required key {key!r}")
    csv_path = Path(raw["path"])
    if not csv_path.is_absolute():
        csv_path = path.parent / csv_path
    return DatasetManifest(
        path=str(csv_path),
        target_column=str(raw["target_column"]),
        task=str(raw["task"]),
        split_feature=raw.get("split_feature"),
        drop_columns=tuple(raw.get("drop_columns") or ()),
        categorical_columns=tuple(raw.get("categorical_columns") or ()),
        positive_label=None if raw.get("positive_label") is None else str(raw["positive_label"]),
    )


@dataclass
class RawTable:
    """Parsed CSV: per-column arrays, numeric (float64) or string (object)."""

    column_names: list[str]
    columns: dict[str, np.ndarray]
    kinds: dict[str, str]  # "numeric" | "categorical"

    @property
    def n_rows(self) -> int:
        if not self.column_names:
            return 0
        return self.columns[self.column_names[0]].shape[0]

    def take(self, rows: np.ndarray) -> "RawTable":
        return RawTable(
            column_names=list(self.column_names),
            columns={name: self.columns[name][rows] for name in self.column_names},
            kinds=dict(self.kinds),
        )


def _parse_column(cells: list[str]) -> tuple[np.ndarray, str]:
    values = np.empty(len(cells), dtype=np.float64)
    numeric = True
    for i, cell in enumerate(cells):
        if cell == "":
            values[i] = np.nan
            continue
        try:
            values[i] = float(cell)
        except ValueError:
            numeric = False
            break
    if numeric:
        return values, "numeric"
    return np.array(cells, dtype=object), "categorical"


def load_csv(manifest: DatasetManifest) -> RawTable:
    """Read the manifest's CSV; empty cells become missing markers."""
    path = Path(manifest.path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        rows = list(reader)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
    if manifest.target_column not in header:
        raise ValueError(f"{path}: target column {manifest.target_column!r} not in header")
    if manifest.split_feature is not None and manifest.split_feature not in header:
        raise ValueError(f"{path}: split feature {manifest.split_feature!r} not in header")
    columns = {}
    kinds = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        columns[name], kinds[name] = _parse_column(cells)
    return RawTable(column_names=header, columns=columns, kinds=kinds)


def write_csv(table: RawTable, path: str | Path):
    """Inverse of load_csv: floats via repr so numeric cells round-trip."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        cols = []
        for name in table.column_names:
            col = table.columns[name]
            if table.kinds[name] == "numeric":
                cols.append(["" if np.isnan(v) else repr(float(v)) for v in col])
            else:
                cols.append([str(v) for v in col])
        for i in range(table.n_rows):
            writer.writerow([c[i] for c in cols])


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


@dataclass
class EncodingSchema:
    """Frozen feature/label mappings, reusable at inference time."""

    feature_names: list[str]
    feature_kinds: dict[str, str]
    category_maps: dict[str, dict[str, int]]  # first-appearance codes
    task: str
    n_classes: int
    label_map: dict[str, int] = field(default_factory=dict)  # classification only
    target_column: str = ""

    def to_dict(self) -> dict:
        return {
            "feature_names": self.feature_names,
            "feature_kinds": self.feature_kinds,
            "category_maps": self.category_maps,
            "task": self.task,
            "n_classes": self.n_classes,
            "label_map": self.label_map,
            "target_column": self.target_column,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingSchema":
        return cls(
            feature_names=list(d["feature_names"]),
            feature_kinds=dict(d["feature_kinds"]),
            category_maps={k: dict(v) for k, v in d["category_maps"].items()},
            task=d["task"],
            n_classes=int(d["n_classes"]),
            label_map=dict(d["label_map"]),
            target_column=d.get("target_column", ""),
        )


def _label_key(value) -> str:
    """Canonical string key for a label value (numeric labels keep their
    float repr so 1 and 1.0 collide)."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def build_schema(table: RawTable, manifest: DatasetManifest) -> EncodingSchema:
    """Derive the frozen encoding schema from a full table."""
    excluded = {manifest.target_column, *manifest.drop_columns}
    if manifest.split_feature is not None:
        excluded.add(manifest.split_feature)
    feature_names = [c for c in table.column_names if c not in excluded]
    kinds = {}
    category_maps = {}
    for name in feature_names:
        kind = table.kinds[name]
        if name in manifest.categorical_columns:
            kind = "categorical"
        kinds[name] = kind
        if kind == "categorical":
            mapping: dict[str, int] = {}
            for cell in table.columns[name].tolist():
                key = _label_key(cell)
                if key == "" or (isinstance(cell, float) and np.isnan(cell)):
                    continue
                if key not in mapping:
                    mapping[key] = len(mapping)
            category_maps[name] = mapping
    target = table.columns[manifest.target_column]
    if manifest.task == "regression":
        if table.kinds[manifest.target_column] != "numeric":
            raise ValueError("regression target must be numeric")
        if np.any(np.isnan(target)):
            raise ValueError("regression target has missing values")
        return EncodingSchema(feature_names, kinds, category_maps, "regression", 0,
                              target_column=manifest.target_column)
    if table.kinds[manifest.target_column] == "numeric":
        if np.any(np.isnan(target)):
            raise ValueError("classification target has missing values")
        distinct = [repr(v) for v in sorted({float(v) for v in target.tolist()})]
    else:
        if any(_label_key(v) == "" for v in target.tolist()):
            raise ValueError("classification target has missing values")
        distinct = sorted({_label_key(v) for v in target.tolist()})
    if len(distinct) < 2:
        raise ValueError("classification target needs at least 2 distinct values")
    if manifest.task == "binary":
        if len(distinct) != 2:
            raise ValueError(f"binary target has {len(distinct)} distinct values")
        if manifest.positive_label is not None:
            if manifest.positive_label not in distinct:
                raise ValueError(f"positive_label {manifest.positive_label!r} not found in target")
            negative = next(v for v in distinct if v != manifest.positive_label)
            label_map = {negative: 0, manifest.positive_label: 1}
        else:
            label_map = {v: i for i, v in enumerate(distinct)}
        n_classes = 2
    else:
        label_map = {v: i for i, v in enumerate(distinct)}
        n_classes = len(distinct)
    return EncodingSchema(feature_names, kinds, category_maps, manifest.task, n_classes,
                          label_map, manifest.target_column)


def encode(table: RawTable, manifest: DatasetManifest, schema: EncodingSchema | None = None):
    """Numeric feature matrix + label vector under a (possibly fresh) schema.

    With a frozen schema, unseen categorical feature values become missing
    (NaN -> bin 0 later) but unseen labels are an error.
    """
    frozen = schema is not None
    if schema is None:
        schema = build_schema(table, manifest)
    n = table.n_rows
    x = np.empty((n, len(schema.feature_names)), dtype=np.float64)
    for j, name in enumerate(schema.feature_names):
        col = table.columns[name]
        if schema.feature_kinds[name] == "numeric":
            x[:, j] = col.astype(np.float64)
        else:
            mapping = schema.category_maps[name]
            out = np.full(n, np.nan)
            for i, cell in enumerate(col.tolist()):
                if isinstance(cell, float) and np.isnan(cell):
                    continue
                key = _label_key(cell)
                if key == "":
                    continue
                if key in mapping:
                    out[i] = mapping[key]
                elif not frozen:
                    raise ValueError(f"category {key!r} missing from schema for {name!r}")
            x[:, j] = out
    target = table.columns[manifest.target_column]
    if schema.task == "regression":
        y = target.astype(np.float64)
    else:
        y = np.empty(n, dtype=np.int64)
        for i, value in enumerate(target.tolist()):
            key = _label_key(value)
            if key not in schema.label_map:
                raise ValueError(f"label {key!r} not present in frozen schema")
            y[i] = schema.label_map[key]
    return x, y, schema


def decode_categories(schema: EncodingSchema, feature: str, codes: np.ndarray) -> list[str]:
    inverse = {v: k for k, v in schema.category_maps[feature].items()}
    return [inverse[int(c)] for c in codes]


# ---------------------------------------------------------------------------
# partitioning and splitting
# ---------------------------------------------------------------------------


def partition_by_key(table: RawTable, split_feature: str) -> tuple[list[str], list[RawTable]]:
    """One client per distinct key value, ordered by sorted key."""
    if split_feature not in table.columns:
        raise ValueError(f"split feature {split_feature!r} not in table")
    col = table.columns[split_feature]
    keys = [_label_key(v) for v in col.tolist()]
    distinct = sorted(set(keys))
    if len(distinct) < 2:
        raise ValueError("degenerate partition: split feature has a single value")
    keys_arr = np.array(keys, dtype=object)
    clients = []
    for key in distinct:
        rows = np.flatnonzero(keys_arr == key)
        clients.append(table.take(rows))
    return distinct, clients


def partition_dirichlet(
    table: RawTable,
    target_column: str,
    n_clients: int,
    alpha: float,
    seed: int,
    max_retries: int = 100,
) -> list[RawTable]:
    """Label-skewed partition: per-class client proportions ~ Dirichlet(alpha)."""
    if n_clients < 2:
        raise ValueError("n_clients must be >= 2")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    labels = np.array([_label_key(v) for v in table.columns[target_column].tolist()], dtype=object)
    classes = sorted(set(labels.tolist()))
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        assignment = np.empty(table.n_rows, dtype=np.int64)
        for cls in classes:
            rows = np.flatnonzero(labels == cls)
            rows = rng.permutation(rows)
            props = rng.dirichlet(np.full(n_clients, alpha))
            bounds = np.floor(np.cumsum(props) * rows.shape[0]).astype(np.int64)
            bounds[-1] = rows.shape[0]
            start = 0
            for c in range(n_clients):
                assignment[rows[start : bounds[c]]] = c
                start = bounds[c]
        sizes = np.bincount(assignment, minlength=n_clients)
        if np.all(sizes > 0):
            return [table.take(np.flatnonzero(assignment == c)) for c in range(n_clients)]
    raise ValueError(f"could not produce {n_clients} non-empty clients after {max_retries} draws")


def split_train_valid_test(table: RawTable, scheme: str, seed: int):
    """Seeded shuffle, then floor-rounded proportional split (remainder to
    train). Schemes: "80/20" -> (train, valid, None); "70/20/10" adds test."""
    n = table.n_rows
    if scheme not in ("80/20", "70/20/10"):
        raise ValueError(f"unknown split scheme {scheme!r}")
    if scheme == "80/20" and n < 5:
        raise ValueError(f"need at least 5 rows for an 80/20 split, got {n}")
    if scheme == "70/20/10" and n < 5:
        raise ValueError(f"need at least 5 rows for a 70/20/10 split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_valid = n * 20 // 100
    n_test = n * 10 // 100 if scheme == "70/20/10" else 0
    n_train = n - n_valid - n_test
    train = table.take(np.sort(order[:n_train]))
    valid = table.take(np.sort(order[n_train : n_train + n_valid]))
    test = table.take(np.sort(order[n_train + n_valid :])) if n_test else None
    return train, valid, test


def subsample_clients(client_ids: list, max_clients: int, seed: int) -> list:
    """Uniform, seeded choice of at most max_clients (stable original order)."""
    if max_clients < 1:
        raise ValueError("max_clients must be >= 1")
    if max_clients >= len(client_ids):
        return list(client_ids)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(client_ids), size=max_clients, replace=False)
    return [client_ids[i] for i in np.sort(chosen)]
