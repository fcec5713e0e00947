"""Single-file model serialization.

JSON with a versioned header carrying everything `evaluate` needs to score a
raw CSV: bin edges, base score, per-tree node arrays, and the frozen encoding
schema. Floats serialize via repr, so values round-trip losslessly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from fedboost.binning import GlobalBins
from fedboost.gbdt import Ensemble, Tree

FORMAT_NAME = "fedboost.model"
FORMAT_VERSION = 1


def model_to_dict(model: Ensemble, global_bins: GlobalBins, schema: dict | None = None) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "task": model.task,
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "eta": model.eta,
        "base_score": model.base_score.tolist(),
        "bin_count": global_bins.bin_count,
        "bin_edges": [e.tolist() for e in global_bins.per_feature_edges],
        "schema": schema,
        "trees": [
            {
                "class_id": t.class_id,
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "weight": t.weight.tolist(),
            }
            for t in model.trees
        ],
    }


def model_from_dict(payload: dict):
    if payload.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {payload.get('version')}")
    trees = [
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.int32),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            weight=np.asarray(t["weight"], dtype=np.float64),
            class_id=int(t["class_id"]),
        )
        for t in payload["trees"]
    ]
    model = Ensemble(
        task=payload["task"],
        n_classes=int(payload["n_classes"]),
        n_features=int(payload["n_features"]),
        eta=float(payload["eta"]),
        base_score=np.asarray(payload["base_score"], dtype=np.float64),
        trees=trees,
    )
    bins = GlobalBins(
        per_feature_edges=[np.asarray(e, dtype=np.float64) for e in payload["bin_edges"]],
        bin_count=int(payload["bin_count"]),
    )
    return model, bins, payload.get("schema")


def save_model(path: str | Path, model: Ensemble, global_bins: GlobalBins, schema: dict | None = None):
    payload = model_to_dict(model, global_bins, schema)
    Path(path).write_text(json.dumps(payload, sort_keys=True, allow_nan=False) + "\n")


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text()))
