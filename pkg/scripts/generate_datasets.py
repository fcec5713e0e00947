#!/usr/bin/env python3
"""Regenerate the bundled datasets under datasets/.

All four files are synthetic stand-ins that mirror the schema, scale, and
naturally-keyed client structure of well-known public tabular datasets
(medical-cost regression, multi-site heart-disease screening, predictive
maintenance, and a many-client multiclass benchmark), so the experiment
pipeline runs out of the box. Generation is fully seeded; rerunning this
script reproduces the committed files byte for byte. Drop-in replacement
with the real public CSVs works through the same manifests.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "datasets"


def _write_csv(path: Path, header: list[str], columns: list[list]):
    lines = [",".join(header)]
    n = len(columns[0])
    for i in range(n):
        lines.append(",".join(str(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({n} rows)")


def make_insurance(path: Path, n: int = 1338, seed: int = 20240711):
    """Medical-cost style regression: charges driven by age and smoking, with
    a sharply structured smoker-obese segment and rare unpredictable
    high-cost events capping attainable R2."""
    rng = np.random.default_rng(seed)
    age = rng.integers(18, 65, n)
    sex = rng.choice(["female", "male"], n)
    region = rng.choice(["northeast", "northwest", "southeast", "southwest"], n,
                        p=[0.24, 0.24, 0.28, 0.24])
    bmi = rng.normal(30.2, 6.0, n) + np.where(region == "southeast", 1.6, 0.0)
    bmi = np.clip(bmi, 16.0, 53.1).round(2)
    children = rng.choice([0, 1, 2, 3, 4, 5], n, p=[0.43, 0.24, 0.18, 0.11, 0.025, 0.015])
    smoker_p = np.where(region == "southeast", 0.25, 0.19)
    smoker = rng.random(n) < smoker_p
    obese = bmi >= 30.0
    charges = (
        252.0 * age
        + 330.0 * children
        + np.where(smoker, 13500.0, 0.0)
        + np.where(smoker & obese, 14000.0 + 700.0 * (bmi - 30.0) + 95.0 * (age - 40.0), 0.0)
    )
    charges = charges + rng.normal(0.0, 2000.0, n)
    event = (~smoker) & (rng.random(n) < 0.05)
    charges = charges + np.where(event, rng.lognormal(9.0, 0.5, n), 0.0)
    charges = np.maximum(charges, 1120.0).round(2)
    _write_csv(
        path,
        ["age", "sex", "bmi", "children", "smoker", "region", "charges"],
        [
            age.tolist(),
            sex.tolist(),
            [f"{v:.2f}" for v in bmi],
            children.tolist(),
            np.where(smoker, "yes", "no").tolist(),
            region.tolist(),
            [f"{v:.2f}" for v in charges],
        ],
    )


def make_heart(path: Path, seed: int = 20240713):
    """Multi-site heart-disease screening: four sources with shifted feature
    distributions (one site famously records cholesterol as 0). Disease is a
    small minority driven by conjunctions of risk markers, plus a little
    label noise."""
    rng = np.random.default_rng(seed)
    sources = [("cleveland", 260), ("hungarian", 230), ("switzerland", 100), ("va", 150)]
    cols: dict[str, list] = {k: [] for k in [
        "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
        "thalach", "exang", "oldpeak", "slope", "source", "num",
    ]}
    site_age = {"cleveland": 54.0, "hungarian": 48.0, "switzerland": 55.0, "va": 59.0}
    for source, count in sources:
        age = rng.normal(site_age[source], 9.0, count).clip(29, 77).round().astype(int)
        sex = (rng.random(count) < (0.68 if source != "va" else 0.95)).astype(int)
        cp = rng.choice([1, 2, 3, 4], count, p=[0.08, 0.17, 0.28, 0.47])
        trestbps = rng.normal(132, 17, count).clip(94, 200).round().astype(int)
        chol_missing = rng.random(count) < (0.92 if source == "switzerland" else 0.05)
        chol = np.where(
            chol_missing, 0, rng.normal(246, 52, count).clip(110, 500)
        ).round().astype(int)
        fbs = (rng.random(count) < 0.15).astype(int)
        restecg = rng.choice([0, 1, 2], count, p=[0.55, 0.35, 0.10])
        thalach = rng.normal(140, 24, count).clip(70, 202).round().astype(int)
        exang = (rng.random(count) < 0.35).astype(int)
        oldpeak = np.maximum(rng.normal(0.9, 1.1, count), 0.0).round(1)
        slope = rng.choice([1, 2, 3], count, p=[0.45, 0.42, 0.13])
        asymptomatic_low_hr = (cp == 4) & (thalach < 112)
        exertion_st = (exang == 1) & (oldpeak >= 2.6)
        downslope_hypertensive = (slope == 3) & (trestbps >= 152)
        fired = asymptomatic_low_hr | exertion_st | downslope_hypertensive
        flip = rng.random(count) < 0.01
        num = (fired ^ flip).astype(int)
        for key, values in [
            ("age", age), ("sex", sex), ("cp", cp), ("trestbps", trestbps),
            ("chol", chol), ("fbs", fbs), ("restecg", restecg), ("thalach", thalach),
            ("exang", exang), ("oldpeak", oldpeak), ("slope", slope),
            ("source", [source] * count), ("num", num),
        ]:
            cols[key].extend(np.asarray(values).tolist())
    header = list(cols)
    _write_csv(path, header, [cols[k] for k in header])


def make_machine(path: Path, n: int = 10000, seed: int = 20240717):
    """Predictive-maintenance style binary task: failures follow heat,
    power, and overstrain rules plus a small random component."""
    rng = np.random.default_rng(seed)
    machine_type = rng.choice(["L", "M", "H"], n, p=[0.6, 0.3, 0.1])
    air = rng.normal(300.0, 2.0, n).round(1)
    process = (air + rng.normal(10.0, 1.0, n)).round(1)
    rot = rng.normal(1539.0, 179.0, n).clip(1168, 2886).round().astype(int)
    torque = rng.normal(40.0, 9.9, n).clip(3.8, 76.6).round(1)
    wear = rng.integers(0, 251, n)
    power = torque * rot * 2.0 * np.pi / 60.0
    osf_limit = np.select(
        [machine_type == "L", machine_type == "M"], [12000.0, 13000.0], 14000.0
    )
    pwf_low, pwf_high = np.quantile(power, [0.005, 0.995])
    hdf = ((process - air) < 8.6) & (rot < 1380)
    pwf = (power < pwf_low) | (power > pwf_high)
    osf = wear * torque > osf_limit
    twf = (wear >= 200) & (rng.random(n) < 0.022)
    rnf = rng.random(n) < 0.001
    failure = (hdf | pwf | osf | twf | rnf).astype(int)
    _write_csv(
        path,
        ["Type", "air_temperature", "process_temperature", "rotational_speed",
         "torque", "tool_wear", "failure"],
        [
            machine_type.tolist(),
            [f"{v:.1f}" for v in air],
            [f"{v:.1f}" for v in process],
            rot.tolist(),
            [f"{v:.1f}" for v in torque],
            wear.tolist(),
            failure.tolist(),
        ],
    )


def make_multiclass(path: Path, n: int = 5000, n_features: int = 20, n_classes: int = 10,
                    n_groups: int = 20, seed: int = 20240719):
    """Many-client multiclass benchmark: cluster-structured features, group
    key with skewed per-group class priors."""
    rng = np.random.default_rng(seed)
    informative = 12
    centers = rng.normal(0.0, 1.35, (n_classes, informative))
    group_prior = rng.dirichlet(np.full(n_classes, 1.5), n_groups)
    group_shift = rng.normal(0.0, 0.25, (n_groups, informative))
    rows_per_group = n // n_groups
    groups, labels, features = [], [], []
    for g in range(n_groups):
        y = rng.choice(n_classes, rows_per_group, p=group_prior[g])
        x_inf = centers[y] + group_shift[g] + rng.normal(0.0, 1.0, (rows_per_group, informative))
        x_noise = rng.normal(0.0, 1.0, (rows_per_group, n_features - informative))
        features.append(np.hstack([x_inf, x_noise]))
        labels.append(y)
        groups.extend([f"g{g:02d}"] * rows_per_group)
    x = np.vstack(features).round(4)
    y = np.concatenate(labels)
    header = [f"f{j:02d}" for j in range(n_features)] + ["group", "label"]
    columns = [[f"{v:.4f}" for v in x[:, j]] for j in range(n_features)]
    columns.append(groups)
    columns.append(y.tolist())
    _write_csv(path, header, columns)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    make_insurance(OUT / "insurance.csv")
    make_heart(OUT / "heart.csv")
    make_machine(OUT / "machine.csv")
    make_multiclass(OUT / "multiclass20.csv")


if __name__ == "__main__":
    main()
