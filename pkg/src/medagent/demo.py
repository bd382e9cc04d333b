"""Synthetic demo data and the bundled pretrained horizon models.

The shipped models are trained on generated categorical data whose label
follows a deterministic clinical-style point score, so the signal is fully
separable and learnable.  Nothing here is fit to real patient data; every
provenance string says so.

Each horizon (5, 10, 15 years) shares the same feature rows but labels
them at a different score threshold: shorter horizons require more risk
points before flipping to "yes".  Rebuilding with the same seed reproduces
the committed asset bytes exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

from .dataset import Dataset, parse_csv
from .gridsearch import GridReport, default_grid, run_grid_search
from .rng import SplitMix64, mix
from .vault import ModelArtifact, catalog_from_encoder, save

DEMO_SEED = 271828
LABEL_COLUMN = "metastasis"
LABEL_VALUES = ("no", "yes")

_ROW_TAG = 0xDA7A
_PERMUTE_TAG = 0x9E12

# (column, allowed values, risk points per value)
DEMO_COLUMNS = (
    ("DCIS_level", ("none", "low", "intermediate", "high"),
     {"none": 0, "low": 1, "intermediate": 2, "high": 3}),
    ("tumor_size", ("lt2cm", "2to5cm", "gt5cm"),
     {"lt2cm": 0, "2to5cm": 2, "gt5cm": 3}),
    ("node_status", ("negative", "positive"),
     {"negative": 0, "positive": 3}),
    ("er_status", ("negative", "positive"),
     {"negative": 2, "positive": 0}),
    ("menopause", ("pre", "post"),
     {"pre": 1, "post": 0}),
)

# minimum point score that labels a row "yes", per horizon
HORIZON_THRESHOLDS = {5: 7, 10: 6, 15: 5}

QUESTION_TEXT = {
    "DCIS_level": "What is the DCIS level (type of ductal carcinoma in situ)?",
    "tumor_size": "What is the tumor size category?",
    "node_status": "What is the lymph node status?",
    "er_status": "What is the estrogen receptor (ER) status?",
    "menopause": "What is the menopausal status?",
}

# fixed boundary-score assignment used for the recorded golden predictions;
# sits right at the 15-year threshold so no horizon's output saturates and
# any forward-pass deviation is visible at 4 decimals
GOLDEN_ANSWERS = {
    "DCIS_level": "none",
    "tumor_size": "2to5cm",
    "node_status": "negative",
    "er_status": "negative",
    "menopause": "pre",
}


def assets_dir() -> Path:
    return Path(__file__).parent / "assets"


def risk_score(row: dict[str, str]) -> int:
    return sum(points[row[name]] for name, _, points in DEMO_COLUMNS)


def generate_rows(n: int = 400, seed: int = DEMO_SEED) -> list[dict[str, str]]:
    rng = SplitMix64(mix(seed, _ROW_TAG))
    rows = []
    for _ in range(n):
        row = {name: values[rng.next_below(len(values))]
               for name, values, _ in DEMO_COLUMNS}
        rows.append(row)
    return rows


def render_csv(rows: list[dict[str, str]], horizon: int) -> str:
    threshold = HORIZON_THRESHOLDS[horizon]
    header = [name for name, _, _ in DEMO_COLUMNS] + [LABEL_COLUMN]
    lines = [",".join(header)]
    for row in rows:
        label = LABEL_VALUES[1] if risk_score(row) >= threshold else LABEL_VALUES[0]
        lines.append(",".join([row[name] for name, _, _ in DEMO_COLUMNS] + [label]))
    return "\n".join(lines) + "\n"


def demo_dataset_csv(horizon: int, n: int = 400, seed: int = DEMO_SEED) -> str:
    return render_csv(generate_rows(n, seed), horizon)


def permuted_label_dataset(d: Dataset, seed: int) -> Dataset:
    """Same rows with the label column shuffled: destroys the signal while
    preserving class balance."""
    label_pos = [c.name for c in d.columns].index(d.label_column)
    labels = [row[label_pos] for row in d.rows]
    SplitMix64(mix(seed, _PERMUTE_TAG)).shuffle(labels)
    rows = tuple(row[:label_pos] + (labels[i],) + row[label_pos + 1:]
                 for i, row in enumerate(d.rows))
    return Dataset(columns=d.columns, rows=rows, label_column=d.label_column)


def artifact_from_report(report: GridReport, provenance: str,
                         horizon: int | None = None,
                         questions: dict[str, str] | None = None) -> ModelArtifact:
    """Package a finished grid-search run as a saveable artifact."""
    return ModelArtifact(
        setting=report.best_setting,
        encoder=report.encoder,
        catalog=catalog_from_encoder(report.encoder, questions),
        weights=report.trained_model,
        provenance=provenance,
        horizon=horizon,
    )


def build_demo_assets(out_dir: Path | str | None = None,
                      seed: int = DEMO_SEED) -> dict:
    """Train and write the three horizon models, the demo training CSV,
    and the golden-prediction record.  Returns the golden record."""
    base = Path(out_dir) if out_dir is not None else assets_dir()
    models_dir = base / "models"
    data_dir = base / "data"
    models_dir.mkdir(parents=True, exist_ok=True)
    data_dir.mkdir(parents=True, exist_ok=True)

    golden: dict = {"answers": GOLDEN_ANSWERS, "seed": seed, "horizons": {}}
    for horizon in sorted(HORIZON_THRESHOLDS):
        csv_text = demo_dataset_csv(horizon, seed=seed)
        d = parse_csv(csv_text, LABEL_COLUMN)
        report = run_grid_search(d, default_grid(), mix(seed, horizon))
        provenance = (f"synthetic demo data (not clinical), {len(d.rows)} rows, "
                      f"{horizon}-year horizon, grid-search seed {mix(seed, horizon)}, "
                      f"validation AUC {report.validation_auc:.4f}")
        artifact = artifact_from_report(report, provenance, horizon, QUESTION_TEXT)
        save(artifact, models_dir / f"demo_{horizon}y.imbm")
        p = artifact.predict(GOLDEN_ANSWERS)
        golden["horizons"][str(horizon)] = {
            "probability": p,
            "probability_4dp": f"{p:.4f}",
            "probability_6dp": f"{p:.6f}",
            "validation_auc": report.validation_auc,
            "best_index": report.best_index,
        }
        if horizon == 10:
            (data_dir / "demo_train.csv").write_text(csv_text, encoding="utf-8")

    (models_dir / "demo_golden.json").write_text(
        json.dumps(golden, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return golden


def load_golden(base: Path | str | None = None) -> dict:
    base = Path(base) if base is not None else assets_dir()
    return json.loads((base / "models" / "demo_golden.json").read_text(encoding="utf-8"))


def demo_csv_path() -> Path:
    return assets_dir() / "data" / "demo_train.csv"


if __name__ == "__main__":
    record = build_demo_assets()
    for h, entry in sorted(record["horizons"].items(), key=lambda kv: int(kv[0])):
        print(f"{h}-year model: golden probability {entry['probability_4dp']}, "
              f"validation AUC {entry['validation_auc']:.4f}")
