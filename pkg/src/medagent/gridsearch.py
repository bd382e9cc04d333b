"""Exhaustive hyperparameter search with 5-fold cross-validation.

Every candidate setting is scored on the same SplitPlan so settings are
compared on identical data.  Per-setting/per-fold seeds are derived from
(master_seed, setting_index, fold) alone, never from scheduling, so a run
is bit-identical whether settings are evaluated serially or by a thread
pool.
"""

from __future__ import annotations

import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product

from .dataset import Dataset, Encoder, EncodedMatrix, SplitPlan, encode, make_split
from .errors import AgentError
from .metrics import RocResult, roc_curve
from .network import (
    HYPERPARAMETER_FIELDS,
    HyperparameterSetting,
    NetworkWeights,
    NonFiniteLoss,
    TrainConfig,
    predict_batch,
    train,
    validate_hyperparameter,
)
from .rng import mix

GRID_CAP_DEFAULT = 4096
FALLBACK_AUC = 0.5

# fold seeds use fold numbers 0..4; the final refit gets the next word
_FINAL_FIT_TAG = 5


class GridError(AgentError):
    code = "grid_error"


class GridTooLarge(GridError):
    code = "grid_too_large"

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"grid enumerates {count} settings, exceeding the cap of {cap}")


class InvalidGridSpec(GridError):
    code = "invalid_grid"


@dataclass(frozen=True)
class GridSpec:
    """One candidate-value list per hyperparameter of HyperparameterSetting."""

    hidden_layer_count: tuple
    hidden_units: tuple
    hidden_activation: tuple
    learning_rate: tuple
    lr_decay: tuple
    epochs: tuple
    batch_size: tuple
    optimizer: tuple
    momentum: tuple
    dropout_rate: tuple
    l2_lambda: tuple
    weight_init: tuple
    early_stop_patience: tuple

    def __post_init__(self):
        for field in HYPERPARAMETER_FIELDS:
            values = getattr(self, field)
            if not isinstance(values, tuple):
                object.__setattr__(self, field, tuple(values))
                values = getattr(self, field)
            if len(values) == 0:
                raise InvalidGridSpec(f"no candidate values for {field}")
            for v in values:
                validate_hyperparameter(field, v)

    @property
    def count(self) -> int:
        return math.prod(len(getattr(self, f)) for f in HYPERPARAMETER_FIELDS)

    def to_dict(self) -> dict:
        return {f: list(getattr(self, f)) for f in HYPERPARAMETER_FIELDS}

    @classmethod
    def from_dict(cls, doc: dict, base: "GridSpec | None" = None) -> "GridSpec":
        """Build from a key→list document; unnamed fields fall back to base.

        Scalar values are treated as singleton lists.  Unknown keys are
        rejected so typos do not silently search the wrong grid.
        """
        if not isinstance(doc, dict):
            raise InvalidGridSpec("grid document must be a JSON object")
        unknown = sorted(set(doc) - set(HYPERPARAMETER_FIELDS))
        if unknown:
            raise InvalidGridSpec(f"unknown grid fields: {', '.join(unknown)}")
        if base is None and set(doc) != set(HYPERPARAMETER_FIELDS):
            missing = sorted(set(HYPERPARAMETER_FIELDS) - set(doc))
            raise InvalidGridSpec(f"missing grid fields: {', '.join(missing)}")
        values = {}
        for field in HYPERPARAMETER_FIELDS:
            if field in doc:
                v = doc[field]
                values[field] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
            else:
                values[field] = getattr(base, field)
        return cls(**values)


def default_grid() -> GridSpec:
    """The documented default grid: 3 learning rates × 2 batch sizes ×
    2 epoch counts = 12 settings, everything else a fixed sane value."""
    return GridSpec(
        hidden_layer_count=(2,),
        hidden_units=(16,),
        hidden_activation=("relu",),
        learning_rate=(0.001, 0.01, 0.1),
        lr_decay=(0.0,),
        epochs=(50, 100),
        batch_size=(16, 32),
        optimizer=("adam",),
        momentum=(0.9,),
        dropout_rate=(0.0,),
        l2_lambda=(0.0,),
        weight_init=("he_uniform",),
        early_stop_patience=(0,),
    )


def enumerate_settings(g: GridSpec, cap: int = GRID_CAP_DEFAULT) -> list[HyperparameterSetting]:
    """Cartesian product in field order; the last-listed field varies fastest."""
    count = g.count
    if count > cap:
        raise GridTooLarge(count, cap)
    lists = [getattr(g, f) for f in HYPERPARAMETER_FIELDS]
    return [HyperparameterSetting(**dict(zip(HYPERPARAMETER_FIELDS, combo)))
            for combo in product(*lists)]


class GridProgress:
    """Thread-safe settings-completed counter the service can poll."""

    def __init__(self, total: int = 0):
        self._lock = threading.Lock()
        self._done = 0
        self._total = total

    def reset(self, total: int) -> None:
        with self._lock:
            self._done = 0
            self._total = total

    def advance(self) -> None:
        with self._lock:
            self._done += 1

    def snapshot(self) -> tuple[int, int]:
        with self._lock:
            return self._done, self._total


def cross_validate(m: EncodedMatrix, plan: SplitPlan, s: HyperparameterSetting,
                   master_seed: int, setting_index: int = 0) -> float:
    """Mean AUC over the 5 folds of plan for one setting.

    Fold k's model trains on the other four folds with seed
    mix(master_seed, setting_index, k).  A fold whose held-out part is
    empty or single-class cannot be scored; it contributes the 0.5
    fallback with a warning and no model is trained for it.
    """
    aucs = []
    for k in range(len(plan.folds)):
        fold_idx = plan.folds[k]
        fold_m = m.take(fold_idx)
        classes = set(fold_m.labels.tolist())
        if len(classes) < 2:
            warnings.warn(
                f"cross-validation fold {k} holds a single class; "
                f"recording fallback AUC {FALLBACK_AUC}", RuntimeWarning)
            aucs.append(FALLBACK_AUC)
            continue
        train_m = m.take(plan.train_without_fold(k))
        cfg = TrainConfig(setting=s, seed=mix(master_seed, setting_index, k),
                          input_width=m.encoder.width)
        holdout = fold_m if s.early_stop_patience > 0 else None
        weights = train(train_m, cfg, holdout)
        scores = predict_batch(weights, s, fold_m.features)
        aucs.append(roc_curve(list(scores), [int(v) for v in fold_m.labels]).auc)
    return sum(aucs) / len(aucs)


@dataclass(frozen=True)
class GridReport:
    """Everything a grid-search run produced, ready to persist or serve."""

    best_index: int
    best_setting: HyperparameterSetting
    best_cv_auc: float
    validation_auc: float
    validation_roc: RocResult
    per_setting_results: tuple[tuple[int, float], ...]
    trained_model: NetworkWeights
    encoder: Encoder
    master_seed: int

    def summary_dict(self) -> dict:
        return {
            "seed": self.master_seed,
            "settings_evaluated": len(self.per_setting_results),
            "best_index": self.best_index,
            "best_setting": self.best_setting.to_dict(),
            "best_cv_auc": self.best_cv_auc,
            "validation_auc": self.validation_auc,
            "per_setting_cv_auc": [[i, a] for i, a in self.per_setting_results],
        }


def run_grid_search(d: Dataset, g: GridSpec, master_seed: int,
                    workers: int = 1, cap: int = GRID_CAP_DEFAULT,
                    progress: GridProgress | None = None) -> GridReport:
    """Evaluate every setting by cross-validation, pick the best (ties go
    to the lowest index), refit it on the full train partition, and score
    the held-out validation partition."""
    settings = enumerate_settings(g, cap)
    m = encode(d)
    plan = make_split(d, master_seed)
    if progress is not None:
        progress.reset(len(settings))

    def evaluate(i: int) -> float:
        try:
            auc = cross_validate(m, plan, settings[i], master_seed, i)
        except NonFiniteLoss as e:
            e.setting_index = i
            raise
        if progress is not None:
            progress.advance()
        return auc

    indices = range(len(settings))
    if workers <= 1:
        mean_aucs = [evaluate(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            mean_aucs = list(pool.map(evaluate, indices))

    best_index = 0
    for i in indices:
        if mean_aucs[i] > mean_aucs[best_index]:
            best_index = i
    best = settings[best_index]

    train_m = m.take(plan.train_indices)
    val_m = m.take(plan.validation_indices)
    cfg = TrainConfig(setting=best, seed=mix(master_seed, best_index, _FINAL_FIT_TAG),
                      input_width=m.encoder.width)
    holdout = val_m if best.early_stop_patience > 0 else None
    try:
        weights = train(train_m, cfg, holdout)
    except NonFiniteLoss as e:
        e.setting_index = best_index
        raise
    scores = predict_batch(weights, best, val_m.features)
    roc = roc_curve(list(scores), [int(v) for v in val_m.labels])

    return GridReport(
        best_index=best_index,
        best_setting=best,
        best_cv_auc=mean_aucs[best_index],
        validation_auc=roc.auc,
        validation_roc=roc,
        per_setting_results=tuple((i, mean_aucs[i]) for i in indices),
        trained_model=weights,
        encoder=m.encoder,
        master_seed=master_seed,
    )
