"""Categorical dataset parsing, one-hot encoding, and stratified splitting.

The CSV dialect is deliberately simple: comma separator, UTF-8, LF or CRLF
line endings, no quoting or escaping.  Every feature column is categorical
(a finite set of string values) and the label column must hold exactly two
distinct values; the lexicographically smaller one maps to class 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AgentError
from .rng import SplitMix64, mix

FOLDS = 5

# purpose tag for deriving the split-shuffle stream from the caller's seed
_SPLIT_TAG = 0x5B17


class DatasetError(AgentError):
    code = "dataset_error"


class MissingHeader(DatasetError):
    code = "missing_header"

    def __init__(self):
        super().__init__("input has no header row")


class NotUtf8(DatasetError):
    code = "not_utf8"

    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(f"input is not valid UTF-8 (first bad byte at offset {offset})")


class RaggedRow(DatasetError):
    code = "ragged_row"

    def __init__(self, line: int, expected: int, found: int):
        self.line = line
        self.expected = expected
        self.found = found
        super().__init__(f"line {line}: expected {expected} fields, found {found}")


class DuplicateColumn(DatasetError):
    code = "duplicate_column"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"duplicate column name {name!r} in header")


class LabelNotFound(DatasetError):
    code = "label_not_found"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"label column {name!r} not present in header")


class LabelNotBinary(DatasetError):
    code = "label_not_binary"

    def __init__(self, count: int):
        self.count = count
        super().__init__(f"label column must have exactly 2 distinct values, found {count}")


class TooFewRows(DatasetError):
    code = "too_few_rows"

    def __init__(self, found: int):
        self.found = found
        super().__init__(f"need at least 4 data rows, found {found}")


class EmptyValue(DatasetError):
    code = "empty_value"

    def __init__(self, line: int, column: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}: empty value in column {column!r}")


class SchemaMismatch(DatasetError):
    code = "schema_mismatch"

    def __init__(self, column: str, reason: str):
        self.column = column
        super().__init__(f"column {column!r} does not fit the model's schema: {reason}")


class ClassTooSmall(DatasetError):
    code = "class_too_small"

    def __init__(self, label: str):
        self.label = label
        super().__init__(f"label class {label!r} has fewer than 2 rows")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    categories: tuple[str, ...]  # sorted, distinct
    role: str  # "feature" | "label"


@dataclass(frozen=True)
class Dataset:
    columns: tuple[ColumnSchema, ...]
    rows: tuple[tuple[str, ...], ...]
    label_column: str

    @property
    def feature_columns(self) -> tuple[ColumnSchema, ...]:
        return tuple(c for c in self.columns if c.role == "feature")

    @property
    def label_schema(self) -> ColumnSchema:
        for c in self.columns:
            if c.role == "label":
                return c
        raise LabelNotFound(self.label_column)

    @property
    def label_values(self) -> tuple[str, str]:
        """(class-0 value, class-1 value); class 0 is the smaller string."""
        cats = self.label_schema.categories
        return cats[0], cats[1]

    def labels01(self) -> list[int]:
        idx = [c.name for c in self.columns].index(self.label_column)
        zero = self.label_values[0]
        return [0 if row[idx] == zero else 1 for row in self.rows]

    def class_indices(self) -> tuple[list[int], list[int]]:
        labels = self.labels01()
        return (
            [i for i, y in enumerate(labels) if y == 0],
            [i for i, y in enumerate(labels) if y == 1],
        )


@dataclass(frozen=True)
class Encoder:
    """One-hot layout of a dataset's feature columns.

    Offsets are assigned in feature-column order, then sorted-category
    order, so the layout is a pure function of the dataset schema.
    """

    feature_columns: tuple[str, ...]
    categories: dict[str, tuple[str, ...]]
    offsets: dict[str, dict[str, int]]
    width: int
    label_column: str
    label_values: tuple[str, str]

    def encode_assignment(self, values: dict[str, str]) -> np.ndarray:
        """Encode one predictor->value assignment as a feature vector."""
        x = np.zeros(self.width, dtype=np.float64)
        for col in self.feature_columns:
            if col not in values:
                raise KeyError(col)
            x[self.offsets[col][values[col]]] = 1.0
        return x

    def to_meta(self) -> dict:
        return {
            "feature_columns": list(self.feature_columns),
            "categories": {c: list(v) for c, v in self.categories.items()},
            "label_column": self.label_column,
            "label_values": list(self.label_values),
            "width": self.width,
        }

    @classmethod
    def from_meta(cls, meta: dict) -> "Encoder":
        cols = tuple(meta["feature_columns"])
        cats = {c: tuple(v) for c, v in meta["categories"].items()}
        offsets: dict[str, dict[str, int]] = {}
        base = 0
        for c in cols:
            offsets[c] = {cat: base + i for i, cat in enumerate(cats[c])}
            base += len(cats[c])
        enc = cls(
            feature_columns=cols,
            categories=cats,
            offsets=offsets,
            width=base,
            label_column=meta["label_column"],
            label_values=tuple(meta["label_values"]),
        )
        if enc.width != meta["width"]:
            raise ValueError("encoder width does not match its category sets")
        return enc


@dataclass(frozen=True)
class EncodedMatrix:
    features: np.ndarray  # (n, width) float64, one-hot blocks
    labels: np.ndarray  # (n,) float64 in {0.0, 1.0}
    encoder: Encoder

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def take(self, indices) -> "EncodedMatrix":
        """Row subset sharing the encoder."""
        idx = np.asarray(indices, dtype=np.intp)
        return EncodedMatrix(self.features[idx], self.labels[idx], self.encoder)


@dataclass(frozen=True)
class SplitPlan:
    """Stratified 80/20 split plus a 5-fold partition of the train part.

    Randomness decides membership only; all index lists are stored in
    ascending row order.
    """

    train_indices: tuple[int, ...]
    validation_indices: tuple[int, ...]
    folds: tuple[tuple[int, ...], ...]

    def train_without_fold(self, k: int) -> tuple[int, ...]:
        out: list[int] = []
        for j, fold in enumerate(self.folds):
            if j != k:
                out.extend(fold)
        return tuple(out)


def parse_csv(data: bytes | str, label_column: str) -> Dataset:
    """Parse and validate an all-categorical CSV with a binary label column."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise NotUtf8(e.start) from None
    else:
        text = data

    text = text.replace("\r\n", "\n")
    if text.endswith("\n"):
        text = text[:-1]
    if not text.strip():
        raise MissingHeader()

    lines = text.split("\n")
    header = lines[0].split(",")
    if all(name == "" for name in header):
        raise MissingHeader()
    seen = set()
    for name in header:
        if name in seen:
            raise DuplicateColumn(name)
        seen.add(name)
    if label_column not in header:
        raise LabelNotFound(label_column)

    width = len(header)
    rows: list[tuple[str, ...]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != width:
            raise RaggedRow(lineno, width, len(fields))
        for name, value in zip(header, fields):
            if value == "":
                raise EmptyValue(lineno, name)
        rows.append(tuple(fields))

    if len(rows) < 4:
        raise TooFewRows(len(rows))

    label_pos = header.index(label_column)
    columns = []
    for j, name in enumerate(header):
        cats = tuple(sorted({row[j] for row in rows}))
        role = "label" if j == label_pos else "feature"
        if role == "label" and len(cats) != 2:
            raise LabelNotBinary(len(cats))
        columns.append(ColumnSchema(name=name, categories=cats, role=role))

    return Dataset(columns=tuple(columns), rows=tuple(rows), label_column=label_column)


def build_encoder(d: Dataset) -> Encoder:
    offsets: dict[str, dict[str, int]] = {}
    categories: dict[str, tuple[str, ...]] = {}
    names = []
    base = 0
    for col in d.feature_columns:
        names.append(col.name)
        categories[col.name] = col.categories
        offsets[col.name] = {cat: base + i for i, cat in enumerate(col.categories)}
        base += len(col.categories)
    return Encoder(
        feature_columns=tuple(names),
        categories=categories,
        offsets=offsets,
        width=base,
        label_column=d.label_column,
        label_values=d.label_values,
    )


def encode(d: Dataset) -> EncodedMatrix:
    """One-hot encode a dataset; deterministic for a given dataset."""
    enc = build_encoder(d)
    col_idx = {c.name: i for i, c in enumerate(d.columns)}
    n = len(d.rows)
    features = np.zeros((n, enc.width), dtype=np.float64)
    for i, row in enumerate(d.rows):
        for name in enc.feature_columns:
            features[i, enc.offsets[name][row[col_idx[name]]]] = 1.0
    labels = np.asarray(d.labels01(), dtype=np.float64)
    return EncodedMatrix(features=features, labels=labels, encoder=enc)


def default_label_column(data: bytes) -> str:
    """The last header field: the label convention when none is named."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    head = data.split(b"\n", 1)[0].decode("utf-8", errors="replace")
    return head.rstrip("\r").split(",")[-1].strip()


def encode_with(encoder: Encoder, d: Dataset) -> EncodedMatrix:
    """Encode a dataset using an existing model's layout.

    The dataset must contain every encoder feature column (checked in
    encoder order, first offender reported), introduce no unseen
    categories, and use the encoder's label column and values.
    """
    col_idx = {c.name: i for i, c in enumerate(d.columns)}
    schemas = {c.name: c for c in d.columns}
    for name in encoder.feature_columns:
        if name not in col_idx or name == d.label_column:
            raise SchemaMismatch(name, "column missing from the dataset")
        unseen = sorted(set(schemas[name].categories) - set(encoder.categories[name]))
        if unseen:
            raise SchemaMismatch(name, f"values not known to the model: "
                                       f"{', '.join(unseen)}")
    if d.label_column != encoder.label_column:
        raise SchemaMismatch(encoder.label_column,
                             f"label column is {d.label_column!r}")
    if set(d.label_values) != set(encoder.label_values):
        raise SchemaMismatch(d.label_column,
                             f"label values {d.label_values} do not match the "
                             f"model's {encoder.label_values}")

    n = len(d.rows)
    features = np.zeros((n, encoder.width), dtype=np.float64)
    for i, row in enumerate(d.rows):
        for name in encoder.feature_columns:
            features[i, encoder.offsets[name][row[col_idx[name]]]] = 1.0
    positive = encoder.label_values[1]
    labels = np.asarray([1.0 if row[col_idx[d.label_column]] == positive else 0.0
                         for row in d.rows], dtype=np.float64)
    return EncodedMatrix(features=features, labels=labels, encoder=encoder)


def _validation_take(n_class: int) -> int:
    # round-half-up of 0.2 * n_class, in exact integer arithmetic
    return (2 * n_class + 5) // 10


def make_split(d: Dataset, seed: int) -> SplitPlan:
    """Stratified 80/20 split and 5-fold partition, determined by (d, seed).

    Per class: a seeded shuffle picks the validation rows (round-half-up of
    20%), the rest go to train.  Train rows are then dealt round-robin into
    the 5 folds with a single running cursor across classes, which bounds
    fold size spread and per-class fold deviation by one sample.
    """
    per_class = d.class_indices()
    for class_value, members in zip(d.label_values, per_class):
        if len(members) < 2:
            raise ClassTooSmall(class_value)

    validation: list[int] = []
    folds: list[list[int]] = [[] for _ in range(FOLDS)]
    cursor = 0
    for c, members in enumerate(per_class):
        shuffled = list(members)
        SplitMix64(mix(seed, _SPLIT_TAG, c)).shuffle(shuffled)
        take = _validation_take(len(members))
        validation.extend(shuffled[:take])
        for idx in shuffled[take:]:
            folds[cursor % FOLDS].append(idx)
            cursor += 1

    train = sorted(i for fold in folds for i in fold)
    return SplitPlan(
        train_indices=tuple(train),
        validation_indices=tuple(sorted(validation)),
        folds=tuple(tuple(sorted(f)) for f in folds),
    )
