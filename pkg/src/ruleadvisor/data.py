"""Tabular data: CSV ingestion, seeded splits, and binarization into rule conditions."""

from __future__ import annotations

import csv
import json
import logging
import math
import operator
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    CountsExceedSize,
    MissingLabelColumn,
    NonBinaryLabel,
    ParseError,
    SchemaMismatch,
)

log = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
SPLITS = ("train", "val", "test")

_TRUE_LABELS = {"1", "1.0", "true", "yes", "y", "t"}
_FALSE_LABELS = {"0", "0.0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # NUMERIC | CATEGORICAL


@dataclass(frozen=True)
class Instance:
    features: Mapping[str, object]
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise NonBinaryLabel(None, [self.label])


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of labelled instances with an optional split assignment."""

    instances: tuple
    schema: tuple
    label_column: str = "label"
    split_tags: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        names = [f.name for f in self.schema]
        for i, inst in enumerate(self.instances):
            missing = [n for n in names if n not in inst.features]
            if missing:
                raise SchemaMismatch(f"instance {i} lacks features {missing}")
        if self.split_tags is not None and len(self.split_tags) != len(self.instances):
            raise SchemaMismatch("split_tags length differs from instance count")

    def __len__(self):
        return len(self.instances)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.schema]

    def kind(self, name: str) -> str:
        for f in self.schema:
            if f.name == name:
                return f.kind
        raise SchemaMismatch(f"unknown feature {name!r}")

    @cached_property
    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=np.int8)

    @cached_property
    def columns(self) -> dict[str, np.ndarray]:
        out = {}
        for f in self.schema:
            vals = [inst.features[f.name] for inst in self.instances]
            out[f.name] = np.array(vals, dtype=float if f.kind == NUMERIC else object)
        return out

    def indices(self, tag: str | None = None) -> np.ndarray:
        """Row indices carrying ``tag``; every row when ``tag`` is None or the dataset is unsplit."""
        if tag is None:
            return np.arange(len(self))
        if self.split_tags is None:
            if tag == "train":
                return np.arange(len(self))
            return np.arange(0)
        return np.array([i for i, t in enumerate(self.split_tags) if t == tag], dtype=int)

    def split_counts(self) -> dict[str, int]:
        return {tag: len(self.indices(tag)) for tag in SPLITS}

    def replace_rows(self, rows: Mapping[int, Instance]) -> "Dataset":
        insts = list(self.instances)
        for i, inst in rows.items():
            insts[i] = inst
        return Dataset(tuple(insts), self.schema, self.label_column, self.split_tags, self.seed)

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        rows = []
        for inst in self.instances:
            row = {f.name: inst.features[f.name] for f in self.schema}
            row[self.label_column] = inst.label
            rows.append(row)
        return {
            "schema": [{"name": f.name, "kind": f.kind} for f in self.schema],
            "label_column": self.label_column,
            "rows": rows,
            "split_tags": list(self.split_tags) if self.split_tags is not None else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Dataset":
        schema = tuple(FeatureSpec(s["name"], s["kind"]) for s in doc["schema"])
        label = doc.get("label_column", "label")
        insts = []
        for row in doc["rows"]:
            feats = {f.name: row[f.name] for f in schema}
            insts.append(Instance(feats, int(row[label])))
        tags = doc.get("split_tags")
        return cls(tuple(insts), schema, label, tuple(tags) if tags is not None else None, doc.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _parse_number(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    if math.isnan(value):
        return None
    return value


def _map_labels(raw: list[str]) -> list[int]:
    distinct = sorted(set(raw))
    if len(distinct) > 2:
        # report the first row that introduces a third value
        seen = []
        for i, v in enumerate(raw):
            if v not in seen:
                seen.append(v)
            if len(seen) > 2:
                raise NonBinaryLabel(i, distinct)
    lowered = {v.strip().lower() for v in distinct}
    if lowered <= (_TRUE_LABELS | _FALSE_LABELS):
        return [1 if v.strip().lower() in _TRUE_LABELS else 0 for v in raw]
    # arbitrary two-valued label: lexicographic order, first value -> 0
    mapping = {v: i for i, v in enumerate(distinct)}
    return [mapping[v] for v in raw]


def load_csv(path, label_column: str, schema_overrides: Mapping[str, str] | None = None) -> Dataset:
    """Read a header-row CSV into a :class:`Dataset`.

    Columns whose every value parses as a number are numeric, everything else
    categorical; ``schema_overrides`` forces a kind per column. Empty cells are
    rejected rather than imputed.
    """
    schema_overrides = dict(schema_overrides or {})
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        body = [row for row in reader if row]
    if not header or label_column not in header:
        raise MissingLabelColumn(f"{label_column!r} not found in header of {path}")
    label_idx = header.index(label_column)
    feature_cols = [(j, name) for j, name in enumerate(header) if j != label_idx]

    for i, row in enumerate(body):
        if len(row) != len(header):
            raise ParseError(i, None, row)
        for j, name in enumerate(header):
            if row[j].strip() == "":
                raise ParseError(i, name, row[j])

    labels = _map_labels([row[label_idx].strip() for row in body])

    schema = []
    for j, name in feature_cols:
        kind = schema_overrides.get(name)
        if kind is None:
            numeric = all(_parse_number(row[j]) is not None for row in body)
            kind = NUMERIC if numeric and body else CATEGORICAL
        if kind not in (NUMERIC, CATEGORICAL):
            raise SchemaMismatch(f"unknown kind {kind!r} for column {name!r}")
        schema.append(FeatureSpec(name, kind))

    instances = []
    for i, row in enumerate(body):
        feats = {}
        for (j, name), spec in zip(feature_cols, schema):
            text = row[j].strip()
            if spec.kind == NUMERIC:
                value = _parse_number(text)
                if value is None:
                    raise ParseError(i, name, text)
                feats[name] = value
            else:
                feats[name] = text
        instances.append(Instance(feats, labels[i]))
    return Dataset(tuple(instances), tuple(schema), label_column)


def split(dataset: Dataset, counts: Sequence[int], seed: int) -> Dataset:
    """Seeded shuffle, then contiguous train/val/test assignment.

    Rows beyond ``sum(counts)`` are tagged ``"unused"``.
    """
    n_train, n_val, n_test = (int(c) for c in counts)
    if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test > len(dataset):
        raise CountsExceedSize(f"counts {tuple(counts)} exceed dataset size {len(dataset)}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    tags = ["unused"] * len(dataset)
    bounds = [("train", 0, n_train), ("val", n_train, n_train + n_val),
              ("test", n_train + n_val, n_train + n_val + n_test)]
    for tag, lo, hi in bounds:
        for i in order[lo:hi]:
            tags[int(i)] = tag
    return Dataset(dataset.instances, dataset.schema, dataset.label_column, tuple(tags), seed)


# -- conditions ---------------------------------------------------------------

_OPS = {
    "<": operator.lt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
    ">": operator.gt,
    "<=": operator.le,
}


@dataclass(frozen=True, order=True)
class Condition:
    """A single boolean test ``feature op value``."""

    feature: str
    op: str
    value: object

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported operator {self.op!r}")

    def holds(self, features: Mapping[str, object]) -> bool:
        if self.feature not in features:
            raise SchemaMismatch(f"instance has no feature {self.feature!r}")
        return bool(_OPS[self.op](features[self.feature], self.value))

    def evaluate(self, column: np.ndarray) -> np.ndarray:
        return np.asarray(_OPS[self.op](column, self.value), dtype=bool)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "op": self.op, "value": self.value}

    @classmethod
    def from_dict(cls, doc: dict) -> "Condition":
        return cls(doc["feature"], doc["op"], doc["value"])

    def __str__(self):
        value = f"{self.value:g}" if isinstance(self.value, float) else str(self.value)
        return f"{self.feature} {self.op} {value}"


@dataclass(frozen=True)
class BinarizedView:
    """Condition catalog plus the instances-by-conditions truth matrix.

    ``complement[c]`` is the index of the condition equivalent to ``not c``
    (or -1 when the catalog has none); tree-based mining relies on it.
    """

    conditions: tuple
    matrix: np.ndarray
    complement: tuple
    warnings: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "complement": list(self.complement),
            "warnings": list(self.warnings),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))


def binarize(dataset: Dataset, bins_per_numeric: int = 5) -> BinarizedView:
    """Turn every feature into boolean conditions using train-split statistics only."""
    if bins_per_numeric < 2:
        raise ValueError("bins_per_numeric must be >= 2")
    train = dataset.indices("train")
    conditions: list[Condition] = []
    complement: list[int] = []
    warnings: list[str] = []

    for spec in dataset.schema:
        col = dataset.columns[spec.name][train]
        if spec.kind == NUMERIC:
            qs = np.quantile(col, np.arange(1, bins_per_numeric) / bins_per_numeric)
            emitted = 0
            for t in sorted(set(float(q) for q in qs)):
                below = int(np.sum(col < t))
                if below == 0 or below == len(col):
                    continue
                lo = len(conditions)
                conditions += [Condition(spec.name, "<", t), Condition(spec.name, ">=", t)]
                complement += [lo + 1, lo]
                emitted += 1
        else:
            cats = sorted(set(col.tolist()), key=str)
            emitted = 0
            if len(cats) == 2:
                lo = len(conditions)
                conditions += [Condition(spec.name, "==", cats[0]), Condition(spec.name, "==", cats[1])]
                complement += [lo + 1, lo]
                emitted = 1
            elif len(cats) > 2:
                for cat in cats:
                    lo = len(conditions)
                    conditions += [Condition(spec.name, "==", cat), Condition(spec.name, "!=", cat)]
                    complement += [lo + 1, lo]
                emitted = len(cats)
        if emitted == 0:
            msg = f"feature {spec.name!r} is constant on the train split; no conditions emitted"
            log.warning(msg)
            warnings.append(msg)

    matrix = np.zeros((len(dataset), len(conditions)), dtype=bool)
    for c, cond in enumerate(conditions):
        matrix[:, c] = cond.evaluate(dataset.columns[cond.feature])
    return BinarizedView(tuple(conditions), matrix, tuple(complement), tuple(warnings))


# -- dense encoding for the probabilistic models -------------------------------

@dataclass(frozen=True)
class Encoder:
    """Numeric passthrough plus one-hot categories (categories fixed at fit time)."""

    numeric: tuple
    categorical: tuple  # of (name, tuple of categories)

    @classmethod
    def fit(cls, dataset: Dataset, rows: np.ndarray | None = None) -> "Encoder":
        rows = dataset.indices("train") if rows is None else rows
        numeric, categorical = [], []
        for spec in dataset.schema:
            if spec.kind == NUMERIC:
                numeric.append(spec.name)
            else:
                cats = sorted(set(dataset.columns[spec.name][rows].tolist()), key=str)
                categorical.append((spec.name, tuple(cats)))
        return cls(tuple(numeric), tuple(categorical))

    @property
    def names(self) -> list[str]:
        out = list(self.numeric)
        for name, cats in self.categorical:
            out += [f"{name}=={c}" for c in cats]
        return out

    def transform(self, dataset: Dataset, rows: np.ndarray | None = None) -> np.ndarray:
        rows = np.arange(len(dataset)) if rows is None else rows
        blocks = [dataset.columns[n][rows].astype(float)[:, None] for n in self.numeric]
        for name, cats in self.categorical:
            col = dataset.columns[name][rows]
            blocks.append(np.stack([(col == c) for c in cats], axis=1).astype(float))
        if not blocks:
            return np.zeros((len(rows), 0))
        return np.hstack(blocks)
