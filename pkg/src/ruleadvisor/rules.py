"""Conjunctive rules, two-sided rule sets, and random-forest candidate mining."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import BinarizedView, Condition, Dataset
from .errors import EmptyPool, ZeroCoverage

MAX_POOL_PER_SIDE = 5000


@dataclass(frozen=True)
class Rule:
    """Conjunction of conditions.

    ``precision`` and ``support`` are train-split statistics with respect to
    the rule's side (label 1 for the positive side, 0 for the negative side);
    they are bookkeeping only and do not take part in equality.
    """

    conditions: tuple
    precision: float | None = field(default=None, compare=False)
    support: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.conditions:
            raise ValueError("a rule needs at least one condition")
        object.__setattr__(self, "conditions", tuple(sorted(self.conditions)))

    @property
    def length(self) -> int:
        return len(self.conditions)

    def covers(self, features: Mapping[str, object]) -> bool:
        return all(c.holds(features) for c in self.conditions)

    def cover_vector(self, dataset: Dataset, rows: np.ndarray | None = None) -> np.ndarray:
        rows = np.arange(len(dataset)) if rows is None else rows
        out = np.ones(len(rows), dtype=bool)
        for c in self.conditions:
            out &= c.evaluate(dataset.columns[c.feature][rows])
        return out

    def with_stats(self, precision: float, support: int) -> "Rule":
        return Rule(self.conditions, precision, support)

    def to_dict(self) -> dict:
        doc = {"conditions": [c.to_dict() for c in self.conditions]}
        if self.precision is not None:
            doc["precision"] = self.precision
            doc["support"] = self.support
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Rule":
        conds = tuple(Condition.from_dict(c) for c in doc["conditions"])
        return cls(conds, doc.get("precision"), doc.get("support"))

    def __str__(self):
        return " AND ".join(str(c) for c in self.conditions)


def cover(rule: Rule, instance) -> bool:
    """True iff every condition of ``rule`` holds on ``instance`` (an Instance or feature map)."""
    features = getattr(instance, "features", instance)
    return rule.covers(features)


def precision(rule: Rule, dataset: Dataset, target_label: int, rows: np.ndarray | None = None) -> float:
    """Fraction of covered train rows whose label is ``target_label``."""
    rows = dataset.indices("train") if rows is None else rows
    covered = rule.cover_vector(dataset, rows)
    n = int(covered.sum())
    if n == 0:
        raise ZeroCoverage(f"rule [{rule}] covers no training instance")
    return float(np.mean(dataset.labels[rows][covered] == target_label))


@dataclass(frozen=True)
class RuleSet:
    positive: tuple = ()
    negative: tuple = ()

    def __post_init__(self):
        for side in (self.positive, self.negative):
            if len(set(side)) != len(side):
                raise ValueError("a rule may appear at most once per side")

    def __len__(self):
        return len(self.positive) + len(self.negative)

    def side(self, label: int) -> tuple:
        return self.positive if label == 1 else self.negative

    def covers(self, instance, label: int | None = None) -> bool:
        rules = self.positive + self.negative if label is None else self.side(label)
        return any(cover(r, instance) for r in rules)

    def cover_matrix(self, dataset: Dataset, label: int, rows: np.ndarray | None = None) -> np.ndarray:
        rows = np.arange(len(dataset)) if rows is None else rows
        rules = self.side(label)
        out = np.zeros((len(rows), len(rules)), dtype=bool)
        for j, r in enumerate(rules):
            out[:, j] = r.cover_vector(dataset, rows)
        return out

    def to_dict(self) -> dict:
        return {
            "positive": [r.to_dict() for r in self.positive],
            "negative": [r.to_dict() for r in self.negative],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RuleSet":
        return cls(
            tuple(Rule.from_dict(r) for r in doc.get("positive", [])),
            tuple(Rule.from_dict(r) for r in doc.get("negative", [])),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RuleSet":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def describe(self) -> str:
        lines = []
        for label, rules in ((1, self.positive), (0, self.negative)):
            for r in rules:
                conf = f"  (precision {r.precision:.3f})" if r.precision is not None else ""
                lines.append(f"IF {r} THEN advise {label}{conf}")
        return "\n".join(lines) if lines else "(empty rule set: always defer to the human)"


@dataclass(frozen=True)
class CandidatePool:
    """Mined candidates, each side as rules plus their train cover matrix (rows x rules)."""

    positive: tuple
    negative: tuple
    positive_cover: np.ndarray
    negative_cover: np.ndarray

    def side(self, label: int) -> tuple:
        return self.positive if label == 1 else self.negative

    def side_cover(self, label: int) -> np.ndarray:
        return self.positive_cover if label == 1 else self.negative_cover

    def __len__(self):
        return len(self.positive) + len(self.negative)


def simplify_path(cond_idx: Sequence[int], conditions: Sequence[Condition]) -> tuple:
    """Drop conditions implied by tighter ones on the same feature.

    Returns a sorted tuple of catalog indices. Contradictory paths are kept
    as-is; their empty cover removes them at the support filter.
    """
    by_feature: dict = {}
    for c in cond_idx:
        by_feature.setdefault(conditions[c].feature, []).append(c)
    keep = []
    for idxs in by_feature.values():
        lt = [c for c in idxs if conditions[c].op == "<"]
        ge = [c for c in idxs if conditions[c].op == ">="]
        eq = [c for c in idxs if conditions[c].op == "=="]
        ne = [c for c in idxs if conditions[c].op == "!="]
        if lt:
            keep.append(min(lt, key=lambda c: conditions[c].value))
        if ge:
            keep.append(max(ge, key=lambda c: conditions[c].value))
        if eq:
            keep.extend(sorted(set(eq)))
            eq_values = {conditions[c].value for c in eq}
            # != v is implied by == w (w != v) unless it contradicts it
            keep.extend(c for c in sorted(set(ne)) if conditions[c].value in eq_values)
        else:
            keep.extend(sorted(set(ne)))
    return tuple(sorted(set(keep)))


def extract_paths(tree, columns: Sequence[int], complement: Sequence[int]) -> list[tuple]:
    """Root-to-node condition paths of a fitted sklearn tree, depth >= 1.

    ``columns[f]`` maps tree feature ``f`` to a catalog condition index; the
    left branch (value <= 0.5, condition false) maps to its complement.
    Paths are returned in depth-first order, unsimplified.
    """
    t = tree.tree_
    out = []
    stack = [(0, ())]
    while stack:
        node, path = stack.pop()
        if path:
            out.append(path)
        left, right = t.children_left[node], t.children_right[node]
        if left == -1:
            continue
        cond = columns[t.feature[node]]
        neg = complement[cond]
        # right pushed first so the left subtree is emitted first
        stack.append((right, path + (cond,)))
        if neg >= 0:
            stack.append((left, path + (neg,)))
    return out


def mine_candidates(
    view: BinarizedView,
    labels: np.ndarray,
    rows: np.ndarray,
    max_len: int = 4,
    min_support: float = 0.05,
    forest_size: int = 100,
    seed: int = 0,
    max_per_side: int = MAX_POOL_PER_SIDE,
) -> CandidatePool:
    """Mine positive/negative candidate rules from random-forest decision paths.

    ``labels`` are the labels of ``rows`` (indices into ``view.matrix``).
    Candidates keep length in [2, max_len], train support >= ``min_support``
    and side precision strictly above 0.5.
    """
    from sklearn.ensemble import RandomForestClassifier

    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if not 0 < min_support < 1:
        raise ValueError("min_support must lie in (0, 1)")
    labels = np.asarray(labels).astype(int)
    matrix = view.matrix[rows]
    n = len(rows)
    if n == 0 or len(np.unique(labels)) < 2:
        raise EmptyPool("mining needs training rows with both labels")

    # one column per complementary pair; the tree's false branch is the complement
    columns = [c for c, comp in enumerate(view.complement) if comp < 0 or c < comp]
    if not columns:
        raise EmptyPool("condition catalog is empty")
    min_count = max(1, int(math.ceil(min_support * n)))
    forest = RandomForestClassifier(
        n_estimators=forest_size,
        max_depth=max_len,
        max_features="sqrt",
        min_samples_leaf=max(1, min_count // 2),
        random_state=seed,
        n_jobs=1,
    )
    forest.fit(matrix[:, columns], labels)

    seen = set()
    found = []
    for est in forest.estimators_:
        for path in extract_paths(est, columns, view.complement):
            key = simplify_path(path, view.conditions)
            if key in seen:
                continue
            seen.add(key)
            found.append(key)

    sides = {1: [], 0: []}
    for order, key in enumerate(found):
        if not 2 <= len(key) <= max_len:
            continue
        covered = np.all(matrix[:, list(key)], axis=1)
        count = int(covered.sum())
        if count < min_count:
            continue
        pos = int(labels[covered].sum())
        for label, hits in ((1, pos), (0, count - pos)):
            prec = hits / count
            if prec > 0.5:
                sides[label].append((-prec, -count, order, key, prec, count, covered))

    pools = {}
    for label in (1, 0):
        ranked = sorted(sides[label], key=lambda t: t[:3])[:max_per_side]
        rules = tuple(
            Rule(tuple(view.conditions[c] for c in key), prec, count)
            for _, _, _, key, prec, count, _ in ranked
        )
        cov = np.stack([t[6] for t in ranked], axis=1) if ranked else np.zeros((n, 0), dtype=bool)
        pools[label] = (rules, cov)
    if not pools[1][0] and not pools[0][0]:
        raise EmptyPool(
            f"no candidate satisfies length <= {max_len} and support >= {min_support:g}"
        )
    return CandidatePool(pools[1][0], pools[0][0], pools[1][1], pools[0][1])
