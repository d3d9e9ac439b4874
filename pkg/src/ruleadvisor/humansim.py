"""Simulated decision-maker: decisions, self-reported confidence, and advice acceptance.

A :class:`HumanProfile` composes three independent pieces:

* a decision behaviour giving ``p(h = y)`` per instance,
* a confidence behaviour giving the self-reported confidence ``c_h``,
* acceptance parameters mapping ``(c_m, c_h)`` to the probability of taking
  contradicting advice (confidence shrinkage, naive-Bayes integration,
  inverse-S probability weighting, then a logit choice).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import Condition, Dataset
from .errors import ConfidenceOutOfRange, NoMatchingRule

LABEL_KEY = "__label__"  # pseudo-feature exposing the true label to group predicates
_EPS = 1e-9


@dataclass(frozen=True)
class GroupRule:
    """Conjunction of conditions mapped to a value (an accuracy or a confidence)."""

    conditions: tuple
    value: float

    def holds(self, features: Mapping[str, object]) -> bool:
        return all(c.holds(features) for c in self.conditions)

    def mask(self, columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        out = np.ones(n, dtype=bool)
        for c in self.conditions:
            out &= c.evaluate(columns[c.feature])
        return out

    def to_dict(self):
        return {"conditions": [c.to_dict() for c in self.conditions], "value": self.value}

    @classmethod
    def from_dict(cls, doc):
        return cls(tuple(Condition.from_dict(c) for c in doc["conditions"]), float(doc["value"]))


def _conds_to(doc):
    return [c.to_dict() for c in doc] if doc is not None else None


def _conds_from(doc):
    return tuple(Condition.from_dict(c) for c in doc) if doc is not None else None


@dataclass(frozen=True)
class DecisionBehavior:
    kind: str = "difficulty_biased"  # difficulty_biased | group_biased | custom_group
    difficulty_threshold: float = 0.6
    low_accuracy: float = 0.60
    high_accuracy: float = 1.00
    condition: tuple | None = None
    custom: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("difficulty_biased", "group_biased", "custom_group"):
            raise ValueError(f"unknown decision behaviour {self.kind!r}")
        accs = [self.low_accuracy, self.high_accuracy] + [r.value for r in self.custom or ()]
        if any(not 0.0 <= a <= 1.0 for a in accs):
            raise ValueError("accuracies must lie in [0, 1]")
        if self.kind == "group_biased" and not self.condition:
            raise ValueError("group_biased decisions need a condition")
        if self.kind == "custom_group" and not self.custom:
            raise ValueError("custom_group decisions need a rule list")

    def to_dict(self):
        doc = asdict(self)
        doc["condition"] = _conds_to(self.condition)
        doc["custom"] = [r.to_dict() for r in self.custom] if self.custom else None
        return doc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc["condition"] = _conds_from(doc.get("condition"))
        doc["custom"] = tuple(GroupRule.from_dict(r) for r in doc["custom"]) if doc.get("custom") else None
        return cls(**doc)


@dataclass(frozen=True)
class ConfidenceBehavior:
    kind: str = "accuracy_biased"  # accuracy_biased | group_biased | custom_group
    kappa: float = 0.05
    difficulty_threshold: float = 0.6
    easy_confidence: float = 0.9
    low_confidence: float = 0.2
    high_confidence: float = 1.0
    condition: tuple | None = None
    custom: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("accuracy_biased", "group_biased", "custom_group"):
            raise ValueError(f"unknown confidence behaviour {self.kind!r}")
        vals = [self.easy_confidence, self.low_confidence, self.high_confidence]
        vals += [r.value for r in self.custom or ()]
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("confidences must lie in [0, 1]")
        if self.kind == "group_biased" and not self.condition:
            raise ValueError("group_biased confidence needs a condition")
        if self.kind == "custom_group" and not self.custom:
            raise ValueError("custom_group confidence needs a rule list")

    to_dict = DecisionBehavior.to_dict

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        doc["condition"] = _conds_from(doc.get("condition"))
        doc["custom"] = tuple(GroupRule.from_dict(r) for r in doc["custom"]) if doc.get("custom") else None
        return cls(**doc)


@dataclass(frozen=True)
class ADBParams:
    """Parameters of the ground-truth acceptance behaviour.

    ``combine`` selects how the two shrunk confidences are integrated:
    ``"naive_bayes"`` (default) or ``"printed"``, the alternative fraction
    ``1 / (1 + (1-a)(a-b) / (a b))`` kept for comparison.
    """

    delta: float = 5.0
    k: float = 0.63
    gamma: float = 0.95
    beta: float = 0.5
    accept_boost: float = 1.0
    accept_damp: float = 1.0
    noise_level: float = 0.0
    combine: str = "naive_bayes"

    def __post_init__(self):
        if self.delta < 0 or not 0 < self.k <= 1 or not 0 <= self.gamma <= 1 or self.beta < 0:
            raise ValueError(f"inadmissible acceptance parameters {self}")
        if not 0 <= self.noise_level <= 1:
            raise ValueError("noise_level must lie in [0, 1]")
        if self.combine not in ("naive_bayes", "printed"):
            raise ValueError(f"unknown combine rule {self.combine!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


@dataclass(frozen=True)
class HumanProfile:
    decision: DecisionBehavior = field(default_factory=DecisionBehavior)
    confidence: ConfidenceBehavior = field(default_factory=ConfidenceBehavior)
    adb: ADBParams = field(default_factory=ADBParams)
    seed: int = 0
    name: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "decision": self.decision.to_dict(),
            "confidence": self.confidence.to_dict(),
            "adb": self.adb.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            DecisionBehavior.from_dict(doc["decision"]),
            ConfidenceBehavior.from_dict(doc["confidence"]),
            ADBParams.from_dict(doc["adb"]),
            int(doc.get("seed", 0)),
            doc.get("name", ""),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_adb(self, **changes) -> "HumanProfile":
        return replace(self, adb=replace(self.adb, **changes))


# -- decisions ---------------------------------------------------------------

def difficulty_proxy(outcome_probability):
    """``2 |p - 0.5|``: 0 when a linear model is unsure, 1 when it is certain."""
    return 2.0 * np.abs(np.asarray(outcome_probability, dtype=float) - 0.5)


def _with_label(features, label):
    if label is None:
        return features
    merged = dict(features)
    merged[LABEL_KEY] = label
    return merged


def correct_probability(profile: HumanProfile, instance, difficulty: float, label: int | None = None) -> float:
    """Probability that the simulated human decides ``instance`` correctly."""
    beh = profile.decision
    features = _with_label(getattr(instance, "features", instance), label)
    if beh.kind == "difficulty_biased":
        return beh.low_accuracy if difficulty > beh.difficulty_threshold else beh.high_accuracy
    if beh.kind == "group_biased":
        holds = all(c.holds(features) for c in beh.condition)
        return beh.low_accuracy if holds else beh.high_accuracy
    for rule in beh.custom:
        if rule.holds(features):
            return rule.value
    raise NoMatchingRule("no custom decision rule matches the instance")


def sample_decision(p_correct: float, label: int, rng: np.random.Generator) -> int:
    """Draw h: the true label with probability ``p_correct``, its flip otherwise."""
    return int(label) if rng.random() < p_correct else 1 - int(label)


def confidence(profile: HumanProfile, instance, p_correct: float, difficulty: float,
               rng: np.random.Generator | None = None, sign: int | None = None,
               label: int | None = None) -> float:
    """Self-reported confidence for one instance.

    For accuracy-biased confidence the offset sign is ``sign`` when given,
    otherwise drawn from ``rng``.
    """
    beh = profile.confidence
    features = _with_label(getattr(instance, "features", instance), label)
    if beh.kind == "accuracy_biased":
        if sign is None:
            sign = 1 if rng.random() < 0.5 else -1
        return float(np.clip(p_correct + sign * beh.kappa, 0.01, 0.99))
    if beh.kind == "group_biased":
        if difficulty < beh.difficulty_threshold:
            return beh.easy_confidence
        holds = all(c.holds(features) for c in beh.condition)
        return beh.low_confidence if holds else beh.high_confidence
    for rule in beh.custom:
        if rule.holds(features):
            return rule.value
    raise NoMatchingRule("no custom confidence rule matches the instance")


def kappa_signs(seed: int, instance_ids) -> np.ndarray:
    """Per-instance offset signs (+1/-1), fixed by the profile seed and instance id."""
    ids = np.asarray(instance_ids, dtype=np.int64)
    out = np.empty(len(ids), dtype=np.int8)
    for j, i in enumerate(ids):
        bit = np.random.default_rng([int(seed) & 0xFFFFFFFF, int(i), 0x6B617070]).integers(2)
        out[j] = 1 if bit else -1
    return out


# -- acceptance ------------------------------------------------------------------

def _shrink(c, gamma):
    a = np.power(c, gamma)
    return a / (a + np.power(1.0 - c, gamma))


def weight(p, k):
    """Inverse-S probability weighting ``p^k / (p^k + (1-p)^k)``."""
    p = np.asarray(p, dtype=float)
    a = np.power(p, k)
    return a / (a + np.power(1.0 - p, k))


def acceptance_probability(adb: ADBParams, c_m, c_h, advice=None, human=None, noise_u=None):
    """Probability of accepting advice that contradicts the human's decision.

    Works elementwise on arrays. ``advice``/``human`` select the asymmetric
    multipliers (advice 1 over human 0 -> ``accept_boost``; advice 0 over
    human 1 -> ``accept_damp``). With ``noise_level > 0`` the probability is
    moved towards ``noise_u`` (uniform draws; 0.5, their mean, when omitted).
    """
    c_m = np.asarray(c_m, dtype=float)
    c_h = np.asarray(c_h, dtype=float)
    if np.any(~np.isfinite(c_m)) or np.any(~np.isfinite(c_h)) or \
            np.any((c_m < 0) | (c_m > 1)) or np.any((c_h < 0) | (c_h > 1)):
        raise ConfidenceOutOfRange("confidences must lie in [0, 1]")
    c_m = np.clip(c_m, _EPS, 1 - _EPS)
    c_h = np.clip(c_h, _EPS, 1 - _EPS)
    a = _shrink(c_m, adb.gamma)
    b = _shrink(c_h, adb.gamma)
    if adb.combine == "naive_bayes":
        post = a * (1 - b) / (a * (1 - b) + (1 - a) * b)
    else:
        post = np.clip(1.0 / (1.0 + (1 - a) * (a - b) / (a * b)), 0.0, 1.0)
    w = weight(post, adb.k)
    u_accept = (1 + adb.beta) * w - adb.beta
    u_reject = 1 - (1 + adb.beta) * w
    # logistic form of exp(d*ua) / (exp(d*ua) + exp(d*ur)), overflow-safe
    p = 1.0 / (1.0 + np.exp(-adb.delta * (u_accept - u_reject)))
    if advice is not None and human is not None:
        advice = np.asarray(advice)
        human = np.asarray(human)
        factor = np.where((advice == 1) & (human == 0), adb.accept_boost,
                          np.where((advice == 0) & (human == 1), adb.accept_damp, 1.0))
        p = np.clip(p * factor, 0.0, 1.0)
    if adb.noise_level > 0:
        u = 0.5 if noise_u is None else np.asarray(noise_u, dtype=float)
        p = np.clip(p + adb.noise_level * (u - p), 0.0, 1.0)
    return p if p.ndim else float(p)


def sample_acceptance(adb: ADBParams, c_m, c_h, advice, human, rng: np.random.Generator):
    """Bernoulli acceptance draw(s); noise, when configured, is drawn per event."""
    shape = np.broadcast(np.asarray(c_m), np.asarray(c_h)).shape
    noise_u = rng.random(shape) if adb.noise_level > 0 else None
    p = acceptance_probability(adb, c_m, c_h, advice, human, noise_u)
    draws = rng.random(shape) < p
    return draws.astype(np.int8) if shape else int(draws)


# -- panels -------------------------------------------------------------------------

@dataclass(frozen=True)
class Panel:
    """One realisation of the human on a set of rows."""

    rows: np.ndarray
    y: np.ndarray
    h: np.ndarray
    c_h: np.ndarray
    p_correct: np.ndarray

    def __len__(self):
        return len(self.rows)

    def subset(self, mask) -> "Panel":
        return Panel(self.rows[mask], self.y[mask], self.h[mask], self.c_h[mask], self.p_correct[mask])

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "h", "c_h", "p_correct"])
            for i in range(len(self)):
                w.writerow([int(self.rows[i]), int(self.h[i]), repr(float(self.c_h[i])),
                            repr(float(self.p_correct[i]))])


def _masked_columns(dataset: Dataset, rows: np.ndarray) -> dict:
    cols = {name: col[rows] for name, col in dataset.columns.items()}
    cols[LABEL_KEY] = dataset.labels[rows].astype(int)
    return cols


def correct_probabilities(profile: HumanProfile, dataset: Dataset, rows: np.ndarray,
                          difficulty: np.ndarray) -> np.ndarray:
    """Vectorised :func:`correct_probability` over ``rows``."""
    beh = profile.decision
    n = len(rows)
    if beh.kind == "difficulty_biased":
        return np.where(difficulty > beh.difficulty_threshold, beh.low_accuracy, beh.high_accuracy)
    cols = _masked_columns(dataset, rows)
    if beh.kind == "group_biased":
        mask = GroupRule(beh.condition, 0.0).mask(cols, n)
        return np.where(mask, beh.low_accuracy, beh.high_accuracy)
    return _first_match(beh.custom, cols, n, "decision")


def _first_match(rules, cols, n, what):
    out = np.full(n, np.nan)
    for rule in rules:
        mask = rule.mask(cols, n) & np.isnan(out)
        out[mask] = rule.value
    if np.isnan(out).any():
        raise NoMatchingRule(f"no custom {what} rule matches {int(np.isnan(out).sum())} instance(s)")
    return out


def confidences(profile: HumanProfile, dataset: Dataset, rows: np.ndarray,
                p_correct: np.ndarray, difficulty: np.ndarray) -> np.ndarray:
    """Vectorised :func:`confidence`; accuracy-biased signs are fixed per instance."""
    beh = profile.confidence
    n = len(rows)
    if beh.kind == "accuracy_biased":
        signs = kappa_signs(profile.seed, rows)
        return np.clip(p_correct + signs * beh.kappa, 0.01, 0.99)
    cols = _masked_columns(dataset, rows)
    if beh.kind == "group_biased":
        mask = GroupRule(beh.condition, 0.0).mask(cols, n)
        grouped = np.where(mask, beh.low_confidence, beh.high_confidence)
        return np.where(difficulty < beh.difficulty_threshold, beh.easy_confidence, grouped)
    return _first_match(beh.custom, cols, n, "confidence")


def simulate_panel(profile: HumanProfile, dataset: Dataset, rows: np.ndarray,
                   difficulty: np.ndarray, rng: np.random.Generator) -> Panel:
    """Draw independent decisions for ``rows``; ``difficulty`` is aligned with ``rows``."""
    rows = np.asarray(rows)
    y = dataset.labels[rows].astype(np.int8)
    p = correct_probabilities(profile, dataset, rows, difficulty)
    c_h = confidences(profile, dataset, rows, p, difficulty)
    right = rng.random(len(rows)) < p
    h = np.where(right, y, 1 - y).astype(np.int8)
    return Panel(rows, y, h, np.asarray(c_h, dtype=float), np.asarray(p, dtype=float))
