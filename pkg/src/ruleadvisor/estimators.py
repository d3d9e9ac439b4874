"""Auxiliary probabilistic models: difficulty/bootstrap logistic, outcome model, discretion model."""

from __future__ import annotations

import csv
import itertools
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.metrics import roc_auc_score
from sklearn.model_selection import StratifiedKFold

from .data import Dataset, Encoder
from .errors import (
    InsufficientRecords,
    NonConvergence,
    SingleClassRecords,
    SingleClassTrainingSet,
)
from .gbdt import BoostedTrees, _log_loss
from .humansim import HumanProfile, sample_acceptance, simulate_panel

DEFAULT_OUTCOME_GRID = {"max_depth": [2, 3], "learning_rate": [0.05, 0.1]}
DISCRETION_PARAMS = {"n_estimators": 200, "max_depth": 3, "learning_rate": 0.1}


class LogisticModel:
    """L2-regularised logistic regression on standardised inputs (scikit-learn solver, JSON-friendly state)."""

    def __init__(self, l2=1e-3, max_iter=100, tol=1e-10):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol
        self.mean = None
        self.scale = None
        self.coef = None
        self.intercept = 0.0
        self.n_iter = 0

    def fit(self, X, y):
        from sklearn.exceptions import ConvergenceWarning
        from sklearn.linear_model import LogisticRegression

        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.mean = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale = np.where(scale > 0, scale, 1.0)
        # penalty l2 * n / 2 * |w|^2 on the summed log-loss
        clf = LogisticRegression(C=1.0 / (self.l2 * len(X)), solver="newton-cholesky",
                                 max_iter=self.max_iter, tol=self.tol)
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            try:
                clf.fit((X - self.mean) / self.scale, y)
            except ConvergenceWarning:
                raise NonConvergence(self.max_iter) from None
        self.n_iter = int(clf.n_iter_[0])
        self.intercept = float(clf.intercept_[0])
        self.coef = clf.coef_[0].astype(float)
        return self

    def decision_function(self, X):
        return self.intercept + ((np.asarray(X, dtype=float) - self.mean) / self.scale) @ self.coef

    def predict_proba(self, X):
        p = 1.0 / (1.0 + np.exp(-self.decision_function(X)))
        return np.column_stack([1 - p, p])

    def to_dict(self):
        return {"l2": self.l2, "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, doc):
        m = cls(l2=doc["l2"])
        m.mean = np.asarray(doc["mean"])
        m.scale = np.asarray(doc["scale"])
        m.coef = np.asarray(doc["coef"])
        m.intercept = doc["intercept"]
        return m


@dataclass
class ProbabilisticClassifier:
    """A fitted binary model over dataset rows (encoder + linear or boosted-tree core)."""

    kind: str  # linear_logistic | boosted_trees
    encoder: Encoder
    model: object
    metadata: dict = field(default_factory=dict)

    def predict_proba(self, dataset: Dataset, rows=None) -> np.ndarray:
        """P(y = 1) for ``rows`` of ``dataset``."""
        return self.model.predict_proba(self.encoder.transform(dataset, rows))[:, 1]

    def predict_features(self, features: dict) -> float:
        ds = Dataset((_as_instance(features),), _schema_of(self.encoder))
        return float(self.predict_proba(ds)[0])

    def to_dict(self):
        return {
            "kind": self.kind,
            "encoder": {"numeric": list(self.encoder.numeric),
                        "categorical": [[n, list(c)] for n, c in self.encoder.categorical]},
            "model": self.model.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc):
        enc = Encoder(tuple(doc["encoder"]["numeric"]),
                      tuple((n, tuple(c)) for n, c in doc["encoder"]["categorical"]))
        core = LogisticModel if doc["kind"] == "linear_logistic" else BoostedTrees
        return cls(doc["kind"], enc, core.from_dict(doc["model"]), doc.get("metadata", {}))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _as_instance(features):
    from .data import Instance
    return Instance(dict(features), 0)


def _schema_of(encoder: Encoder):
    from .data import CATEGORICAL, NUMERIC, FeatureSpec
    return tuple([FeatureSpec(n, NUMERIC) for n in encoder.numeric]
                 + [FeatureSpec(n, CATEGORICAL) for n, _ in encoder.categorical])


def _check_labels(y):
    if len(y) == 0 or len(np.unique(y)) < 2:
        raise SingleClassTrainingSet("training rows must contain both labels")


def fit_logistic(dataset: Dataset, rows=None, l2: float = 1e-3, max_iter: int = 100) -> ProbabilisticClassifier:
    """Linear logistic model on ``rows`` (default: the train split)."""
    rows = dataset.indices("train") if rows is None else np.asarray(rows)
    y = dataset.labels[rows]
    _check_labels(y)
    enc = Encoder.fit(dataset, rows)
    model = LogisticModel(l2=l2, max_iter=max_iter).fit(enc.transform(dataset, rows), y)
    return ProbabilisticClassifier("linear_logistic", enc, model,
                                   {"n_train": int(len(rows)), "iterations": model.n_iter})


def _grid_points(grid: dict) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]


def fit_outcome_model(dataset: Dataset, rows=None, cv_folds: int = 5, grid: dict | None = None,
                      seed: int = 0) -> ProbabilisticClassifier:
    """Boosted-tree model with the grid point of lowest cross-validated log-loss."""
    if cv_folds < 2:
        raise ValueError("cv_folds must be >= 2")
    rows = dataset.indices("train") if rows is None else np.asarray(rows)
    y = dataset.labels[rows].astype(int)
    _check_labels(y)
    grid = DEFAULT_OUTCOME_GRID if grid is None else grid
    enc = Encoder.fit(dataset, rows)
    X = enc.transform(dataset, rows)
    points = _grid_points(grid)
    folds = min(cv_folds, int(np.bincount(y).min()))
    scores = []
    for params in points:
        if len(points) == 1 or folds < 2:
            scores.append(float("nan"))
            continue
        losses = []
        for tr, te in StratifiedKFold(folds, shuffle=True, random_state=seed).split(X, y):
            m = BoostedTrees(seed=seed, **params).fit(X[tr], y[tr])
            losses.append(_log_loss(y[te], m.predict_proba(X[te])[:, 1]))
        scores.append(float(np.mean(losses)))
    best = 0 if len(points) == 1 else int(np.nanargmin(scores))
    model = BoostedTrees(seed=seed, **points[best]).fit(X, y)
    meta = {"grid": grid, "cv_folds": folds, "cv_log_loss": scores, "chosen": points[best],
            "n_train": int(len(rows)), "n_trees": len(model.trees)}
    return ProbabilisticClassifier("boosted_trees", enc, model, meta)


def out_of_fold_proba(dataset: Dataset, rows, params: dict, folds: int = 5, seed: int = 0) -> np.ndarray:
    """P(y=1) for each of ``rows`` from a model that never saw that row."""
    rows = np.asarray(rows)
    y = dataset.labels[rows].astype(int)
    enc = Encoder.fit(dataset, rows)
    X = enc.transform(dataset, rows)
    out = np.empty(len(rows))
    folds = max(2, min(folds, int(np.bincount(y, minlength=2).min())))
    for tr, te in StratifiedKFold(folds, shuffle=True, random_state=seed).split(X, y):
        m = BoostedTrees(seed=seed, **params).fit(X[tr], y[tr])
        out[te] = m.predict_proba(X[te])[:, 1]
    return out


# -- interactions and discretion -------------------------------------------------------

@dataclass(frozen=True)
class InteractionRecord:
    instance_id: int
    h: int
    c_h: float
    advice: int
    c_m: float
    accepted: int


INTERACTION_COLUMNS = ["instance_id", "h", "c_h", "advice", "c_m", "accepted"]


def save_interactions(records: Sequence[InteractionRecord], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INTERACTION_COLUMNS)
        for r in records:
            w.writerow([r.instance_id, r.h, repr(r.c_h), r.advice, repr(r.c_m), r.accepted])


def load_interactions(path) -> list[InteractionRecord]:
    with open(path, newline="") as fh:
        return [InteractionRecord(int(r["instance_id"]), int(r["h"]), float(r["c_h"]),
                                  int(r["advice"]), float(r["c_m"]), int(r["accepted"]))
                for r in csv.DictReader(fh)]


def collect_interactions(profile: HumanProfile, bootstrap: ProbabilisticClassifier, dataset: Dataset,
                         rows, difficulty, rng: np.random.Generator) -> list[InteractionRecord]:
    """Pair the simulated human with a bootstrap advisor; log every contradiction."""
    rows = np.asarray(rows)
    panel = simulate_panel(profile, dataset, rows, np.asarray(difficulty), rng)
    p = bootstrap.predict_proba(dataset, rows)
    advice = (p >= 0.5).astype(np.int8)
    c_m = np.maximum(p, 1 - p)
    contra = np.flatnonzero(advice != panel.h)
    accepted = sample_acceptance(profile.adb, c_m[contra], panel.c_h[contra],
                                 advice[contra], panel.h[contra], rng)
    return [InteractionRecord(int(rows[j]), int(panel.h[j]), float(panel.c_h[j]),
                              int(advice[j]), float(c_m[j]), int(a))
            for j, a in zip(contra, np.atleast_1d(accepted))]


@dataclass
class DiscretionModel:
    """Estimated probability of accepting contradicting advice given (c_m, c_h)."""

    classifier: BoostedTrees | None = None
    heldout_auc: float | None = None
    fixed_value: float | None = None
    n_records: int = 0

    def __post_init__(self):
        if self.fixed_value is not None and not 0.0 <= self.fixed_value <= 1.0:
            raise ValueError("fixed_value must lie in [0, 1]")
        if self.fixed_value is None and self.classifier is None:
            raise ValueError("need a classifier or a fixed value")

    @classmethod
    def constant(cls, value: float = 1.0) -> "DiscretionModel":
        return cls(fixed_value=float(value))

    def predict(self, c_m, c_h) -> np.ndarray:
        c_m = np.atleast_1d(np.asarray(c_m, dtype=float))
        c_h = np.broadcast_to(np.asarray(c_h, dtype=float), c_m.shape)
        if self.fixed_value is not None:
            return np.full(c_m.shape, self.fixed_value)
        return self.classifier.predict_proba(np.column_stack([c_m, c_h]))[:, 1]

    def to_dict(self):
        return {"fixed_value": self.fixed_value, "heldout_auc": self.heldout_auc,
                "n_records": self.n_records,
                "classifier": self.classifier.to_dict() if self.classifier is not None else None}

    @classmethod
    def from_dict(cls, doc):
        clf = BoostedTrees.from_dict(doc["classifier"]) if doc.get("classifier") else None
        return cls(clf, doc.get("heldout_auc"), doc.get("fixed_value"), doc.get("n_records", 0))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_discretion(records: Sequence[InteractionRecord], seed: int = 0, holdout: float = 0.3,
                   params: dict | None = None) -> DiscretionModel:
    """Boosted trees on (c_m, c_h) -> accepted; AUC measured on a stratified hold-out."""
    if len(records) < 2:
        raise InsufficientRecords(f"need at least 2 interaction records, got {len(records)}")
    X = np.array([[r.c_m, r.c_h] for r in records], dtype=float)
    y = np.array([r.accepted for r in records], dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClassRecords("interaction records are all accepts or all rejects")
    params = dict(DISCRETION_PARAMS if params is None else params)
    auc = None
    rng = np.random.default_rng(seed)
    test = np.zeros(len(y), dtype=bool)
    for label in (0, 1):
        idx = np.flatnonzero(y == label)
        n_out = int(round(holdout * len(idx)))
        test[rng.permutation(idx)[:n_out]] = True
    if test.any() and len(np.unique(y[test])) == 2 and len(np.unique(y[~test])) == 2:
        probe = BoostedTrees(seed=seed, **params).fit(X[~test], y[~test])
        auc = float(roc_auc_score(y[test], probe.predict_proba(X[test])[:, 1]))
    model = BoostedTrees(seed=seed, **params).fit(X, y)
    return DiscretionModel(model, auc, None, len(records))


def discretion_auc(model: DiscretionModel, profile: HumanProfile, c_m, c_h, advice, human,
                   rng: np.random.Generator) -> float:
    """AUC of ``model`` against acceptance events drawn from ``profile``'s true behaviour."""
    a = sample_acceptance(profile.adb, np.asarray(c_m), np.asarray(c_h),
                          np.asarray(advice), np.asarray(human), rng)
    if len(np.unique(a)) < 2:
        return float("nan")
    return float(roc_auc_score(a, model.predict(c_m, c_h)))
