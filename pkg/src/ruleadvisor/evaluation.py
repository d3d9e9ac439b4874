"""Team-outcome metrics over repeated human draws, the validation gate, and ADB degradation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .advisor import Advisor, CostSpec, decision_loss
from .data import Dataset
from .humansim import GroupRule, HumanProfile, LABEL_KEY, sample_acceptance, simulate_panel

# reported in this order; the first four are losses per decision instance
METRICS = ("hdl", "tdl", "al", "ttl", "value_added", "accuracy_improvement", "tdl_improvement",
           "advising_costs_incurred", "advising_costs_au", "advising_confidence_mean",
           "advising_accuracy", "advising_rate", "acceptance_rate", "errors_avoided_pct")
# undefined when no advice is offered in the group
_OPTIONAL = {"advising_confidence_mean", "advising_accuracy", "acceptance_rate", "errors_avoided_pct"}


@dataclass
class Outcome:
    """One repetition: independent decisions, advice, and acceptance per instance."""

    y: np.ndarray
    h: np.ndarray
    y_hat: np.ndarray
    accepted: np.ndarray   # meaningful only where y_hat != h
    c_m: np.ndarray

    @property
    def final(self):
        contra = self.y_hat != self.h
        return np.where(contra & (self.accepted == 1), self.y_hat, self.h)


def group_metrics(o: Outcome, costs: CostSpec, mask: np.ndarray | None = None) -> dict:
    """Per-instance metrics for one repetition, restricted to ``mask``."""
    mask = np.ones(len(o.y), dtype=bool) if mask is None else mask
    n = int(mask.sum())
    if n == 0:
        return {m: None for m in METRICS}
    y, h, y_hat, final = o.y[mask], o.h[mask], o.y_hat[mask], o.final[mask]
    contra = y_hat != h
    acc = (o.accepted[mask] == 1) & contra
    hdl = float(decision_loss(costs, y, h).sum() / n)
    tdl = float(decision_loss(costs, y, final).sum() / n)
    al = float(costs.alpha * contra.sum() / n)
    corrected = (h != y) & (final == y)
    corrupted = (h == y) & (final != y)
    n_adv = int(contra.sum())
    n_wrong = int((h != y).sum())
    out = {
        "hdl": hdl, "tdl": tdl, "al": al,
        "accuracy_improvement": float((corrected.sum() - corrupted.sum()) / n),
        "tdl_improvement": hdl - tdl,
        "advising_costs_incurred": n_adv / n,
        "advising_costs_au": costs.alpha * n_adv / n,
        "advising_rate": n_adv / n,
        "advising_confidence_mean": float(np.mean(o.c_m[mask][contra])) if n_adv else None,
        "advising_accuracy": float(np.mean(y_hat[contra] == y[contra])) if n_adv else None,
        "acceptance_rate": float(acc.sum() / n_adv) if n_adv else None,
        "errors_avoided_pct": 100.0 * corrected.sum() / n_wrong if n_wrong else None,
    }
    out["ttl"] = tdl + al
    out["value_added"] = hdl - out["ttl"]
    return out


@dataclass
class MetricsReport:
    """Means and standard errors over repetitions, overall and per group.

    ``ttl`` and ``value_added`` are derived from the other means so that the
    loss decomposition holds exactly on the report.
    """

    repetitions: int
    alpha: float
    groups: dict = field(default_factory=dict)   # group -> metric -> mean (or None)
    se: dict = field(default_factory=dict)       # group -> metric -> standard error

    def __getattr__(self, name):
        if name in METRICS:
            return self.groups["all"][name]
        raise AttributeError(name)

    def to_dict(self):
        return {"repetitions": self.repetitions, "alpha": self.alpha, "groups": self.groups, "se": self.se}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["repetitions"], doc["alpha"], doc["groups"], doc["se"])

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))

    def rows(self):
        for g, vals in self.groups.items():
            for m in METRICS:
                yield g, m, vals[m], self.se[g][m]

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["group", "metric", "mean", "se"])
            for g, m, v, s in self.rows():
                w.writerow([g, m, "" if v is None else repr(v), "" if s is None else repr(s)])


def _summarise(per_rep: list[dict]) -> tuple[dict, dict]:
    mean, se = {}, {}
    r = len(per_rep)
    for m in METRICS:
        vals = np.array([d[m] for d in per_rep if d[m] is not None], dtype=float)
        if len(vals) == 0:
            mean[m], se[m] = None, None
            continue
        mean[m] = float(vals.mean())
        se[m] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    if r and mean["hdl"] is not None:
        mean["ttl"] = mean["tdl"] + mean["al"]
        mean["value_added"] = mean["hdl"] - mean["ttl"]
    return mean, se


def group_masks(dataset: Dataset, rows: np.ndarray, groups: Mapping[str, tuple] | None) -> dict:
    masks = {"all": np.ones(len(rows), dtype=bool)}
    if groups:
        cols = {k: v[rows] for k, v in dataset.columns.items()}
        cols[LABEL_KEY] = dataset.labels[rows].astype(int)
        for name, conds in groups.items():
            masks[name] = GroupRule(tuple(conds), 0.0).mask(cols, len(rows))
    return masks


def simulate_outcome(advisor: Advisor | None, profile: HumanProfile, dataset: Dataset, rows, difficulty,
                     rng: np.random.Generator, p1=None) -> Outcome:
    """Draw the human, ask the advisor, and draw acceptance from the true behaviour."""
    panel = simulate_panel(profile, dataset, rows, difficulty, rng)
    if advisor is None:
        y_hat = panel.h.copy()
        c_m = np.full(len(rows), np.nan)
    else:
        b = advisor.advise_rows(dataset, rows, panel.h, panel.c_h, p1=p1)
        y_hat, c_m = b.y_hat, b.c_m
    contra = y_hat != panel.h
    accepted = np.zeros(len(rows), dtype=np.int8)
    if contra.any():
        accepted[contra] = sample_acceptance(profile.adb, c_m[contra], panel.c_h[contra],
                                             y_hat[contra], panel.h[contra], rng)
    return Outcome(panel.y, panel.h, y_hat, accepted, c_m)


def evaluate(advisor: Advisor | None, dataset: Dataset, rows, difficulty, profile: HumanProfile,
             costs: CostSpec, repetitions: int = 50, rng: np.random.Generator | None = None,
             groups: Mapping[str, tuple] | None = None) -> MetricsReport:
    """Average team metrics over ``repetitions`` fresh draws of the human.

    ``advisor=None`` is the human alone. ``costs`` is the context's true cost,
    which may differ from the one the advisor trained with.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    rows = np.asarray(rows)
    difficulty = np.asarray(difficulty)
    p1 = None
    if advisor is not None and advisor.outcome is not None:
        p1 = advisor.outcome.predict_proba(dataset, rows)
    masks = group_masks(dataset, rows, groups)
    per_group = {g: [] for g in masks}
    for _ in range(repetitions):
        o = simulate_outcome(advisor, profile, dataset, rows, difficulty, rng, p1)
        for g, mask in masks.items():
            per_group[g].append(group_metrics(o, costs, mask))
    rep = MetricsReport(repetitions, costs.alpha)
    for g, vals in per_group.items():
        rep.groups[g], rep.se[g] = _summarise(vals)
    return rep


@dataclass
class GateDecision:
    deploy: bool
    validation: MetricsReport


def robustness_gate(advisor: Advisor, dataset: Dataset, rows, difficulty, profile: HumanProfile,
                    costs: CostSpec, repetitions: int = 50, rng=None) -> GateDecision:
    """Keep the advisor only if it does not lower value on the validation rows."""
    rep = evaluate(advisor, dataset, rows, difficulty, profile, costs, repetitions, rng)
    return GateDecision(rep.value_added >= 0, rep)


def degrade_adb(profile: HumanProfile, levels) -> list[HumanProfile]:
    """Copies of ``profile`` whose acceptance is mixed with uniform noise at each level."""
    out = []
    for lv in levels:
        if not 0 <= lv <= 1:
            raise ValueError(f"noise level {lv} outside [0, 1]")
        out.append(profile.with_adb(noise_level=float(lv)) if lv else profile)
    return out


def degradation_table(discretion, profile: HumanProfile, levels, records, rng: np.random.Generator,
                      draws: int = 10000) -> list[dict]:
    """AUC of ``discretion`` against each degraded profile's acceptance events.

    Events reuse the (c_m, c_h, advice, human) covariates of ``records``,
    resampled with replacement up to ``draws`` events.
    """
    from .estimators import discretion_auc

    cm = np.array([r.c_m for r in records])
    ch = np.array([r.c_h for r in records])
    adv = np.array([r.advice for r in records])
    hum = np.array([r.h for r in records])
    idx = rng.integers(len(records), size=draws)
    table = []
    for lv, prof in zip(levels, degrade_adb(profile, levels)):
        auc = discretion_auc(discretion, prof, cm[idx], ch[idx], adv[idx], hum[idx], rng)
        table.append({"noise_level": float(lv), "auc": auc})
    return table


def sweep_alpha(config, alphas, variants, seeds, workers: int = 1):
    """Train and evaluate one advisor per (alpha, variant, seed); see :mod:`ruleadvisor.pipeline`."""
    from .pipeline import run_sweep

    return run_sweep(config, alphas, variants, seeds, workers)


def with_alpha(costs: CostSpec, alpha: float) -> CostSpec:
    return replace(costs, alpha=float(alpha))
