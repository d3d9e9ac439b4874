"""Simulated annealing over two-sided rule sets, minimising empirical team loss on a training panel.

The same search also yields the ablation baselines (no acceptance model, no
advising cost, both) and the task-only advisor, through :func:`apply_variant`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .advisor import (TASK_ONLY, TEAMRULES, Advisor, CostSpec, best_covering, decision_loss,
                      selective_advice)
from .errors import ConfigError, NoEligibleCandidate, ZeroTotalLoss
from .estimators import DiscretionModel, ProbabilisticClassifier
from .rules import CandidatePool, RuleSet

log = logging.getLogger(__name__)

VARIANTS = ("TR", "TR_no_ADB", "TR_no_Cost", "TR_no_ADB_Cost", "task_only")


@dataclass(frozen=True)
class TrainerConfig:
    iterations: int = 2000
    cooling_base: float = 0.01
    beta0: int = 10000          # recorded only; the pool cap lives in the rules module
    max_rule_len: int = 4
    min_support: float = 0.05
    variant: str = "TR"
    seed: int = 0
    acceptance_rule: str = "printed"  # printed | metropolis
    early_stop: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 < self.cooling_base < 1:
            raise ConfigError("cooling_base must lie in (0, 1)")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.acceptance_rule not in ("printed", "metropolis"):
            raise ConfigError(f"unknown acceptance rule {self.acceptance_rule!r}")

    def temperature(self, t: int) -> float:
        return self.cooling_base ** (t / self.iterations)


@dataclass(frozen=True)
class VariantOverrides:
    discretion_fixed: float | None  # replace the learned acceptance model by this constant
    train_alpha: float
    mode: str


def apply_variant(config: TrainerConfig, costs: CostSpec) -> VariantOverrides:
    v = config.variant
    fixed = 1.0 if v in ("TR_no_ADB", "TR_no_ADB_Cost") else None
    alpha = 0.0 if v in ("TR_no_Cost", "TR_no_ADB_Cost") else costs.alpha
    return VariantOverrides(fixed, alpha, TASK_ONLY if v == "task_only" else TEAMRULES)


@dataclass
class TrainPanel:
    """One realisation of the human on the advisor's training rows (aligned with the pool covers)."""

    y: np.ndarray
    h: np.ndarray
    c_h: np.ndarray
    p1: np.ndarray  # estimated P(y=1 | x), out-of-sample for these rows

    def __post_init__(self):
        self.y = np.asarray(self.y).astype(np.int8)
        self.h = np.asarray(self.h).astype(np.int8)
        self.c_h = np.asarray(self.c_h, dtype=float)
        self.p1 = np.asarray(self.p1, dtype=float)
        if not len(self.y) == len(self.h) == len(self.c_h) == len(self.p1) > 0:
            raise ValueError("panel arrays must be non-empty and aligned")


class AcceptanceTable:
    """Acceptance estimates for every (candidate precision, panel confidence) pair, computed once."""

    def __init__(self, discretion: DiscretionModel, pool: CandidatePool, c_h: np.ndarray):
        ch_vals, self.ch_index = np.unique(c_h, return_inverse=True)
        self.tables = {}
        self.prec_index = {}
        for label in (1, 0):
            prec = np.array([r.precision for r in pool.side(label)], dtype=float)
            vals, idx = np.unique(prec, return_inverse=True)
            self.prec_index[label] = idx
            if len(vals) == 0:
                self.tables[label] = np.zeros((0, len(ch_vals)))
                continue
            cm = np.repeat(vals, len(ch_vals))
            ch = np.tile(ch_vals, len(vals))
            self.tables[label] = discretion.predict(cm, ch).reshape(len(vals), len(ch_vals))

    def lookup(self, label: int, rule_idx: np.ndarray) -> np.ndarray:
        """Acceptance per row for the pool rule ``rule_idx`` (-1 -> 0)."""
        safe = np.maximum(rule_idx, 0)
        out = self.tables[label][self.prec_index[label][safe], self.ch_index] if len(self.prec_index[label]) \
            else np.zeros(len(rule_idx))
        return np.where(rule_idx >= 0, out, 0.0)


@dataclass
class Evaluation:
    losses: np.ndarray
    y_hat: np.ndarray
    offered: np.ndarray
    p_accept: np.ndarray
    covered: np.ndarray

    @property
    def total(self) -> float:
        return float(self.losses.sum())


class Objective:
    """Per-instance training loss of a rule set given as pool indices per side."""

    def __init__(self, pool: CandidatePool, panel: TrainPanel, costs: CostSpec, mode: str,
                 discretion: DiscretionModel | None):
        self.pool = pool
        self.panel = panel
        self.costs = costs
        self.mode = mode
        self.prec = {label: np.array([r.precision for r in pool.side(label)], dtype=float)
                     for label in (1, 0)}
        self.table = AcceptanceTable(discretion, pool, panel.c_h) if mode == TEAMRULES else None
        # the search revisits rule sets often; results depend only on the sets, not their order
        self._cache: dict = {}
        self._cache_limit = max(64, 2_000_000 // max(1, len(panel.y)))

    def _side(self, label, idx):
        cov = self.pool.side_cover(label)[:, list(idx)]
        cm, j = best_covering(cov, self.prec[label][list(idx)])
        rule = np.where(j >= 0, np.asarray(list(idx) or [0])[np.maximum(j, 0)], -1)
        return j >= 0, cm, rule

    def evaluate(self, pos, neg) -> Evaluation:
        key = (frozenset(pos), frozenset(neg))
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) >= self._cache_limit:
                self._cache.clear()
            hit = self._cache[key] = self._evaluate(pos, neg)
        return hit

    def _evaluate(self, pos, neg) -> Evaluation:
        p = self.panel
        cov_p, cm_p, rule_p = self._side(1, pos)
        if self.mode == TASK_ONLY:
            y_hat = cov_p.astype(np.int8)
            ones = np.ones(len(y_hat))
            return Evaluation(decision_loss(self.costs, p.y, y_hat), y_hat, ones.astype(bool), ones, cov_p)
        cov_n, cm_n, rule_n = self._side(0, neg)
        pa_p = self.table.lookup(1, rule_p)
        pa_n = self.table.lookup(0, rule_n)
        b = selective_advice(self.costs, p.h, p.p1, cov_p, cm_p, pa_p, cov_n, cm_n, pa_n)
        contra = (b.y_hat != p.h).astype(float)
        losses = (b.p_accept * decision_loss(self.costs, p.y, b.y_hat)
                  + (1 - b.p_accept) * decision_loss(self.costs, p.y, p.h)
                  + self.costs.alpha * contra)
        return Evaluation(losses, b.y_hat, b.offered, b.p_accept, cov_p | cov_n)


def empirical_ttl(pool: CandidatePool, panel: TrainPanel, costs: CostSpec, discretion: DiscretionModel | None,
                  positive_idx=(), negative_idx=(), mode: str = TEAMRULES) -> tuple[float, float]:
    """Summed and mean training loss of the rule set given by pool indices."""
    ev = Objective(pool, panel, costs, mode, discretion).evaluate(list(positive_idx), list(negative_idx))
    return ev.total, float(ev.losses.mean())


def error_weights(ev: Evaluation, panel: TrainPanel, costs: CostSpec, mode: str) -> np.ndarray:
    """Loss share used to pick the next instance to fix; worthwhile advising cost is not an error."""
    if mode == TASK_ONLY:
        return ev.losses
    contra = ev.y_hat != panel.h
    worth = decision_loss(costs, panel.y, 1 - panel.y) * ev.p_accept > costs.alpha
    return np.maximum(ev.losses - costs.alpha * (contra & worth), 0.0)


def sample_error_instance(weights: np.ndarray, rng: np.random.Generator) -> int:
    total = float(weights.sum())
    if not total > 0:
        raise ZeroTotalLoss("no instance carries loss")
    return int(rng.choice(len(weights), p=weights / total))


@dataclass
class Proposal:
    pos: list
    neg: list
    kind: str


def _covering(pool: CandidatePool, label: int, idx, i: int) -> list:
    cov = pool.side_cover(label)
    return [j for j in idx if cov[i, j]]


def propose(pos: list, neg: list, i: int, ev: Evaluation, panel: TrainPanel, pool: CandidatePool,
            costs: CostSpec, rng: np.random.Generator) -> Proposal:
    """One structural edit aimed at instance ``i``."""
    y = int(panel.y[i])
    wrong = ev.covered[i] and ev.y_hat[i] != y
    costly = ev.y_hat[i] != panel.h[i] and ev.p_accept[i] < costs.alpha
    sides = {1: list(pos), 0: list(neg)}
    if wrong or costly:
        label = 1 if y == 0 else 0
        hits = _covering(pool, label, sides[label], i)
        if not hits:
            label = 1 - label
            hits = _covering(pool, label, sides[label], i)
        if not hits:
            raise NoEligibleCandidate(f"no rule in the set covers instance {i}")
        victim = hits[int(rng.integers(len(hits)))]
        current = sides[label]
        if rng.random() < 0.5:
            present = set(current)
            cover = pool.side_cover(label)[i]
            fresh = [j for j in range(len(pool.side(label))) if cover[j] and j not in present]
            if fresh:
                best = max(fresh, key=lambda j: (pool.side(label)[j].precision, -j))
                current[current.index(victim)] = best
                return Proposal(sides[1], sides[0], f"replace{'+' if label else '-'}")
        current.remove(victim)
        return Proposal(sides[1], sides[0], f"cut{'+' if label else '-'}")
    present = set(sides[y])
    cover = pool.side_cover(y)[i]
    fresh = np.flatnonzero(cover)
    fresh = [int(j) for j in fresh if int(j) not in present]
    if not fresh:
        raise NoEligibleCandidate(f"no unused candidate on side {y} covers instance {i}")
    sides[y].append(fresh[int(rng.integers(len(fresh)))])
    return Proposal(sides[1], sides[0], f"add{'+' if y else '-'}")


def keep_proposal(delta: float, temp: float, u: float, rule: str = "printed") -> bool:
    """Whether a proposal with loss change ``delta`` (old minus new) survives.

    ``printed`` reverts when ``exp(delta/temp) <= u``; ``metropolis`` keeps every
    non-worsening proposal and a worsening one with probability ``exp(delta/temp)``.
    """
    if rule == "metropolis":
        return delta >= 0 or u < math.exp(delta / temp)
    return not math.exp(min(delta / temp, 700.0)) <= u


@dataclass
class TraceRow:
    t: int
    ttl_current: float
    ttl_best: float
    edit_kind: str
    accepted: bool


@dataclass
class TrainResult:
    rule_set: RuleSet
    positive_idx: list
    negative_idx: list
    best_loss: float
    empty_loss: float
    trace: list = field(default_factory=list)
    stopped_early: bool = False

    def save_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "ttl_current", "ttl_best", "edit_kind", "accepted"])
            for r in self.trace:
                w.writerow([r.t, repr(r.ttl_current), repr(r.ttl_best), r.edit_kind, int(r.accepted)])


def anneal_pool(config: TrainerConfig, pool: CandidatePool, panel: TrainPanel, costs: CostSpec,
                discretion: DiscretionModel | None) -> TrainResult:
    """Run the search with costs and acceptance model already adjusted for the variant."""
    mode = TASK_ONLY if config.variant == "task_only" else TEAMRULES
    if mode == TEAMRULES and discretion is None:
        raise ConfigError("a discretion model is required")
    obj = Objective(pool, panel, costs, mode, discretion)
    rng = np.random.default_rng(config.seed)
    pos, neg = [], []
    ev = obj.evaluate(pos, neg)
    empty = cur = best = ev.total
    best_sets = ([], [])
    trace = [TraceRow(0, cur, best, "start", True)]
    stopped = False
    for t in range(1, config.iterations + 1):
        try:
            i = sample_error_instance(error_weights(ev, panel, costs, mode), rng)
        except ZeroTotalLoss:
            if config.early_stop:
                log.info("no remaining error at iteration %d; stopping", t)
                stopped = True
                break
            trace.append(TraceRow(t, cur, best, "none", False))
            continue
        try:
            prop = propose(pos, neg, i, ev, panel, pool, costs, rng)
        except NoEligibleCandidate:
            trace.append(TraceRow(t, cur, best, "noop", False))
            continue
        new_ev = obj.evaluate(prop.pos, prop.neg)
        new = new_ev.total
        if new < best:
            best, best_sets = new, (list(prop.pos), list(prop.neg))
        u = rng.random()
        kept = keep_proposal(cur - new, config.temperature(t), u, config.acceptance_rule)
        if kept:
            pos, neg, ev, cur = prop.pos, prop.neg, new_ev, new
        trace.append(TraceRow(t, cur, best, prop.kind, kept))
    rs = RuleSet(tuple(pool.positive[j] for j in best_sets[0]),
                 tuple(pool.negative[j] for j in best_sets[1]))
    return TrainResult(rs, best_sets[0], best_sets[1], best, empty, trace, stopped)


def anneal(config: TrainerConfig, pool: CandidatePool, panel: TrainPanel, costs: CostSpec,
           discretion: DiscretionModel, outcome: ProbabilisticClassifier | None) -> tuple[Advisor, TrainResult]:
    """Train per ``config.variant`` and assemble the advisor around the best rule set found.

    The advisor keeps the variant's own acceptance model and cost for its
    inference-time value test, since those are what it was optimised for.
    """
    ov = apply_variant(config, costs)
    train_costs = CostSpec(ov.train_alpha, costs.lambda0, costs.lambda1)
    disc = DiscretionModel.constant(ov.discretion_fixed) if ov.discretion_fixed is not None else discretion
    res = anneal_pool(config, pool, panel, train_costs, disc if ov.mode == TEAMRULES else None)
    manifest = {"variant": config.variant, "seed": config.seed, "iterations": config.iterations,
                "cooling_base": config.cooling_base, "train_alpha": ov.train_alpha,
                "best_loss": res.best_loss, "empty_loss": res.empty_loss}
    if ov.mode == TASK_ONLY:
        rs = RuleSet(res.rule_set.positive, ())
        covered = pool.positive_cover[:, res.positive_idx].any(axis=1)
        neg_prec = float(np.mean(panel.y[~covered] == 0)) if (~covered).any() else float("nan")
        return Advisor(rs, None, None, train_costs, TASK_ONLY, neg_prec, manifest), res
    return Advisor(res.rule_set, disc, outcome, train_costs, TEAMRULES, None, manifest), res
