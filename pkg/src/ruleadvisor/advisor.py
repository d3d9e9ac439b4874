"""Inference: selective advising with rule confidence, the value test, and expected team loss."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, Instance
from .errors import NoCoveringRule
from .estimators import DiscretionModel, ProbabilisticClassifier
from .rules import RuleSet

TEAMRULES = "teamrules"
TASK_ONLY = "task_only"


@dataclass(frozen=True)
class CostSpec:
    """Advising cost per contradiction and the two error losses (false positive, false negative)."""

    alpha: float = 0.0
    lambda0: float = 1.0
    lambda1: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.lambda0 <= 0 or self.lambda1 <= 0:
            raise ValueError(f"invalid costs {self}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


def decision_loss(costs: CostSpec, y, d):
    """0 when the decision is right, ``lambda0`` for a false positive, ``lambda1`` for a false negative."""
    y = np.asarray(y)
    d = np.asarray(d)
    out = np.where(y != d, np.where(y == 1, costs.lambda1, costs.lambda0), 0.0)
    return out if out.ndim else float(out)


def expected_team_loss(costs: CostSpec, y, y_hat, h, p_accept):
    """Loss of advising ``y_hat`` to a human who decided ``h``, averaged over acceptance."""
    p_accept = np.asarray(p_accept, dtype=float)
    contra = np.asarray(y_hat) != np.asarray(h)
    mixed = (p_accept * decision_loss(costs, y, y_hat)
             + (1.0 - p_accept) * decision_loss(costs, y, h)
             + costs.alpha)
    # no contradiction: exactly the human's own loss, with no rounding from the mixture
    out = np.where(contra, mixed, decision_loss(costs, y, h))
    return out if np.ndim(out) else float(out)


def loss_over_outcomes(costs: CostSpec, p1, y_hat, h, p_accept):
    """Expected team loss with the true label replaced by its estimated distribution ``P(y=1) = p1``."""
    p1 = np.asarray(p1, dtype=float)
    return (p1 * expected_team_loss(costs, 1, y_hat, h, p_accept)
            + (1.0 - p1) * expected_team_loss(costs, 0, y_hat, h, p_accept))


def psi(costs: CostSpec, p1, y_star, h, p_accept):
    """True where advising ``y_star`` has strictly lower expected loss than withholding."""
    advise = loss_over_outcomes(costs, p1, y_star, h, p_accept)
    withhold = loss_over_outcomes(costs, p1, h, h, p_accept)
    out = np.asarray(advise < withhold)
    return out if out.ndim else bool(out)


def best_covering(cover: np.ndarray, precisions: np.ndarray):
    """Per row: highest precision among covering rules and its rule index (-1 if uncovered)."""
    n = cover.shape[0]
    if cover.shape[1] == 0:
        return np.zeros(n), np.full(n, -1)
    scored = np.where(cover, precisions[None, :], -1.0)
    idx = np.argmax(scored, axis=1)
    best = scored[np.arange(n), idx]
    covered = best >= 0
    return np.where(covered, best, 0.0), np.where(covered, idx, -1)


@dataclass
class AdviceBatch:
    """Advice for many rows. ``y_hat`` equals ``h`` wherever advice is withheld."""

    y_hat: np.ndarray
    offered: np.ndarray
    c_m: np.ndarray        # NaN where not offered
    p_accept: np.ndarray   # estimated acceptance; 0 where not offered
    side: np.ndarray       # 1 / 0 for the rule side used, -1 when withheld
    rule_index: np.ndarray  # index within that side, -1 when withheld


def selective_advice(costs: CostSpec, h, p1, cov_pos, cm_pos, pa_pos, cov_neg, cm_neg, pa_neg) -> AdviceBatch:
    """Three-branch advising rule on precomputed per-row quantities.

    ``cov_*`` says whether a side covers the row, ``cm_*`` is that side's
    best rule precision and ``pa_*`` the estimated acceptance of advice from
    that side. The positive side wins when both sides cover.
    """
    h = np.asarray(h)
    give1 = cov_pos & psi(costs, p1, np.ones_like(h), h, pa_pos)
    give0 = cov_neg & ~cov_pos & psi(costs, p1, np.zeros_like(h), h, pa_neg)
    offered = give1 | give0
    y_hat = np.where(give1, 1, np.where(give0, 0, h)).astype(np.int8)
    c_m = np.where(give1, cm_pos, np.where(give0, cm_neg, np.nan))
    p_accept = np.where(give1, pa_pos, np.where(give0, pa_neg, 0.0))
    side = np.where(give1, 1, np.where(give0, 0, -1))
    return AdviceBatch(y_hat, offered, c_m, p_accept, side, side * 0 - 1)


@dataclass(frozen=True)
class Advice:
    offered: bool
    recommendation: int | None = None
    confidence: float | None = None
    rule_id: str | None = None


@dataclass
class Advisor:
    """Deployable advisor: rule set plus the models its advising rule consults."""

    rule_set: RuleSet
    discretion: DiscretionModel | None
    outcome: ProbabilisticClassifier | None
    costs: CostSpec
    mode: str = TEAMRULES
    negative_precision: float | None = None
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in (TEAMRULES, TASK_ONLY):
            raise ValueError(f"unknown advisor mode {self.mode!r}")
        if self.mode == TEAMRULES and self.discretion is None:
            raise ValueError("selective advising needs a discretion model")

    def _side_stats(self, dataset: Dataset, rows, label):
        rules = self.rule_set.side(label)
        cover = self.rule_set.cover_matrix(dataset, label, rows)
        prec = np.array([r.precision for r in rules], dtype=float)
        cm, idx = best_covering(cover, prec)
        return cover.any(axis=1), cm, idx

    def advise_rows(self, dataset: Dataset, rows, h, c_h, p1=None) -> AdviceBatch:
        """Advice for ``rows`` of ``dataset`` given the human's decisions and confidences."""
        rows = np.arange(len(dataset)) if rows is None else np.asarray(rows)
        h = np.asarray(h).astype(np.int8)
        cov_p, cm_p, idx_p = self._side_stats(dataset, rows, 1)
        if self.mode == TASK_ONLY:
            y_hat = cov_p.astype(np.int8)
            c_m = np.where(cov_p, cm_p, self.negative_precision if self.negative_precision is not None else np.nan)
            return AdviceBatch(y_hat, np.ones(len(rows), dtype=bool), c_m, np.ones(len(rows)),
                               np.where(cov_p, 1, 0), np.where(cov_p, idx_p, -1))
        cov_n, cm_n, idx_n = self._side_stats(dataset, rows, 0)
        if p1 is None and not (cov_p | cov_n).any():
            p1 = np.zeros(len(rows))   # nothing covered, nothing to score
        if p1 is None:
            if self.outcome is None:
                raise ValueError("no outcome model: pass outcome probabilities explicitly")
            p1 = self.outcome.predict_proba(dataset, rows)
        c_h = np.asarray(c_h, dtype=float)
        pa_p = np.where(cov_p, self.discretion.predict(np.where(cov_p, cm_p, 0.5), c_h), 0.0)
        pa_n = np.where(cov_n, self.discretion.predict(np.where(cov_n, cm_n, 0.5), c_h), 0.0)
        batch = selective_advice(self.costs, h, p1, cov_p, cm_p, pa_p, cov_n, cm_n, pa_n)
        batch.rule_index = np.where(batch.side == 1, idx_p, np.where(batch.side == 0, idx_n, -1))
        return batch

    def advise(self, instance, h: int, c_h: float) -> Advice:
        """Advice for a single instance (an :class:`Instance` or a feature mapping)."""
        features = getattr(instance, "features", instance)
        ds = _single(features, self)
        if self.mode == TASK_ONLY:
            return advise_task_only(self, instance)
        b = self.advise_rows(ds, np.array([0]), np.array([h]), np.array([c_h]))
        if not b.offered[0]:
            return Advice(False)
        side = int(b.side[0])
        return Advice(True, int(b.y_hat[0]), float(b.c_m[0]), f"{'+' if side == 1 else '-'}{int(b.rule_index[0])}")

    # -- persistence -------------------------------------------------------

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.rule_set.save(d / "ruleset.json")
        (d / "costs.json").write_text(json.dumps(self.costs.to_dict(), sort_keys=True, indent=1))
        if self.discretion is not None:
            self.discretion.save(d / "discretion.json")
        if self.outcome is not None:
            self.outcome.save(d / "outcome.json")
        manifest = dict(self.manifest)
        manifest.update({"mode": self.mode, "negative_precision": self.negative_precision})
        (d / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))

    @classmethod
    def load(cls, directory) -> "Advisor":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        disc = DiscretionModel.load(d / "discretion.json") if (d / "discretion.json").exists() else None
        outc = ProbabilisticClassifier.load(d / "outcome.json") if (d / "outcome.json").exists() else None
        costs = CostSpec.from_dict(json.loads((d / "costs.json").read_text()))
        return cls(RuleSet.load(d / "ruleset.json"), disc, outc, costs, manifest["mode"],
                   manifest.get("negative_precision"), manifest)


def _single(features, advisor: Advisor) -> Dataset:
    from .data import CATEGORICAL, NUMERIC, FeatureSpec
    schema = []
    for name, value in features.items():
        kind = CATEGORICAL if isinstance(value, str) else NUMERIC
        schema.append(FeatureSpec(name, kind))
    return Dataset((Instance(dict(features), 0),), tuple(schema))


def rule_confidence(rule_set: RuleSet, instance, y_hat: int) -> tuple[float, int]:
    """Highest train precision among rules on side ``y_hat`` covering ``instance``, and its index."""
    features = getattr(instance, "features", instance)
    best, arg = -1.0, -1
    for j, rule in enumerate(rule_set.side(y_hat)):
        if rule.covers(features) and rule.precision > best:
            best, arg = rule.precision, j
    if arg < 0:
        raise NoCoveringRule(f"no rule on side {y_hat} covers the instance")
    return best, arg


def negative_prediction_precision(rule_set: RuleSet, dataset: Dataset, rows) -> float:
    """Share of label-0 rows among the rows the positive side leaves uncovered."""
    rows = np.asarray(rows)
    covered = rule_set.cover_matrix(dataset, 1, rows).any(axis=1)
    if covered.all():
        return float("nan")
    return float(np.mean(dataset.labels[rows][~covered] == 0))


def advise_task_only(advisor: Advisor, instance) -> Advice:
    """Full-coverage advice: 1 when a positive rule covers, else 0."""
    features = getattr(instance, "features", instance)
    if any(r.covers(features) for r in advisor.rule_set.positive):
        conf, j = rule_confidence(advisor.rule_set, instance, 1)
        return Advice(True, 1, conf, f"+{j}")
    return Advice(True, 0, advisor.negative_precision, "default")
