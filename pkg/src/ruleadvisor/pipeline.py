"""End-to-end experiment plumbing: config, component fitting, training, evaluation, sweeps."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .advisor import Advisor, CostSpec
from .data import BinarizedView, Condition, Dataset, binarize, load_csv, split
from .errors import ConfigError
from .estimators import (DEFAULT_OUTCOME_GRID, DiscretionModel, ProbabilisticClassifier,
                         collect_interactions, fit_discretion, fit_logistic, fit_outcome_model,
                         out_of_fold_proba)
from .evaluation import MetricsReport, evaluate, robustness_gate
from .humansim import HumanProfile, difficulty_proxy, simulate_panel
from .presets import benchmark_profile, case_study
from .rules import CandidatePool, mine_candidates
from .surrogates import LABEL_COLUMN, SPLIT_COUNTS, bundled_path
from .trainer import VARIANTS, TrainerConfig, TrainPanel, TrainResult, anneal

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass
class PipelineConfig:
    """Everything a run depends on; serialisable to a single JSON file.

    ``profile`` is either a full profile document or a preset reference:
    ``{"preset": "benchmark", "decision": ..., "confidence": ...}`` or
    ``{"preset": "case_study", "name": "doctor_a"}``.
    """

    dataset: str = "heart"
    label_column: str | None = None
    split_counts: list | None = None
    split_seed: int = 0
    profile: dict = field(default_factory=lambda: {"preset": "benchmark"})
    costs: dict = field(default_factory=lambda: {"alpha": 0.0, "lambda0": 1.0, "lambda1": 1.0})
    trainer: dict = field(default_factory=dict)
    variants: list = field(default_factory=lambda: ["TR"])
    alphas: list = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    seeds: list = field(default_factory=lambda: [0])
    repetitions: int = 50
    gate: bool = False
    groups: dict = field(default_factory=dict)   # name -> list of condition dicts
    interaction_fraction: float = 0.5
    interaction_rounds: int = 1
    bins_per_numeric: int = 5
    forest_size: int = 100
    outcome_grid: dict | None = None
    cv_folds: int = 5
    out: str = "runs"

    def __post_init__(self):
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; expected one of {VARIANTS}")
        if not 0 < self.interaction_fraction < 1:
            raise ConfigError("interaction_fraction must lie in (0, 1)")
        if self.repetitions < 1 or self.interaction_rounds < 1:
            raise ConfigError("repetitions and interaction_rounds must be >= 1")
        self.trainer_config()  # validate early
        self.cost_spec()

    # -- typed views ---------------------------------------------------------

    def cost_spec(self, alpha: float | None = None) -> CostSpec:
        doc = dict(self.costs)
        if alpha is not None:
            doc["alpha"] = alpha
        try:
            return CostSpec(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad costs: {exc}") from exc

    def trainer_config(self, variant: str = "TR", seed: int = 0) -> TrainerConfig:
        doc = dict(self.trainer)
        doc.update(variant=variant, seed=seed)
        try:
            return TrainerConfig(**doc)
        except TypeError as exc:
            raise ConfigError(f"bad trainer section: {exc}") from exc

    def human(self, seed: int = 0) -> HumanProfile:
        doc = dict(self.profile)
        kind = doc.pop("preset", None)
        if kind == "benchmark":
            return benchmark_profile(self.dataset_name, doc.get("decision", "difficulty_biased"),
                                     doc.get("confidence", "accuracy_biased"), seed)
        if kind == "case_study":
            return case_study(doc["name"], seed).profile
        try:
            prof = HumanProfile.from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad profile section: {exc}") from exc
        return HumanProfile(prof.decision, prof.confidence, prof.adb, seed, prof.name)

    def group_conditions(self) -> dict:
        return {g: tuple(Condition.from_dict(c) for c in conds) for g, conds in self.groups.items()}

    @property
    def dataset_name(self) -> str:
        return self.dataset if self.dataset in SPLIT_COUNTS else Path(self.dataset).stem

    # -- io ------------------------------------------------------------------

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def run_manifest(cfg: PipelineConfig, **extra) -> dict:
    """Provenance for output directories; contains no timestamps so reruns are byte-identical."""
    doc = {"config_hash": cfg.digest(), "seeds": list(cfg.seeds), "package_version": __version__,
           "artifact_format": 1}
    doc.update(extra)
    return doc


# -- stage 1: data ---------------------------------------------------------------

@dataclass
class Prepared:
    dataset: Dataset
    view: BinarizedView
    difficulty: np.ndarray       # per dataset row
    difficulty_model: ProbabilisticClassifier


def load_dataset(cfg: PipelineConfig) -> Dataset:
    if cfg.dataset in SPLIT_COUNTS:
        path = bundled_path(cfg.dataset)
        label = cfg.label_column or LABEL_COLUMN[cfg.dataset]
        counts = cfg.split_counts or SPLIT_COUNTS[cfg.dataset]
    else:
        path = Path(cfg.dataset)
        if cfg.label_column is None or cfg.split_counts is None:
            raise ConfigError("a CSV dataset needs label_column and split_counts")
        label, counts = cfg.label_column, cfg.split_counts
    ds = load_csv(path, label)
    return split(ds, counts, cfg.split_seed)


def prepare(cfg: PipelineConfig) -> Prepared:
    """Load, split, binarise, and fit the linear model behind the difficulty proxy."""
    ds = load_dataset(cfg)
    view = binarize(ds, cfg.bins_per_numeric)
    model = fit_logistic(ds, ds.indices("train"))
    diff = difficulty_proxy(model.predict_proba(ds))
    return Prepared(ds, view, diff, model)


# -- stage 2: per-seed components ---------------------------------------------------

@dataclass
class Components:
    prepared: Prepared
    profile: HumanProfile
    interaction_rows: np.ndarray
    advisor_rows: np.ndarray
    records: list
    discretion: DiscretionModel
    outcome: ProbabilisticClassifier
    panel: TrainPanel
    pool: CandidatePool
    seed: int


def seeded(seed: int, *stream) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, stream)])


def build_components(cfg: PipelineConfig, prepared: Prepared, seed: int) -> Components:
    """Everything the trainer needs for one seed; independent of alpha and variant."""
    ds = prepared.dataset
    profile = cfg.human(seed)
    train = ds.indices("train")
    perm = seeded(seed, 1).permutation(train)
    n_int = int(round(cfg.interaction_fraction * len(train)))
    rows_a, rows_b = np.sort(perm[:n_int]), np.sort(perm[n_int:])

    # the bootstrap advisor is fit on rows the interactions never touch
    bootstrap = fit_logistic(ds, rows_b)
    rng = seeded(seed, 2)
    records = []
    for _ in range(cfg.interaction_rounds):
        records += collect_interactions(profile, bootstrap, ds, rows_a, prepared.difficulty[rows_a], rng)
    discretion = fit_discretion(records, seed=seed)

    grid = cfg.outcome_grid or DEFAULT_OUTCOME_GRID
    outcome = fit_outcome_model(ds, rows_b, cfg.cv_folds, grid, seed)
    p1 = out_of_fold_proba(ds, rows_b, outcome.metadata["chosen"], cfg.cv_folds, seed)
    panel = simulate_panel(profile, ds, rows_b, prepared.difficulty[rows_b], seeded(seed, 3))
    train_panel = TrainPanel(panel.y, panel.h, panel.c_h, p1)

    tc = cfg.trainer_config(seed=seed)
    view_rows = rows_b
    pool = mine_candidates(prepared.view, ds.labels[view_rows], view_rows, tc.max_rule_len,
                           tc.min_support, cfg.forest_size, seed)
    return Components(prepared, profile, rows_a, rows_b, records, discretion, outcome, train_panel, pool, seed)


# -- stage 3: train and evaluate ---------------------------------------------------------

def train(cfg: PipelineConfig, comps: Components, variant: str, alpha: float) -> tuple[Advisor, TrainResult]:
    tc = cfg.trainer_config(variant, comps.seed)
    advisor, res = anneal(tc, comps.pool, comps.panel, cfg.cost_spec(alpha), comps.discretion, comps.outcome)
    advisor.manifest.update(run_manifest(cfg, alpha=alpha, dataset=cfg.dataset_name))
    return advisor, res


@dataclass
class PointResult:
    alpha: float
    variant: str
    seed: int
    report: MetricsReport
    deployed: bool
    train_loss: float
    train_empty_loss: float
    advisor: Advisor | None = None
    result: TrainResult | None = None

    def summary(self) -> dict:
        return {"alpha": self.alpha, "variant": self.variant, "seed": self.seed,
                "value_added": self.report.value_added, "se": self.report.se["all"]["value_added"],
                "advising_rate": self.report.advising_rate, "deployed": self.deployed,
                "train_loss": self.train_loss, "train_empty_loss": self.train_empty_loss}


def evaluate_advisor(cfg: PipelineConfig, comps: Components, advisor: Advisor | None, alpha: float,
                     profile: HumanProfile | None = None, gate: bool | None = None) -> tuple[MetricsReport, bool]:
    """Test-split report under the true cost; common random numbers across variants of one seed."""
    prep = comps.prepared
    ds = prep.dataset
    profile = comps.profile if profile is None else profile
    costs = cfg.cost_spec(alpha)
    deployed = advisor is not None
    if (cfg.gate if gate is None else gate) and advisor is not None:
        val = ds.indices("val")
        dec = robustness_gate(advisor, ds, val, prep.difficulty[val], profile, costs,
                              cfg.repetitions, seeded(comps.seed, 4))
        deployed = dec.deploy
    test = ds.indices("test")
    rep = evaluate(advisor if deployed else None, ds, test, prep.difficulty[test], profile, costs,
                   cfg.repetitions, seeded(comps.seed, 5), cfg.group_conditions())
    return rep, deployed


def run_point(cfg: PipelineConfig, comps: Components, variant: str, alpha: float, keep=False) -> PointResult:
    advisor, res = train(cfg, comps, variant, alpha)
    rep, deployed = evaluate_advisor(cfg, comps, advisor, alpha)
    return PointResult(alpha, variant, comps.seed, rep, deployed, res.best_loss, res.empty_loss,
                       advisor if keep else None, res if keep else None)


def run_seed(cfg: PipelineConfig, seed: int, alphas, variants, prepared: Prepared | None = None) -> list[PointResult]:
    prepared = prepare(cfg) if prepared is None else prepared
    comps = build_components(cfg, prepared, seed)
    return [run_point(cfg, comps, v, a) for a in alphas for v in variants]


def _run_seed_task(args):
    cfg_doc, seed, alphas, variants = args
    return run_seed(PipelineConfig.from_dict(cfg_doc), seed, alphas, variants)


@dataclass
class SweepResult:
    alphas: list
    variants: list
    seeds: list
    points: list   # PointResult, ordered by (seed, alpha, variant)

    def curve(self) -> list[dict]:
        """Mean value added and its SE across seeds, per (alpha, variant)."""
        rows = []
        for a in self.alphas:
            for v in self.variants:
                vals = np.array([p.report.value_added for p in self.points if p.alpha == a and p.variant == v])
                se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else \
                    float(next(p.report.se["all"]["value_added"] for p in self.points
                               if p.alpha == a and p.variant == v))
                rows.append({"alpha": a, "variant": v, "value_added": float(vals.mean()), "se": se})
        return rows

    def save(self, directory):
        import csv

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "variant", "value_added", "se"])
            for r in self.curve():
                w.writerow([repr(r["alpha"]), r["variant"], repr(r["value_added"]), repr(r["se"])])
        with open(d / "points.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            cols = ["alpha", "variant", "seed", "value_added", "se", "advising_rate", "deployed",
                    "train_loss", "train_empty_loss"]
            w.writerow(cols)
            for p in self.points:
                s = p.summary()
                w.writerow([repr(s[c]) if isinstance(s[c], float) else s[c] for c in cols])


def run_sweep(cfg: PipelineConfig, alphas=None, variants=None, seeds=None, workers: int = 1) -> SweepResult:
    """One advisor per (seed, alpha, variant); seeds run in parallel when ``workers > 1``."""
    alphas = list(cfg.alphas if alphas is None else alphas)
    variants = list(cfg.variants if variants is None else variants)
    seeds = list(cfg.seeds if seeds is None else seeds)
    if not alphas:
        raise ConfigError("alpha grid is empty")
    if workers > 1 and len(seeds) > 1:
        tasks = [(cfg.to_dict(), s, alphas, variants) for s in seeds]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            per_seed = list(ex.map(_run_seed_task, tasks))
    else:
        prepared = prepare(cfg)
        per_seed = [run_seed(cfg, s, alphas, variants, prepared) for s in seeds]
    points = [p for chunk in per_seed for p in chunk]
    return SweepResult(alphas, variants, seeds, points)
