"""Command-line entry point. Every subcommand is driven by one JSON config plus a few overrides.

Exit codes: 0 ok, 2 configuration, 3 data, 4 training (rules, estimators,
simulation), 5 evaluation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import (ConfigError, DataError, EstimatorError, EvaluationError, RuleAdvisorError, RuleError,
                     SimulationError, TrainingError)

EXIT_CODES = ((ConfigError, 2), (DataError, 3), (RuleError, 4), (EstimatorError, 4), (SimulationError, 4),
              (TrainingError, 4), (EvaluationError, 5))


def _write_json(path: Path, doc):
    path.write_text(json.dumps(doc, sort_keys=True, indent=1))


def _config(args):
    from .pipeline import PipelineConfig

    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if getattr(args, "alpha", None) is not None:
        cfg.alphas = [args.alpha]
        cfg.costs = dict(cfg.costs, alpha=args.alpha)
    if getattr(args, "variant", None):
        cfg.variants = [args.variant]
    cfg.__post_init__()
    return cfg


def _out(args, cfg) -> Path:
    root = args.out or os.environ.get("RULEADVISOR_OUT") or cfg.out
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _seed(cfg) -> int:
    return int(cfg.seeds[0])


def _alpha(cfg) -> float:
    return float(cfg.costs.get("alpha", 0.0))


# -- subcommands ------------------------------------------------------------------

def cmd_prepare(args):
    from .pipeline import prepare, run_manifest

    cfg = _config(args)
    out = _out(args, cfg)
    prep = prepare(cfg)
    prep.dataset.save(out / "dataset.json")
    prep.view.save(out / "conditions.json")
    prep.difficulty_model.save(out / "difficulty_model.json")
    _write_json(out / "manifest.json", run_manifest(cfg, step="prepare", n_conditions=len(prep.view.conditions)))
    print(f"{len(prep.dataset)} rows, {len(prep.view.conditions)} conditions -> {out}")


def cmd_simulate_human(args):
    from .humansim import simulate_panel
    from .pipeline import prepare, seeded

    cfg = _config(args)
    out = _out(args, cfg)
    prep = prepare(cfg)
    rows = prep.dataset.indices(args.split)
    profile = cfg.human(_seed(cfg))
    panel = simulate_panel(profile, prep.dataset, rows, prep.difficulty[rows], seeded(_seed(cfg), 6))
    panel.save_csv(out / f"panel_{args.split}.csv")
    profile.save(out / "profile.json")
    print(f"human accuracy on {args.split}: {np.mean(panel.h == panel.y):.3f}")


def cmd_collect_interactions(args):
    from .estimators import save_interactions
    from .pipeline import build_components, prepare

    cfg = _config(args)
    out = _out(args, cfg)
    comps = build_components(cfg, prepare(cfg), _seed(cfg))
    save_interactions(comps.records, out / "interactions.csv")
    print(f"{len(comps.records)} contradiction events -> {out / 'interactions.csv'}")


def cmd_fit_discretion(args):
    from .estimators import fit_discretion, load_interactions

    cfg = _config(args)
    out = _out(args, cfg)
    src = Path(args.interactions) if args.interactions else out / "interactions.csv"
    if not src.exists():
        raise ConfigError(f"interaction log not found: {src} (run collect-interactions first)")
    model = fit_discretion(load_interactions(src), seed=_seed(cfg))
    model.save(out / "discretion.json")
    print(f"held-out AUC {model.heldout_auc}")


def cmd_train(args):
    from .pipeline import build_components, prepare, train

    cfg = _config(args)
    out = _out(args, cfg)
    variant = cfg.variants[0]
    comps = build_components(cfg, prepare(cfg), _seed(cfg))
    advisor, res = train(cfg, comps, variant, _alpha(cfg))
    bundle = out / "advisor"
    advisor.save(bundle)
    res.save_trace(out / "trace.csv")
    print(advisor.rule_set.describe())
    print(f"train loss {res.best_loss:.4f} (human alone {res.empty_loss:.4f}) -> {bundle}")


def cmd_evaluate(args):
    from .advisor import Advisor
    from .pipeline import build_components, evaluate_advisor, prepare

    cfg = _config(args)
    out = _out(args, cfg)
    bundle = Path(args.bundle) if args.bundle else out / "advisor"
    if not (bundle / "manifest.json").exists():
        raise ConfigError(f"no advisor bundle at {bundle}")
    advisor = Advisor.load(bundle)
    comps = build_components(cfg, prepare(cfg), _seed(cfg))
    rep, deployed = evaluate_advisor(cfg, comps, advisor, _alpha(cfg))
    rep.save_json(out / "report.json")
    rep.save_csv(out / "report.csv")
    print(f"value added {rep.value_added:.4f} +- {rep.se['all']['value_added']:.4f}"
          f" (deployed: {deployed})")


def cmd_sweep(args):
    from .pipeline import run_sweep

    cfg = _config(args)
    if args.seed is None and args.seeds:
        cfg.seeds = list(range(args.seeds))
    out = _out(args, cfg)
    workers = args.workers or int(os.environ.get("RULEADVISOR_WORKERS", "1"))
    res = run_sweep(cfg, workers=workers)
    res.save(out)
    for r in res.curve():
        print(f"alpha={r['alpha']:<5g} {r['variant']:<15} value_added={r['value_added']:+.4f} se={r['se']:.4f}")


STRATEGY_METRICS = ("value_added", "accuracy_improvement", "advising_costs_au", "advising_rate",
                    "advising_accuracy", "advising_confidence_mean", "acceptance_rate", "errors_avoided_pct")


def cmd_case_study(args):
    from .pipeline import PipelineConfig, build_components, evaluate_advisor, prepare, train
    from .presets import case_study

    study = case_study(args.name)
    base = _config(args)
    doc = base.to_dict()
    doc.update(dataset=study.dataset, profile={"preset": "case_study", "name": study.name},
               costs=study.costs.to_dict(), variants=list(study.variants),
               groups={g: [c.to_dict() for c in conds] for g, conds in study.groups.items()})
    if not args.config:
        doc["repetitions"] = study.repetitions
    cfg = PipelineConfig.from_dict(doc)
    out = _out(args, cfg)
    comps = build_components(cfg, prepare(cfg), _seed(cfg))
    with open(out / "case_study.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "group", "metric", "mean", "se"])
        for variant in cfg.variants:
            advisor, _ = train(cfg, comps, variant, study.costs.alpha)
            rep, _ = evaluate_advisor(cfg, comps, advisor, study.costs.alpha, gate=False)
            rep.save_json(out / f"report_{variant}.json")
            for g, m, v, s in rep.rows():
                if m in STRATEGY_METRICS:
                    w.writerow([variant, g, m, "" if v is None else repr(v), "" if s is None else repr(s)])
            print(f"{variant:<10} value added {rep.value_added:+.4f}")


def cmd_degrade_adb(args):
    from .evaluation import degradation_table, degrade_adb
    from .pipeline import build_components, evaluate_advisor, prepare, seeded, train

    cfg = _config(args)
    out = _out(args, cfg)
    levels = [float(x) for x in args.levels.split(",")]
    comps = build_components(cfg, prepare(cfg), _seed(cfg))
    alpha = _alpha(cfg)
    advisor, _ = train(cfg, comps, "TR", alpha)
    table = degradation_table(comps.discretion, comps.profile, levels, comps.records, seeded(_seed(cfg), 7))
    for row, prof in zip(table, degrade_adb(comps.profile, levels)):
        rep, deployed = evaluate_advisor(cfg, comps, advisor, alpha, profile=prof)
        row.update(value_added=rep.value_added, se=rep.se["all"]["value_added"], deployed=deployed)
    with open(out / "degradation.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["noise_level", "auc", "value_added", "se", "deployed"])
        w.writeheader()
        w.writerows(table)
    for row in table:
        print(f"noise={row['noise_level']:<4g} auc={row['auc']:.3f} value_added={row['value_added']:+.4f}")


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .trainer import VARIANTS

    p = argparse.ArgumentParser(prog="ruleadvisor", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="pipeline config JSON (defaults: bundled heart data)")
        sp.add_argument("--seed", type=int, help="seed override")
        sp.add_argument("--out", help="output directory (env RULEADVISOR_OUT)")
        sp.set_defaults(func=func)
        return sp

    add("prepare", cmd_prepare, "load, split and binarise the dataset")
    sp = add("simulate-human", cmd_simulate_human, "draw the simulated human on one split")
    sp.add_argument("--split", default="train", choices=["train", "val", "test"])
    add("collect-interactions", cmd_collect_interactions, "log human reactions to a bootstrap advisor")
    sp = add("fit-discretion", cmd_fit_discretion, "fit the acceptance model from an interaction log")
    sp.add_argument("--interactions", help="interaction CSV (default OUT/interactions.csv)")
    for name, func, help_ in (("train", cmd_train, "train one advisor"),
                              ("evaluate", cmd_evaluate, "evaluate an advisor bundle on the test split")):
        sp = add(name, func, help_)
        sp.add_argument("--variant", choices=VARIANTS)
        sp.add_argument("--alpha", type=float)
        if name == "evaluate":
            sp.add_argument("--bundle", help="advisor directory (default OUT/advisor)")
    sp = add("sweep", cmd_sweep, "train and evaluate over the alpha grid and variants")
    sp.add_argument("--variant", choices=VARIANTS)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    sp.add_argument("--workers", type=int, help="parallel processes (env RULEADVISOR_WORKERS)")
    sp = add("case-study", cmd_case_study, "reproduce a case-study table")
    sp.add_argument("name", choices=["doctor_a", "doctor_b", "asymmetric"])
    sp = add("degrade-adb", cmd_degrade_adb, "pair a trained advisor with increasingly noisy humans")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--levels", default="0,0.25,0.5,0.75,1", help="comma-separated noise levels")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except RuleAdvisorError as exc:
        code = next((c for cls, c in EXIT_CODES if isinstance(exc, cls)), 1)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: DataError: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
