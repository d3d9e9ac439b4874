"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary that is printed at the end
of the pytest run. The heavy ones (the ten-seed Heart sweep, training on
every dataset) take several minutes on one core; set RULEADVISOR_WORKERS
to parallelise the sweep.
"""

import math
import os
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ruleadvisor.advisor import CostSpec, expected_team_loss, loss_over_outcomes, psi
from ruleadvisor.estimators import DiscretionModel, discretion_auc
from ruleadvisor.evaluation import with_alpha
from ruleadvisor.humansim import ADBParams, acceptance_probability, sample_acceptance, simulate_panel
from ruleadvisor.pipeline import DEFAULT_ALPHAS, PipelineConfig, build_components, evaluate_advisor, prepare, \
    run_sweep, seeded, train
from ruleadvisor.presets import GENDER_GROUPS, benchmark_profile
from ruleadvisor.trainer import VARIANTS, TrainerConfig, anneal, anneal_pool

sys.path.insert(0, os.path.dirname(__file__))
from toy import exhaustive_optimum, oracle_total, random_toy  # noqa: E402

TEAM_VARIANTS = ("TR", "TR_no_ADB", "TR_no_Cost", "TR_no_ADB_Cost")
WORKERS = int(os.environ.get("RULEADVISOR_WORKERS", "1"))


def record(n, ok, detail):
    ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


@pytest.fixture(scope="module")
def heart():
    cfg = PipelineConfig(dataset="heart")
    return cfg, build_components(cfg, prepare(cfg), 0)


@pytest.fixture(scope="module")
def heart_sweep():
    groups = {g: [c.to_dict() for c in conds] for g, conds in GENDER_GROUPS["heart"].items()}
    cfg = PipelineConfig(dataset="heart", variants=list(VARIANTS), alphas=[0.1, 0.2, 0.3, 0.4, 0.5],
                         seeds=list(range(10)), groups=groups)
    return run_sweep(cfg, workers=WORKERS)


# -- 1 ---------------------------------------------------------------------------------

def test_loss_identities_on_every_report(heart_sweep):
    worst, checked = 0.0, 0
    for point in heart_sweep.points:
        for group, vals in point.report.groups.items():
            worst = max(worst, abs(vals["ttl"] - (vals["tdl"] + vals["al"])),
                        abs(vals["value_added"] - (vals["hdl"] - vals["ttl"])))
            checked += 1
    ok = worst <= 1e-12
    record(1, ok, f"{checked} report groups, max identity residual {worst:.1e}")
    assert ok


# -- 2 ---------------------------------------------------------------------------------

def _brute_loss(l0, l1, alpha, y, y_hat, h, pa):
    def v(y, d):
        return 0.0 if y == d else (l1 if y == 1 else l0)
    return pa * v(y, y_hat) + (1 - pa) * v(y, h) + (alpha if y_hat != h else 0.0)


def test_value_test_matches_enumeration():
    rng = np.random.default_rng(2024)
    mismatches, worst = 0, 0.0
    for _ in range(1000):
        l0, l1 = rng.choice([0.5, 1.0, 2.0, 3.0], 2)
        alpha = float(rng.choice([0.0, rng.uniform(0, 1)]))
        p1, pa = rng.random(), float(rng.choice([0.0, 1.0, rng.random()]))
        y, y_star, h = (int(v) for v in rng.integers(0, 2, 3))
        costs = CostSpec(alpha, l0, l1)
        worst = max(worst, abs(expected_team_loss(costs, y, y_star, h, pa) - _brute_loss(l0, l1, alpha, y, y_star,
                                                                                        h, pa)))
        advise = sum(w * _brute_loss(l0, l1, alpha, yy, y_star, h, pa) for yy, w in ((1, p1), (0, 1 - p1)))
        keep = sum(w * _brute_loss(l0, l1, alpha, yy, h, h, pa) for yy, w in ((1, p1), (0, 1 - p1)))
        worst = max(worst, abs(loss_over_outcomes(costs, p1, y_star, h, pa) - advise))
        mismatches += psi(costs, p1, y_star, h, pa) != (advise < keep)
    ok = mismatches == 0 and worst <= 1e-12
    record(2, ok, f"1000 random inputs, {mismatches} value-test mismatches, max loss residual {worst:.1e}")
    assert ok


# -- 3 ---------------------------------------------------------------------------------

def test_training_never_worse_than_human_alone():
    violations, runs, lines = 0, 0, []
    heart_time = 0.0
    for name in ("heart", "hr", "fico"):
        cfg = PipelineConfig(dataset=name)
        comps = build_components(cfg, prepare(cfg), 0)
        for alpha in DEFAULT_ALPHAS:
            for variant in TEAM_VARIANTS:
                t = time.perf_counter()
                _, res = train(cfg, comps, variant, alpha)
                if name == "heart":
                    heart_time = max(heart_time, time.perf_counter() - t)
                runs += 1
                if res.best_loss > res.empty_loss:
                    violations += 1
                    lines.append(f"{name} {variant} alpha={alpha}: {res.best_loss} > {res.empty_loss}")
    ok = violations == 0 and heart_time < 60
    record(3, ok, f"{runs} advisors on 3 datasets, {violations} with train TTL above human alone; "
                  f"slowest Heart advisor {heart_time:.1f}s")
    assert ok, lines


# -- 4 ---------------------------------------------------------------------------------

def test_annealing_reaches_exhaustive_optimum():
    t = time.perf_counter()
    hits = worse = 0
    for s in range(50):
        toy = random_toy(1000 + s)
        costs = CostSpec((0.0, 0.1, 0.3)[s % 3], 1.0, (1.0, 3.0)[s % 2])
        res = anneal_pool(TrainerConfig(seed=s), toy.pool, toy.panel, costs, toy.discretion)
        found = oracle_total(toy, costs, res.positive_idx, res.negative_idx)
        hits += abs(found - exhaustive_optimum(toy, costs)) <= 1e-9
        worse += found > oracle_total(toy, costs, [], []) + 1e-12
    elapsed = time.perf_counter() - t
    ok = hits >= 45 and worse == 0
    record(4, ok, f"optimum reached in {hits}/50 runs, {worse} worse than empty set ({elapsed:.1f}s)")
    assert ok


# -- 5 ---------------------------------------------------------------------------------

def test_simulator_statistics():
    n = 10_000
    lines, ok = [], True
    for name in ("heart", "fico", "hr"):
        cfg = PipelineConfig(dataset=name)
        prep = prepare(cfg)
        rng = np.random.default_rng(5)
        rows = rng.integers(len(prep.dataset), size=n)
        panel = simulate_panel(benchmark_profile(name), prep.dataset, rows, prep.difficulty[rows], rng)
        acc = float(np.mean(panel.h == panel.y))
        sigma = math.sqrt(acc * (1 - acc) / n)
        good = 0.70 - 3 * sigma <= acc <= 0.80 + 3 * sigma
        ok &= good
        lines.append(f"{name} acc={acc:.3f}")
    rng = np.random.default_rng(6)
    worst = 0.0
    for adb in (ADBParams(), ADBParams(accept_boost=1.5, accept_damp=0.5)):
        for c_m in (0.55, 0.7, 0.9):
            for c_h in (0.2, 0.6, 0.95):
                for advice, human in ((1, 0), (0, 1)):
                    p = acceptance_probability(adb, c_m, c_h, advice, human)
                    draws = sample_acceptance(adb, np.full(n, c_m), np.full(n, c_h), np.full(n, advice),
                                              np.full(n, human), rng)
                    worst = max(worst, abs(draws.mean() - p))
    ok &= worst <= 0.015
    record(5, ok, f"{', '.join(lines)}; acceptance Monte Carlo max gap {worst:.4f}")
    assert ok


# -- 6 ---------------------------------------------------------------------------------

def test_discretion_model_quality(heart):
    _, comps = heart
    recs = comps.records
    rng = np.random.default_rng(7)
    idx = rng.integers(len(recs), size=10_000)
    col = {k: np.array([getattr(r, k) for r in recs])[idx] for k in ("c_m", "c_h", "advice", "h")}
    fresh = discretion_auc(comps.discretion, comps.profile, col["c_m"], col["c_h"], col["advice"], col["h"], rng)
    held = comps.discretion.heldout_auc
    ok = held > 0.9 and fresh > 0.9
    record(6, ok, f"Heart accuracy-biased: held-out AUC {held:.3f} on {len(recs)} records, "
                  f"AUC {fresh:.3f} on 10000 fresh ground-truth events")
    assert ok


# -- 7 ---------------------------------------------------------------------------------

def test_teamrules_ordering(heart_sweep):
    curve = {(r["alpha"], r["variant"]): r for r in heart_sweep.curve()}
    alphas = heart_sweep.alphas
    bad = []
    for a in alphas:
        tr = curve[a, "TR"]["value_added"]
        for v in VARIANTS:
            if tr < curve[a, v]["value_added"] - curve[a, v]["se"]:
                bad.append(f"{v}@{a}")
        if a >= 0.2 and not curve[a, "task_only"]["value_added"] < tr:
            bad.append(f"task_only@{a}")
    # pooled over the alpha grid as well
    pooled = {v: np.mean([curve[a, v]["value_added"] for a in alphas]) for v in VARIANTS}
    pooled_se = {v: math.sqrt(np.mean([curve[a, v]["se"] ** 2 for a in alphas]) / len(alphas)) for v in VARIANTS}
    bad += [f"{v}(pooled)" for v in VARIANTS if pooled["TR"] < pooled[v] - pooled_se[v]]
    ok = not bad
    summary = " ".join(f"{v}={pooled[v]:+.4f}" for v in VARIANTS)
    record(7, ok, f"mean value added over 10 seeds x 5 alphas: {summary}" + (f"; violations {bad}" if bad else ""))
    assert ok, bad


# -- 8 ---------------------------------------------------------------------------------

def test_advising_rate_monotone_in_alpha(heart):
    cfg, comps = heart
    advisor, _ = train(cfg, comps, "TR", 0.1)
    ds = comps.prepared.dataset
    test = ds.indices("test")
    panel = simulate_panel(comps.profile, ds, test, comps.prepared.difficulty[test], seeded(0, 8))
    p1 = advisor.outcome.predict_proba(ds, test)
    grid = sorted(set(np.round(np.linspace(0, 1, 41), 6)) | set(DEFAULT_ALPHAS))
    violations, prev, rates = 0, None, []
    for a in grid:
        advisor.costs = with_alpha(advisor.costs, a)
        offered = advisor.advise_rows(ds, test, panel.h, panel.c_h, p1).offered
        rates.append(offered.mean())
        if prev is not None:
            violations += int((offered & ~prev).sum())
        prev = offered
    ok = violations == 0 and all(b <= a for a, b in zip(rates, rates[1:]))
    record(8, ok, f"{len(grid)} alpha values, advising rate {rates[0]:.3f} -> {rates[-1]:.3f}, "
                  f"{violations} violations")
    assert ok


# -- 9 ---------------------------------------------------------------------------------

def test_gate_protects_against_random_acceptance():
    cfg = PipelineConfig(dataset="heart", gate=True)
    prep = prepare(cfg)
    results = {a: [] for a in (0.1, 0.3, 0.5)}
    deployed = 0
    for seed in range(10):
        comps = build_components(cfg, prep, seed)
        noisy = comps.profile.with_adb(noise_level=1.0)
        for a in results:
            advisor, _ = train(cfg, comps, "TR", a)
            rep, dep = evaluate_advisor(cfg, comps, advisor, a, profile=noisy, gate=True)
            results[a].append(rep.value_added)
            deployed += dep
    parts, ok = [], True
    for a, vals in results.items():
        mean, se = float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        ok &= mean >= -2 * se
        parts.append(f"alpha={a}: {mean:+.4f} (se {se:.4f})")
    record(9, ok, f"noise 1.0 with gate, 10 seeds, {deployed}/30 deployed; " + ", ".join(parts))
    assert ok


# -- 10 --------------------------------------------------------------------------------

def test_variant_code_paths_coincide(heart):
    cfg, comps = heart
    same_cost = same_adb = 0
    for seed in range(3):
        tc = cfg.trainer_config("TR", seed)
        tr0, _ = anneal(tc, comps.pool, comps.panel, cfg.cost_spec(0.0), comps.discretion, comps.outcome)
        nc0, _ = anneal(cfg.trainer_config("TR_no_Cost", seed), comps.pool, comps.panel, cfg.cost_spec(0.0),
                        comps.discretion, comps.outcome)
        same_cost += tr0.rule_set.to_json() == nc0.rule_set.to_json()
        fixed, _ = anneal(tc, comps.pool, comps.panel, cfg.cost_spec(0.2), DiscretionModel.constant(1.0),
                          comps.outcome)
        no_adb, _ = anneal(cfg.trainer_config("TR_no_ADB", seed), comps.pool, comps.panel, cfg.cost_spec(0.2),
                           comps.discretion, comps.outcome)
        same_adb += fixed.rule_set.to_json() == no_adb.rule_set.to_json()
    ok = same_cost == 3 and same_adb == 3
    record(10, ok, f"TR == TR_no_Cost at alpha=0 in {same_cost}/3 seeds; "
                   f"TR_no_ADB == TR with constant acceptance in {same_adb}/3 seeds")
    assert ok
