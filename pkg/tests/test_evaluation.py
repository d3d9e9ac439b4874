import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from ruleadvisor.advisor import AdviceBatch, CostSpec
from ruleadvisor.estimators import DiscretionModel, InteractionRecord
from ruleadvisor.evaluation import (METRICS, MetricsReport, Outcome, degradation_table, degrade_adb, evaluate,
                                    group_metrics, robustness_gate)
from ruleadvisor.humansim import ADBParams, DecisionBehavior, HumanProfile
from ruleadvisor.presets import benchmark_profile


def hand_outcome():
    # rows: corrected, agreed, corrupted, rejected good advice, unadvised error, unadvised right
    return Outcome(y=np.array([1, 1, 0, 0, 1, 0]), h=np.array([0, 1, 0, 1, 0, 0]),
                   y_hat=np.array([1, 1, 1, 0, 0, 0]), accepted=np.array([1, 0, 1, 0, 0, 0]),
                   c_m=np.array([0.9, np.nan, 0.7, 0.8, np.nan, np.nan]))


def test_hand_panel_metrics():
    m = group_metrics(hand_outcome(), CostSpec(0.2, 1, 2))
    # human errors cost 2 + 1 + 2; team errors 1 + 1 + 2; three contradictions
    expected = {
        "hdl": 5 / 6, "tdl": 4 / 6, "al": 0.6 / 6, "ttl": 4 / 6 + 0.1, "value_added": 5 / 6 - 4 / 6 - 0.1,
        "accuracy_improvement": 0.0, "tdl_improvement": 1 / 6, "advising_costs_incurred": 0.5,
        "advising_costs_au": 0.1, "advising_confidence_mean": 0.8, "advising_accuracy": 2 / 3,
        "advising_rate": 0.5, "acceptance_rate": 2 / 3, "errors_avoided_pct": 100 / 3,
    }
    assert set(m) == set(METRICS)
    for k, v in expected.items():
        assert m[k] == pytest.approx(v, abs=1e-12), k


def test_group_mask_and_missing_values():
    o = hand_outcome()
    m = group_metrics(o, CostSpec(0.2), np.array([False, True, False, False, True, True]))
    assert m["advising_rate"] == 0
    assert m["acceptance_rate"] is None and m["advising_accuracy"] is None
    assert group_metrics(o, CostSpec(), np.zeros(6, bool))["hdl"] is None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1), st.floats(0.1, 5), st.floats(0.1, 5))
def test_decomposition_holds_on_every_repetition(seed, alpha, l0, l1):
    rng = np.random.default_rng(seed)
    n = 30
    o = Outcome(rng.integers(0, 2, n), rng.integers(0, 2, n), rng.integers(0, 2, n), rng.integers(0, 2, n),
                rng.random(n))
    m = group_metrics(o, CostSpec(alpha, l0, l1))
    assert abs(m["ttl"] - (m["tdl"] + m["al"])) <= 1e-12
    assert abs(m["value_added"] - (m["hdl"] - m["ttl"])) <= 1e-12


class FixedAdvisor:
    """Duck-typed advisor returning precomputed advice per row."""

    outcome = None

    def __init__(self, rule):
        self.rule = rule

    def advise_rows(self, dataset, rows, h, c_h, p1=None):
        y = dataset.labels[rows]
        y_hat = self.rule(y, np.asarray(h)).astype(np.int8)
        offered = y_hat != h
        return AdviceBatch(y_hat, offered, np.where(offered, 0.9, np.nan), offered.astype(float),
                           np.where(offered, y_hat, -1), np.where(offered, 0, -1))


def _toy(n=200, seed=0):
    rng = np.random.default_rng(seed)
    rows = [{"x": float(v)} for v in rng.random(n)]
    return make_dataset(rows, rng.integers(0, 2, n)), rng.random(n)


ALWAYS_ACCEPT = ADBParams(delta=0, accept_boost=2.0, accept_damp=2.0)


def test_never_advising_adds_nothing():
    ds, diff = _toy()
    prof = benchmark_profile("heart")
    rep = evaluate(FixedAdvisor(lambda y, h: h), ds, np.arange(len(ds)), diff, prof, CostSpec(0.3), 5)
    assert rep.tdl == rep.hdl and rep.al == 0 and rep.value_added == 0
    alone = evaluate(None, ds, np.arange(len(ds)), diff, prof, CostSpec(0.3), 5)
    assert alone.value_added == 0 and alone.advising_rate == 0


def test_oracle_advisor_recovers_all_human_loss():
    ds, diff = _toy()
    prof = HumanProfile(adb=ALWAYS_ACCEPT)
    rep = evaluate(FixedAdvisor(lambda y, h: y), ds, np.arange(len(ds)), diff, prof, CostSpec(0.0), 5)
    assert rep.hdl > 0
    assert rep.value_added == pytest.approx(rep.hdl)
    assert rep.errors_avoided_pct == 100.0


def test_evaluate_is_reproducible_and_groups_reported(tmp_path):
    from ruleadvisor.data import Condition
    ds, diff = _toy()
    prof = benchmark_profile("heart")
    groups = {"low": (Condition("x", "<", 0.5),), "high": (Condition("x", ">=", 0.5),)}
    args = (FixedAdvisor(lambda y, h: y), ds, np.arange(len(ds)), diff, prof, CostSpec(0.1), 7)
    a = evaluate(*args, rng=np.random.default_rng(3), groups=groups)
    b = evaluate(*args, rng=np.random.default_rng(3), groups=groups)
    a.save_csv(tmp_path / "a.csv")
    b.save_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert set(a.groups) == {"all", "low", "high"}
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "group,metric,mean,se" and len(lines) == 1 + 3 * len(METRICS)
    a.save_json(tmp_path / "a.json")
    import json
    back = MetricsReport.from_dict(json.loads((tmp_path / "a.json").read_text()))
    assert back.value_added == a.value_added
    assert a.ttl == a.tdl + a.al and a.value_added == a.hdl - a.ttl


def test_gate():
    ds, diff = _toy(300)
    prof = HumanProfile(adb=ALWAYS_ACCEPT)
    rows = np.arange(len(ds))
    good = robustness_gate(FixedAdvisor(lambda y, h: y), ds, rows, diff, prof, CostSpec(0.0), 5)
    assert good.deploy and good.validation.value_added > 0
    bad = robustness_gate(FixedAdvisor(lambda y, h: 1 - y), ds, rows, diff, prof, CostSpec(0.0), 5)
    assert not bad.deploy


def test_gated_adversary_never_reports_a_material_loss():
    # a harmful advisor: on validation it is gated out, so test outcomes are the human's own
    ds, diff = _toy(300)
    prof = HumanProfile(adb=ALWAYS_ACCEPT)
    val, test = np.arange(150), np.arange(150, 300)
    for seed in range(10):
        adv = FixedAdvisor(lambda y, h: 1 - y)
        gate = robustness_gate(adv, ds, val, diff[val], prof, CostSpec(0.1), 5, np.random.default_rng(seed))
        rep = evaluate(adv if gate.deploy else None, ds, test, diff[test], prof, CostSpec(0.1), 5,
                       np.random.default_rng(seed + 100))
        assert rep.value_added >= -2 * rep.se["all"]["value_added"]


def _records(n, seed):
    rng = np.random.default_rng(seed)
    cm, ch = rng.uniform(0.5, 1, n), rng.uniform(0.3, 1, n)
    return [InteractionRecord(i, 0, float(ch[i]), 1, float(cm[i]), 0) for i in range(n)]


class TruthDiscretion:
    """Scores events with the true acceptance probability."""

    def __init__(self, adb):
        self.adb = adb

    def predict(self, c_m, c_h):
        from ruleadvisor.humansim import acceptance_probability
        return np.atleast_1d(acceptance_probability(self.adb, c_m, c_h))


def test_degradation():
    prof = benchmark_profile("heart")
    levels = [0.0, 0.25, 0.5, 0.75, 1.0]
    profs = degrade_adb(prof, levels)
    assert profs[0] is prof and profs[-1].adb.noise_level == 1.0
    with pytest.raises(ValueError):
        degrade_adb(prof, [1.5])
    table = degradation_table(TruthDiscretion(prof.adb), prof, levels, _records(500, 0), np.random.default_rng(0))
    aucs = [r["auc"] for r in table]
    assert aucs[0] > 0.7
    assert abs(aucs[-1] - 0.5) <= 0.05
    # non-increasing within Monte Carlo slack
    assert all(b <= a + 0.02 for a, b in zip(aucs, aucs[1:]))


def test_constant_discretion_has_chance_auc_or_nan():
    prof = benchmark_profile("heart")
    table = degradation_table(DiscretionModel.constant(1.0), prof, [0.0], _records(200, 1), np.random.default_rng(1))
    assert table[0]["auc"] == pytest.approx(0.5) or np.isnan(table[0]["auc"])


def test_repetitions_must_be_positive():
    ds, diff = _toy(10)
    with pytest.raises(ValueError):
        evaluate(None, ds, np.arange(10), diff, HumanProfile(DecisionBehavior()), CostSpec(), 0)
