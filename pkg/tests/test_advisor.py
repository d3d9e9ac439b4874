import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import StubOutcome, make_dataset
from ruleadvisor.advisor import (TASK_ONLY, Advisor, CostSpec, advise_task_only, decision_loss,
                                 expected_team_loss, psi, rule_confidence)
from ruleadvisor.data import Condition
from ruleadvisor.errors import NoCoveringRule
from ruleadvisor.estimators import DiscretionModel
from ruleadvisor.rules import Rule, RuleSet


def oracle_loss(lam0, lam1, alpha, y, y_hat, h, pa):
    """Team loss written out case by case."""
    def v(y, d):
        if y == d:
            return 0.0
        return lam1 if y == 1 else lam0
    cost = alpha if y_hat != h else 0.0
    return pa * v(y, y_hat) + (1 - pa) * v(y, h) + cost


def oracle_psi(lam0, lam1, alpha, p1, y_star, h, pa):
    weights = {1: p1, 0: 1 - p1}
    adv = sum(weights[y] * oracle_loss(lam0, lam1, alpha, y, y_star, h, pa) for y in (0, 1))
    keep = sum(weights[y] * oracle_loss(lam0, lam1, alpha, y, h, h, pa) for y in (0, 1))
    return adv < keep


def test_decision_loss_examples():
    assert decision_loss(CostSpec(), 1, 0) == 1
    assert decision_loss(CostSpec(0, 1, 3), 1, 0) == 3
    assert decision_loss(CostSpec(0, 2, 3), 0, 1) == 2
    assert decision_loss(CostSpec(0, 1, 3), 1, 1) == 0


def test_cost_spec_rejects_negative_values():
    with pytest.raises(ValueError):
        CostSpec(-0.1)
    with pytest.raises(ValueError):
        CostSpec(0, 0, 1)


def test_expected_team_loss_examples():
    assert expected_team_loss(CostSpec(), 1, 1, 1, 0.3) == 0
    assert expected_team_loss(CostSpec(0.4), 1, 1, 0, 0.5) == pytest.approx(0.9, abs=1e-15)
    assert expected_team_loss(CostSpec(0), 1, 1, 0, 1.0) == 0


def test_psi_examples():
    assert psi(CostSpec(0), 1.0, 1, 0, 1.0) is True
    # boundary: 0.9 is not below 0.9
    assert psi(CostSpec(0.4), 0.9, 1, 0, 0.5) is False


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 2), st.integers(0, 1), st.integers(0, 1),
       st.integers(0, 1), st.floats(0, 1))
def test_advising_the_human_decision_costs_nothing_extra(l0, l1, a, y, h, _, pa):
    c = CostSpec(a, l0, l1)
    assert expected_team_loss(c, y, h, h, pa) == decision_loss(c, y, h)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 2), st.floats(0, 1), st.integers(0, 1),
       st.floats(0, 1))
def test_psi_never_fires_when_agreeing(l0, l1, a, p1, h, pa):
    assert not psi(CostSpec(a, l0, l1), p1, h, h, pa)


@settings(max_examples=200)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 2), st.floats(0, 1), st.integers(0, 1),
       st.integers(0, 1), st.floats(0, 1))
def test_psi_matches_enumeration(l0, l1, a, p1, y_star, h, pa):
    got = psi(CostSpec(a, l0, l1), p1, y_star, h, pa)
    assert got == oracle_psi(l0, l1, a, p1, y_star, h, pa)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 1), st.integers(0, 1), st.floats(0, 1),
       st.floats(0, 1), st.floats(0, 1))
def test_value_test_tightens_with_alpha(l0, l1, p1, h, pa, a1, a2):
    lo, hi = sorted((a1, a2))
    if psi(CostSpec(hi, l0, l1), p1, 1 - h, h, pa):
        assert psi(CostSpec(lo, l0, l1), p1, 1 - h, h, pa)


def test_vectorised_psi_agrees_with_scalar_calls():
    rng = np.random.default_rng(3)
    n = 200
    p1, pa = rng.random(n), rng.random(n)
    ys, h = rng.integers(0, 2, n), rng.integers(0, 2, n)
    c = CostSpec(0.2, 1, 2)
    vec = psi(c, p1, ys, h, pa)
    assert [psi(c, p1[i], ys[i], h[i], pa[i]) for i in range(n)] == list(vec)


# -- rule confidence and advising -----------------------------------------------

AGE_LT_50 = Condition("age", "<", 50)
FEMALE = Condition("sex", "==", "F")
MALE = Condition("sex", "==", "M")
AGE_GE_50 = Condition("age", ">=", 50)


def test_rule_confidence_takes_max_precision():
    rs = RuleSet((Rule((AGE_LT_50, FEMALE), 0.8, 10), Rule((FEMALE, Condition("age", "<", 60)), 0.95, 10)))
    assert rule_confidence(rs, {"age": 40, "sex": "F"}, 1) == (0.95, 1)
    assert rule_confidence(RuleSet((Rule((AGE_LT_50, FEMALE), 0.75, 4),)), {"age": 40, "sex": "F"}, 1)[0] == 0.75
    with pytest.raises(NoCoveringRule):
        rule_confidence(rs, {"age": 70, "sex": "M"}, 1)


def _advisor(rule_set, p1, alpha=0.0, pa=1.0):
    return Advisor(rule_set, DiscretionModel.constant(pa), StubOutcome([p1]), CostSpec(alpha))


POS = Rule((AGE_LT_50, FEMALE), 0.9, 10)
NEG = Rule((FEMALE, Condition("age", "<", 45)), 0.8, 10)


def test_advise_branches():
    adv = _advisor(RuleSet((POS,), ()), p1=0.9)
    a = adv.advise({"age": 40, "sex": "F"}, h=0, c_h=0.6)
    assert a.offered and a.recommendation == 1 and a.confidence == 0.9 and a.rule_id == "+0"
    assert not adv.advise({"age": 70, "sex": "M"}, h=0, c_h=0.6).offered
    # agreeing with the human is never offered
    assert not adv.advise({"age": 40, "sex": "F"}, h=1, c_h=0.6).offered


def test_positive_side_wins_on_double_cover():
    adv = _advisor(RuleSet((POS,), (NEG,)), p1=0.9)
    a = adv.advise({"age": 40, "sex": "F"}, h=0, c_h=0.6)
    assert a.recommendation == 1


def test_no_fallback_to_negative_side_when_positive_fails_value_test():
    # outcome says label 0 is likely, so advising 1 fails; the negative side covers too but is blocked
    adv = _advisor(RuleSet((POS,), (NEG,)), p1=0.05)
    assert not adv.advise({"age": 40, "sex": "F"}, h=1, c_h=0.6).offered
    only_neg = _advisor(RuleSet((), (NEG,)), p1=0.05)
    a = only_neg.advise({"age": 40, "sex": "F"}, h=1, c_h=0.6)
    assert a.offered and a.recommendation == 0 and a.rule_id == "-0"


def test_advise_is_repeatable():
    adv = _advisor(RuleSet((POS,), (NEG,)), p1=0.7, alpha=0.1, pa=0.6)
    calls = {adv.advise({"age": 40, "sex": "F"}, h=0, c_h=0.5) for _ in range(5)}
    assert len(calls) == 1


def test_batch_advice_matches_single_calls():
    rng = np.random.default_rng(0)
    rows = [{"age": int(a), "sex": s} for a, s in zip(rng.integers(30, 70, 60), rng.choice(["F", "M"], 60))]
    ds = make_dataset(rows, rng.integers(0, 2, 60))
    p1 = rng.random(60)
    adv = Advisor(RuleSet((POS,), (NEG, Rule((MALE, AGE_GE_50), 0.7, 5))), DiscretionModel.constant(0.7),
                  StubOutcome(p1), CostSpec(0.1))
    h = rng.integers(0, 2, 60)
    batch = adv.advise_rows(ds, None, h, np.full(60, 0.6))
    for i, r in enumerate(rows):
        single = Advisor(adv.rule_set, adv.discretion, StubOutcome([p1[i]]), adv.costs).advise(r, int(h[i]), 0.6)
        assert single.offered == bool(batch.offered[i])
        if single.offered:
            assert single.recommendation == batch.y_hat[i]


def test_offered_set_shrinks_as_alpha_grows():
    rng = np.random.default_rng(1)
    rows = [{"age": int(a), "sex": s} for a, s in zip(rng.integers(30, 70, 200), rng.choice(["F", "M"], 200))]
    ds = make_dataset(rows, rng.integers(0, 2, 200))
    p1 = rng.random(200)
    h = rng.integers(0, 2, 200)
    prev = None
    for alpha in np.linspace(0, 1, 21):
        adv = Advisor(RuleSet((POS,), (Rule((MALE, AGE_GE_50), 0.7, 5),)), DiscretionModel.constant(0.8),
                      StubOutcome(p1), CostSpec(alpha))
        offered = adv.advise_rows(ds, None, h, np.full(200, 0.6)).offered
        if prev is not None:
            assert not (offered & ~prev).any()
        prev = offered


def test_task_only_advice():
    rs = RuleSet((POS, Rule((FEMALE, Condition("age", "<", 45)), 0.97, 3)), ())
    adv = Advisor(rs, None, None, CostSpec(), TASK_ONLY, negative_precision=0.81)
    a = advise_task_only(adv, {"age": 40, "sex": "F"})
    assert (a.offered, a.recommendation, a.confidence) == (True, 1, 0.97)
    b = adv.advise({"age": 70, "sex": "M"}, h=1, c_h=0.9)
    assert (b.offered, b.recommendation, b.confidence) == (True, 0, 0.81)
    empty = Advisor(RuleSet(), None, None, CostSpec(), TASK_ONLY, negative_precision=0.5)
    assert all(advise_task_only(empty, {"age": a, "sex": "M"}).recommendation == 0 for a in (20, 80))


def test_bundle_round_trip(tmp_path):
    from ruleadvisor.estimators import fit_logistic

    rng = np.random.default_rng(2)
    rows = [{"age": float(a), "sex": s} for a, s in zip(rng.integers(30, 70, 80), rng.choice(["F", "M"], 80))]
    ds = make_dataset(rows, [int(r["age"] < 50) for r in rows])
    adv = Advisor(RuleSet((POS,), (NEG,)), DiscretionModel.constant(0.7), fit_logistic(ds), CostSpec(0.2, 1, 3),
                  manifest={"seed": 4})
    adv.save(tmp_path / "b")
    assert sorted(p.name for p in (tmp_path / "b").iterdir()) == \
        ["costs.json", "discretion.json", "manifest.json", "outcome.json", "ruleset.json"]
    back = Advisor.load(tmp_path / "b")
    assert back.rule_set == adv.rule_set and back.costs == adv.costs
    h = rng.integers(0, 2, 80)
    a1 = adv.advise_rows(ds, None, h, np.full(80, 0.6))
    a2 = back.advise_rows(ds, None, h, np.full(80, 0.6))
    assert np.array_equal(a1.y_hat, a2.y_hat)


def test_enumerated_psi_table():
    """Every corner of the binary inputs, against the written-out oracle."""
    for l0, l1, alpha, p1, ys, h, pa in itertools.product((1, 3), (1, 3), (0, 0.4), (0, 0.3, 1),
                                                          (0, 1), (0, 1), (0, 0.5, 1)):
        assert psi(CostSpec(alpha, l0, l1), p1, ys, h, pa) == oracle_psi(l0, l1, alpha, p1, ys, h, pa)
