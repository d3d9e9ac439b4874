"""Ready-made human profiles: the per-dataset benchmark behaviours and the three case-study experts."""

from __future__ import annotations

from dataclasses import dataclass, field

from .advisor import CostSpec
from .data import Condition
from .errors import ConfigError
from .humansim import (LABEL_KEY, ADBParams, ConfidenceBehavior, DecisionBehavior, GroupRule,
                       HumanProfile)

# difficulty above which the difficulty-biased human drops to low accuracy
DIFFICULTY_THRESHOLD = {"heart": 0.6, "fico": 0.3, "hr": 0.8}

# rows where the group-biased human decides with low accuracy
DECISION_GROUP = {
    "heart": (Condition("age", "<", 50),),
    "fico": (Condition("NumSatisfactoryTrades", "<", 24),),
    "hr": (Condition("Age", ">", 32),),
}

# rows (among the hard ones) where the group-biased human reports low confidence
CONFIDENCE_GROUP = {
    "heart": (Condition("sex", "==", "Male"),),
    "fico": (Condition("ExternalRiskEstimate", "<", 65),),
    "hr": (Condition("Gender", "==", "Male"),),
}

GENDER_GROUPS = {
    "heart": {"male": (Condition("sex", "==", "Male"),), "female": (Condition("sex", "==", "Female"),)},
    "hr": {"male": (Condition("Gender", "==", "Male"),), "female": (Condition("Gender", "==", "Female"),)},
}


def _check(dataset):
    if dataset not in DIFFICULTY_THRESHOLD:
        raise ConfigError(f"no preset for dataset {dataset!r}; expected one of {sorted(DIFFICULTY_THRESHOLD)}")


def benchmark_profile(dataset: str, decision: str = "difficulty_biased", confidence: str = "accuracy_biased",
                      seed: int = 0, adb: ADBParams | None = None) -> HumanProfile:
    """One of the four decision x confidence behaviour combinations for ``dataset``."""
    _check(dataset)
    d_t = DIFFICULTY_THRESHOLD[dataset]
    if decision == "difficulty_biased":
        dec = DecisionBehavior("difficulty_biased", difficulty_threshold=d_t, low_accuracy=0.6, high_accuracy=1.0)
    elif decision == "group_biased":
        dec = DecisionBehavior("group_biased", condition=DECISION_GROUP[dataset],
                               low_accuracy=0.6, high_accuracy=0.95)
    else:
        raise ConfigError(f"unknown decision behaviour {decision!r}")
    if confidence == "accuracy_biased":
        conf = ConfidenceBehavior("accuracy_biased", kappa=0.05)
    elif confidence == "group_biased":
        conf = ConfidenceBehavior("group_biased", difficulty_threshold=d_t, easy_confidence=0.9,
                                  low_confidence=0.2, high_confidence=1.0,
                                  condition=CONFIDENCE_GROUP[dataset])
    else:
        raise ConfigError(f"unknown confidence behaviour {confidence!r}")
    return HumanProfile(dec, conf, adb or ADBParams(), seed, f"{dataset}:{decision}:{confidence}")


_MALE = Condition("sex", "==", "Male")
_FEMALE = Condition("sex", "==", "Female")


def _gender_decisions():
    return DecisionBehavior("custom_group", custom=(GroupRule((_MALE,), 0.9), GroupRule((_FEMALE,), 0.6)))


def doctor_a(seed: int = 0) -> HumanProfile:
    """Accurate on men, weak on women, and confident (0.975) on everyone."""
    conf = ConfidenceBehavior("custom_group", custom=(GroupRule((), 0.975),))
    return HumanProfile(_gender_decisions(), conf, ADBParams(), seed, "doctor_a")


def doctor_b(seed: int = 0) -> HumanProfile:
    """Same decisions as doctor A, but unsure (0.6) on women and mildly overconfident on men."""
    conf = ConfidenceBehavior("custom_group", custom=(GroupRule((_MALE,), 0.95), GroupRule((_FEMALE,), 0.6)))
    return HumanProfile(_gender_decisions(), conf, ADBParams(), seed, "doctor_b")


def asymmetric_expert(seed: int = 0) -> HumanProfile:
    """Misses disease in younger patients; leans towards advice that flags disease."""
    young_sick = (Condition("age", "<", 50), Condition(LABEL_KEY, "==", 1))
    dec = DecisionBehavior("custom_group", custom=(GroupRule(young_sick, 0.6), GroupRule((), 0.95)))
    conf = ConfidenceBehavior("group_biased", difficulty_threshold=DIFFICULTY_THRESHOLD["heart"],
                              easy_confidence=0.9, low_confidence=0.2, high_confidence=1.0,
                              condition=(_MALE,))
    adb = ADBParams(accept_boost=1.5, accept_damp=0.5)
    return HumanProfile(dec, conf, adb, seed, "asymmetric")


@dataclass(frozen=True)
class CaseStudy:
    name: str
    dataset: str
    profile: HumanProfile
    costs: CostSpec
    variants: tuple
    groups: dict = field(default_factory=dict)
    repetitions: int = 20


def case_study(name: str, seed: int = 0) -> CaseStudy:
    gender = GENDER_GROUPS["heart"]
    if name == "doctor_a":
        return CaseStudy(name, "heart", doctor_a(seed), CostSpec(0.1), ("TR", "task_only", "TR_no_ADB"), gender)
    if name == "doctor_b":
        return CaseStudy(name, "heart", doctor_b(seed), CostSpec(0.1), ("TR", "task_only", "TR_no_ADB"), gender)
    if name == "asymmetric":
        groups = {"young": (Condition("age", "<", 50),), "older": (Condition("age", ">=", 50),),
                  "disease": (Condition(LABEL_KEY, "==", 1),), "no_disease": (Condition(LABEL_KEY, "==", 0),)}
        return CaseStudy(name, "heart", asymmetric_expert(seed), CostSpec(0.0, 1.0, 3.0),
                         ("TR", "task_only", "TR_no_ADB"), groups)
    raise ConfigError(f"unknown case study {name!r}; expected doctor_a, doctor_b or asymmetric")


CASE_STUDIES = ("doctor_a", "doctor_b", "asymmetric")
