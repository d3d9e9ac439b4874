"""Seeded synthetic stand-ins for the three benchmark tables.

The generators reproduce the row counts, the feature names the behaviour
profiles key on (age, gender, satisfactory trades, external risk estimate),
and a label signal strong enough that a linear model is confident on most,
but not all, rows. They are not the original data.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

# name -> (train, val, test)
SPLIT_COUNTS = {
    "heart": (505, 87, 127),
    "fico": (6120, 801, 1080),
    "hr": (568, 38, 143),
}
LABEL_COLUMN = {"heart": "target", "fico": "RiskPerformance", "hr": "Attrition"}
GENERATOR_SEED = {"heart": 20240501, "fico": 20240502, "hr": 20240503}


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _heart(rng: np.random.Generator, n: int) -> dict:
    age = np.clip(np.round(rng.normal(54, 9, n)), 29, 77)
    sex = np.where(rng.random(n) < 0.7, "Male", "Female")
    cp = rng.choice(["typical", "atypical", "nonanginal", "asymptomatic"], n, p=[0.08, 0.17, 0.28, 0.47])
    trestbps = np.round(rng.normal(132, 18, n))
    chol = np.round(np.clip(rng.normal(240, 50, n), 120, 560))
    fbs = (rng.random(n) < 0.15).astype(int)
    thalach = np.round(np.clip(rng.normal(150 - 0.8 * (age - 54), 22, n), 70, 202))
    exang = np.where(rng.random(n) < 0.33, "yes", "no")
    oldpeak = np.round(rng.exponential(1.0, n), 1)
    ca = rng.choice([0, 1, 2, 3], n, p=[0.58, 0.22, 0.13, 0.07])
    thal = rng.choice(["normal", "fixed", "reversible"], n, p=[0.55, 0.07, 0.38])

    z = (
        -3.05
        + 0.055 * (age - 54)
        + 0.9 * (sex == "Male")
        + 1.6 * (cp == "asymptomatic")
        - 0.6 * (cp == "nonanginal")
        + 0.012 * (trestbps - 132)
        + 0.004 * (chol - 240)
        - 0.028 * (thalach - 150)
        + 1.0 * (exang == "yes")
        + 0.75 * (oldpeak - 1.0)
        + 0.95 * ca
        + 1.5 * (thal == "reversible")
        + 0.7 * (thal == "fixed")
    )
    # interaction a linear model cannot express
    z = z + 1.2 * ((age < 50) & (sex == "Female") & (cp == "asymptomatic"))
    y = (rng.random(n) < _sigmoid(1.35 * z)).astype(int)
    return {
        "age": age.astype(int), "sex": sex, "cp": cp, "trestbps": trestbps.astype(int),
        "chol": chol.astype(int), "fbs": fbs, "thalach": thalach.astype(int), "exang": exang,
        "oldpeak": oldpeak, "ca": ca, "thal": thal, "target": y,
    }


def _fico(rng: np.random.Generator, n: int) -> dict:
    latent = rng.normal(0, 1, n)  # creditworthiness
    ere = np.round(np.clip(72 + 9 * latent + rng.normal(0, 4, n), 33, 94))
    sat = np.round(np.clip(rng.gamma(4.0, 5.5, n) + 2 * latent, 0, 79))
    total = np.round(sat + np.clip(rng.gamma(1.5, 3, n), 0, None))
    oldest = np.round(np.clip(rng.normal(200 + 30 * latent, 90, n), 2, 803))
    recent_open = np.round(np.clip(rng.exponential(9, n), 0, 383))
    avg_m = np.round(np.clip(rng.normal(78 + 10 * latent, 30, n), 4, 383))
    derog60 = rng.poisson(np.exp(-0.7 - 0.8 * latent))
    derog90 = np.minimum(derog60, rng.poisson(np.exp(-1.0 - 0.8 * latent)))
    never_delq = np.round(np.clip(92 + 6 * latent + rng.normal(0, 6, n), 20, 100))
    recent_delq = np.round(np.clip(rng.exponential(25 + 10 * latent.clip(-2, 2) + 20, n), 0, 83))
    maxdelq12 = np.clip(np.round(6 + 0.8 * latent + rng.normal(0, 1, n)), 0, 9)
    maxdelq_ever = np.clip(np.round(6 + 0.9 * latent + rng.normal(0, 1.2, n)), 2, 8)
    trades12 = rng.poisson(1.8, n)
    pct_install = np.round(np.clip(rng.normal(34, 17, n), 0, 100))
    recent_inq = np.round(np.clip(rng.exponential(2.5, n) - 1, 0, 24))
    inq6 = rng.poisson(np.exp(0.3 - 0.4 * latent))
    inq6x = np.minimum(inq6, rng.poisson(np.exp(0.1 - 0.4 * latent)))
    rev_burden = np.round(np.clip(35 - 18 * latent + rng.normal(0, 18, n), 0, 232))
    inst_burden = np.round(np.clip(rng.normal(68, 20, n), 0, 471))
    rev_bal = rng.poisson(4, n)
    inst_bal = rng.poisson(2.5, n)
    high_util = rng.poisson(np.exp(0.0 - 0.4 * latent))
    pct_bal = np.round(np.clip(rng.normal(66 - 8 * latent, 20, n), 0, 100))

    z = (
        0.1
        - 0.8 * latent
        - 0.035 * (ere - 72)
        - 0.012 * (sat - 22)
        + 0.18 * inq6x
        + 0.012 * (rev_burden - 35)
        + 0.15 * high_util
    )
    y = (rng.random(n) < _sigmoid(0.85 * z)).astype(int)
    return {
        "ExternalRiskEstimate": ere.astype(int),
        "MSinceOldestTradeOpen": oldest.astype(int),
        "MSinceMostRecentTradeOpen": recent_open.astype(int),
        "AverageMInFile": avg_m.astype(int),
        "NumSatisfactoryTrades": sat.astype(int),
        "NumTrades60Ever2DerogPubRec": derog60,
        "NumTrades90Ever2DerogPubRec": derog90,
        "PercentTradesNeverDelq": never_delq.astype(int),
        "MSinceMostRecentDelq": recent_delq.astype(int),
        "MaxDelq2PublicRecLast12M": maxdelq12.astype(int),
        "MaxDelqEver": maxdelq_ever.astype(int),
        "NumTotalTrades": total.astype(int),
        "NumTradesOpeninLast12M": trades12,
        "PercentInstallTrades": pct_install.astype(int),
        "MSinceMostRecentInqexcl7days": recent_inq.astype(int),
        "NumInqLast6M": inq6,
        "NumInqLast6Mexcl7days": inq6x,
        "NetFractionRevolvingBurden": rev_burden.astype(int),
        "NetFractionInstallBurden": inst_burden.astype(int),
        "NumRevolvingTradesWBalance": rev_bal,
        "NumInstallTradesWBalance": inst_bal,
        "NumBank2NatlTradesWHighUtilization": high_util,
        "PercentTradesWBalance": pct_bal.astype(int),
        "RiskPerformance": y,
    }


def _hr(rng: np.random.Generator, n: int) -> dict:
    age = np.clip(np.round(rng.normal(37, 9, n)), 18, 60)
    gender = np.where(rng.random(n) < 0.6, "Male", "Female")
    level = np.clip(np.round(1 + (age - 18) / 12 + rng.normal(0, 0.8, n)), 1, 5)
    income = np.round(np.clip(1000 + 3300 * level + rng.normal(0, 1200, n), 1009, 19999))
    total_years = np.clip(np.round(age - 22 + rng.normal(0, 3, n)), 0, 40)
    years_at = np.clip(np.round(total_years * rng.uniform(0.1, 0.9, n)), 0, 40)
    job_sat = rng.integers(1, 5, n)
    env_sat = rng.integers(1, 5, n)
    wlb = rng.choice([1, 2, 3, 4], n, p=[0.06, 0.23, 0.6, 0.11])
    overtime = np.where(rng.random(n) < 0.28, "Yes", "No")
    distance = np.clip(np.round(rng.exponential(9, n)), 1, 29)
    companies = rng.poisson(2.6, n)
    marital = rng.choice(["Single", "Married", "Divorced"], n, p=[0.32, 0.46, 0.22])
    dept = rng.choice(["Sales", "Research", "HumanResources"], n, p=[0.3, 0.65, 0.05])

    z = (
        -2.4
        - 0.09 * (age - 37)
        - 0.55 * (level - 2)
        + 1.9 * (overtime == "Yes")
        - 0.42 * (job_sat - 2.5)
        - 0.38 * (env_sat - 2.5)
        - 0.45 * (wlb - 2.8)
        + 0.05 * (distance - 9)
        + 0.2 * (companies - 2.6)
        + 1.1 * (marital == "Single")
        - 0.09 * (years_at - 6)
        + 0.55 * (dept == "Sales")
    )
    y = (rng.random(n) < _sigmoid(1.3 * z)).astype(int)
    return {
        "Age": age.astype(int), "Gender": gender, "JobLevel": level.astype(int),
        "MonthlyIncome": income.astype(int), "TotalWorkingYears": total_years.astype(int),
        "YearsAtCompany": years_at.astype(int), "JobSatisfaction": job_sat,
        "EnvironmentSatisfaction": env_sat, "WorkLifeBalance": wlb, "OverTime": overtime,
        "DistanceFromHome": distance.astype(int), "NumCompaniesWorked": companies,
        "MaritalStatus": marital, "Department": dept, "Attrition": y,
    }


_GENERATORS = {"heart": _heart, "fico": _fico, "hr": _hr}


def generate(name: str, seed: int | None = None) -> dict:
    """Column dict for surrogate ``name`` (row count = sum of its split counts)."""
    n = sum(SPLIT_COUNTS[name])
    rng = np.random.default_rng(GENERATOR_SEED[name] if seed is None else seed)
    return _GENERATORS[name](rng, n)


def write_csv(columns: dict, path) -> None:
    names = list(columns)
    n = len(columns[names[0]])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([columns[c][i] for c in names])


def bundled_path(name: str) -> Path:
    """Path of the packaged CSV for ``name`` (``heart``, ``fico`` or ``hr``)."""
    if name not in SPLIT_COUNTS:
        raise KeyError(f"unknown bundled dataset {name!r}")
    return Path(str(resources.files("ruleadvisor") / "datasets" / f"{name}.csv"))


def regenerate_bundled(directory=None) -> list[Path]:
    directory = Path(directory) if directory else bundled_path("heart").parent
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name in SPLIT_COUNTS:
        path = directory / f"{name}.csv"
        write_csv(generate(name), path)
        out.append(path)
    return out
