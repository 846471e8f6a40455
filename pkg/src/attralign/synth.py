"""Synthetic personal-loan corpus generator.

Emits a LendingClub-flavored CSV with 24 usable features, a couple of
deliberately degenerate columns (to exercise cleaning), sparse missingness in
a few numeric columns, and a binary loan outcome driven by a known mix of
linear and interaction effects. Everything is a deterministic function of
(n_rows, seed).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

DEFAULT_ROWS = 10_000

GRADES = ["A", "B", "C", "D", "E", "F", "G"]
EMP_LENGTHS = [
    "n/a", "< 1 year", "1 year", "2 years", "3 years", "4 years", "5 years",
    "6 years", "7 years", "8 years", "9 years", "10+ years",
]
HOME_RAW = ["RENT", "MORTGAGE", "OWN", "OTHER", "NONE"]
HOME_P = [0.45, 0.42, 0.10, 0.025, 0.005]
PURPOSE_RAW = [
    "debt_consolidation", "credit_card", "other", "home_improvement",
    "major_purchase", "small_business", "car", "wedding", "medical",
    "moving", "vacation", "house",
]
PURPOSE_P = [0.45, 0.13, 0.09, 0.07, 0.05, 0.05, 0.04, 0.03, 0.03, 0.025, 0.015, 0.02]
VERIF_RAW = ["Not Verified", "Verified", "Source Verified"]
VERIF_P = [0.45, 0.30, 0.25]
REGIONS = ["Northeast", "Midwest", "South", "West"]
REGION_P = [0.20, 0.22, 0.35, 0.23]
APP_TYPES = ["INDIVIDUAL", "JOINT"]
APP_P = [0.95, 0.05]

HEADER = [
    "row_id", "loan_amnt", "term", "int_rate", "installment", "grade",
    "emp_length", "home_ownership", "annual_inc", "verification_status",
    "purpose", "addr_region", "application_type", "dti", "delinq_2yrs",
    "inq_last_6mths", "open_acc", "pub_rec", "revol_bal", "revol_util",
    "total_acc", "mths_since_last_delinq", "credit_age_months",
    "monthly_debt", "acc_now_delinq", "policy_code", "member_note",
    "loan_status",
]


def _amortized_payment(principal: np.ndarray, annual_rate_pct: np.ndarray, months: np.ndarray) -> np.ndarray:
    r = annual_rate_pct / 100.0 / 12.0
    return principal * r / (1.0 - (1.0 + r) ** (-months))


def generate_rows(n_rows: int = DEFAULT_ROWS, seed: int = 20_240_101) -> list[list[str]]:
    """Generate the corpus as CSV-ready rows (header not included)."""
    rng = np.random.default_rng(seed)

    loan_amnt = np.clip(np.round(np.exp(rng.normal(9.2, 0.6, n_rows)) / 25) * 25, 1000, 35000)
    term_60 = rng.random(n_rows) < 0.25
    grade_code = np.clip(
        np.ceil(7 * rng.beta(2.2, 3.2, n_rows)).astype(int), 1, 7
    )
    int_rate = np.clip(np.round(4.0 + 2.1 * grade_code + rng.normal(0, 0.8, n_rows), 2), 5.0, 26.0)
    months = np.where(term_60, 60, 36)
    installment = np.round(_amortized_payment(loan_amnt, int_rate, months), 2)
    annual_inc = np.clip(np.round(np.exp(rng.normal(11.0, 0.55, n_rows)), 0), 12000, 500000)
    dti = np.clip(np.round(rng.normal(16.0, 7.0, n_rows), 2), 0.0, 40.0)
    emp_idx = rng.choice(
        len(EMP_LENGTHS), n_rows,
        p=[0.05, 0.08, 0.09, 0.09, 0.08, 0.07, 0.07, 0.06, 0.06, 0.05, 0.05, 0.25],
    )
    home = rng.choice(HOME_RAW, n_rows, p=HOME_P)
    purpose = rng.choice(PURPOSE_RAW, n_rows, p=PURPOSE_P)
    verif = rng.choice(VERIF_RAW, n_rows, p=VERIF_P)
    region = rng.choice(REGIONS, n_rows, p=REGION_P)
    app_type = rng.choice(APP_TYPES, n_rows, p=APP_P)
    delinq_2yrs = rng.poisson(0.25, n_rows)
    inq_last_6mths = rng.poisson(0.9, n_rows)
    open_acc = 1 + rng.poisson(8.5, n_rows)
    pub_rec = rng.poisson(0.08, n_rows)
    revol_bal = np.round(np.exp(rng.normal(8.7, 1.1, n_rows)), 0)
    revol_util = np.clip(np.round(rng.normal(48.0, 26.0, n_rows), 1), 0.0, 120.0)
    total_acc = open_acc + rng.poisson(11.0, n_rows)
    mths_delinq = np.round(rng.uniform(1, 80, n_rows), 0)
    credit_age = np.clip(np.round(36 + rng.gamma(4.0, 30.0, n_rows), 0), 36, 480)
    monthly_debt = np.round(annual_inc / 12.0 * dti / 100.0 + rng.normal(0, 40, n_rows).clip(-100, 100), 2)
    monthly_debt = np.clip(monthly_debt, 0, None)
    acc_now_delinq = rng.poisson(0.04, n_rows)

    z_int = (int_rate - 12.0) / 4.3
    z_dti = (dti - 16.0) / 7.0
    z_inc = (np.log(annual_inc) - 11.0) / 0.55
    z_util = (revol_util - 48.0) / 26.0
    z_inq = (inq_last_6mths - 0.9) / 1.0
    z_loan = (np.log(loan_amnt) - 9.2) / 0.6
    eta = (
        -1.15
        + 0.75 * z_int
        + 0.50 * z_dti
        - 0.45 * z_inc
        + 0.35 * z_util
        + 0.25 * z_inq
        + 0.30 * delinq_2yrs
        + 0.45 * term_60
        + 0.50 * pub_rec
        + 0.25 * z_loan
        + 0.30 * (purpose == "small_business")
        - 0.15 * np.isin(home, ["OWN", "MORTGAGE"])
        + 0.45 * np.maximum(z_util, 0) * np.maximum(z_dti, 0)
    )
    p_default = 1.0 / (1.0 + np.exp(-eta))
    defaulted = rng.random(n_rows) < p_default

    miss_inc = rng.random(n_rows) < 0.02
    miss_util = rng.random(n_rows) < 0.03
    miss_delinq_age = rng.random(n_rows) < 0.55

    rows: list[list[str]] = []
    for i in range(n_rows):
        rows.append([
            f"L{i:06d}",
            f"{loan_amnt[i]:.0f}",
            " 60 months" if term_60[i] else " 36 months",
            f"{int_rate[i]:.2f}",
            f"{installment[i]:.2f}",
            GRADES[grade_code[i] - 1],
            EMP_LENGTHS[emp_idx[i]],
            str(home[i]),
            "" if miss_inc[i] else f"{annual_inc[i]:.0f}",
            str(verif[i]),
            str(purpose[i]),
            str(region[i]),
            str(app_type[i]),
            f"{dti[i]:.2f}",
            str(int(delinq_2yrs[i])),
            str(int(inq_last_6mths[i])),
            str(int(open_acc[i])),
            str(int(pub_rec[i])),
            f"{revol_bal[i]:.0f}",
            "" if miss_util[i] else f"{revol_util[i]:.1f}",
            str(int(total_acc[i])),
            "" if miss_delinq_age[i] else f"{mths_delinq[i]:.0f}",
            f"{credit_age[i]:.0f}",
            f"{monthly_debt[i]:.2f}",
            str(int(acc_now_delinq[i])),
            "1",   # policy_code: constant, dropped by cleaning
            "",    # member_note: all missing, dropped by cleaning
            "Charged Off" if defaulted[i] else "Fully Paid",
        ])
    return rows


def write_corpus(path: str | Path, n_rows: int = DEFAULT_ROWS, seed: int = 20_240_101) -> int:
    """Write the synthetic corpus CSV; returns the number of data rows."""
    rows = generate_rows(n_rows=n_rows, seed=seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(rows)
    return len(rows)
