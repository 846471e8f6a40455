"""The bundled LendingClub schema against a structurally faithful fake file.

The real 2007-2011 corpus is proprietary, so these tests exercise the same
pipeline path on a small CSV that mimics its quirks: percent-decorated
numerics, blank emp_length, NONE home ownership, Source Verified, active
loans that must be filtered, and post-origination columns the schema drops.
"""

from __future__ import annotations

import csv

import numpy as np
import pytest

from attralign.data import prepare
from attralign.errors import TargetError
from attralign.schema import bundled_schema_path, load_schema

STATES = ["CA", "NY", "TX", "FL", "IL", "MA", "WA", "OH", "GA", "NJ"]
PURPOSES = [
    "debt_consolidation", "credit_card", "home_improvement", "major_purchase",
    "small_business", "car", "wedding", "medical", "moving", "vacation",
    "house", "other", "education", "renewable_energy",
]


def write_fake_lendingclub(path, n=400, seed=0):
    rng = np.random.default_rng(seed)
    schema = load_schema(bundled_schema_path("lendingclub_2007_2011"))
    names = [e.name for e in schema.entries]
    names.insert(names.index("issue_d") + 1, "loan_status")

    grades = "ABCDEFG"
    emp_levels = ["n/a", "< 1 year", "1 year", "5 years", "10+ years", ""]
    statuses = [
        "Fully Paid", "Fully Paid", "Fully Paid", "Charged Off", "Current",
        "Does not meet the credit policy. Status:Fully Paid",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            grade = grades[rng.integers(0, 7)]
            row = {
                "id": str(1000 + i),
                "member_id": str(2000 + i),
                "loan_amnt": str(int(rng.integers(1, 36)) * 1000),
                "funded_amnt": str(int(rng.integers(1, 36)) * 1000),
                "funded_amnt_inv": f"{rng.uniform(500, 35000):.2f}",
                "term": " 36 months" if rng.random() < 0.75 else " 60 months",
                "int_rate": f"{rng.uniform(5, 25):.2f}%",
                "installment": f"{rng.uniform(30, 1300):.2f}",
                "grade": grade,
                "sub_grade": f"{grade}{rng.integers(1, 6)}",
                "emp_title": "Analyst",
                "emp_length": emp_levels[rng.integers(0, len(emp_levels))],
                "home_ownership": ["RENT", "MORTGAGE", "OWN", "OTHER", "NONE"][
                    rng.integers(0, 5)
                ],
                "annual_inc": "" if rng.random() < 0.02 else f"{rng.uniform(2e4, 2e5):.0f}",
                "verification_status": ["Not Verified", "Verified", "Source Verified"][
                    rng.integers(0, 3)
                ],
                "issue_d": "Dec-2011",
                "loan_status": statuses[rng.integers(0, len(statuses))],
                "pymnt_plan": "n",
                "url": f"https://lender.example/loan/{1000 + i}",
                "desc": "",
                "purpose": PURPOSES[rng.integers(0, len(PURPOSES))],
                "title": "Loan",
                "zip_code": f"{rng.integers(100, 999)}xx",
                "addr_state": STATES[rng.integers(0, len(STATES))],
                "dti": f"{rng.uniform(0, 35):.2f}",
                "delinq_2yrs": str(int(rng.poisson(0.2))),
                "earliest_cr_line": "Jan-1995",
                "inq_last_6mths": str(int(rng.poisson(1.0))),
                "mths_since_last_delinq": "" if rng.random() < 0.6 else str(int(rng.integers(1, 80))),
                "mths_since_last_record": "" if rng.random() < 0.9 else str(int(rng.integers(1, 120))),
                "open_acc": str(int(rng.integers(1, 30))),
                "pub_rec": str(int(rng.poisson(0.1))),
                "revol_bal": str(int(rng.integers(0, 100000))),
                "revol_util": "" if rng.random() < 0.03 else f"{rng.uniform(0, 110):.1f}%",
                "total_acc": str(int(rng.integers(2, 60))),
                "initial_list_status": "f",
                "out_prncp": "0.00",
                "out_prncp_inv": "0.00",
                "total_pymnt": f"{rng.uniform(0, 40000):.2f}",
                "total_pymnt_inv": f"{rng.uniform(0, 40000):.2f}",
                "total_rec_prncp": f"{rng.uniform(0, 35000):.2f}",
                "total_rec_int": f"{rng.uniform(0, 9000):.2f}",
                "total_rec_late_fee": "0.00",
                "recoveries": "0.00",
                "collection_recovery_fee": "0.00",
                "last_pymnt_d": "Jan-2015",
                "last_pymnt_amnt": f"{rng.uniform(0, 3000):.2f}",
                "next_pymnt_d": "",
                "last_credit_pull_d": "Jan-2016",
                "collections_12_mths_ex_med": "0",
                "mths_since_last_major_derog": "",
                "policy_code": "1",
                "application_type": "INDIVIDUAL",
                "pub_rec_bankruptcies": "" if rng.random() < 0.05 else str(int(rng.poisson(0.05))),
                "tax_liens": str(int(rng.poisson(0.03))),
                "delinq_amnt": "0",
                "acc_now_delinq": "0",
                "chargeoff_within_12_mths": "0",
            }
            writer.writerow([row[name] for name in names])
    return path


def test_lendingclub_schema_encodes_fake_corpus(tmp_path):
    csv_path = write_fake_lendingclub(tmp_path / "lc.csv")
    ds, schema, split, report = prepare(
        csv_path, bundled_schema_path("lendingclub_2007_2011"),
        ratio=0.7, seed=42, filter_target=True,
    )
    assert len(ds.original_names) == 24
    assert report["rows_filtered_by_target"] > 0
    assert not np.isnan(ds.matrix).any()
    # percent columns parsed to plain numbers
    int_rate_col = ds.group_index["int_rate"][0]
    assert 5.0 <= ds.matrix[:, int_rate_col].mean() <= 25.0
    # region consolidation reached all four declared levels
    region_cols = ds.group_index["addr_state"]
    assert len(region_cols) == 4
    assert np.all(ds.matrix[:, region_cols].sum(axis=1) == 1.0)


def test_unfiltered_active_loans_fail_closed(tmp_path):
    csv_path = write_fake_lendingclub(tmp_path / "lc.csv")
    with pytest.raises(TargetError, match="filter rows upstream"):
        prepare(csv_path, bundled_schema_path("lendingclub_2007_2011"), seed=0)
