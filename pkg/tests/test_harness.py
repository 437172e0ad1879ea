"""Scenario harness: scaling arithmetic, report shape, reproducibility."""

import json
from fractions import Fraction

import pytest

from cbt.errors import InvalidBaselineError
from cbt.harness import (
    Report,
    render_report,
    scenario_blocking,
    scenario_chain_scaling,
    scenario_txn_scaling,
)
from cbt.metrics import format_factor, scaling_factor


def test_scaling_factor_identity_at_baseline():
    assert format_factor(scaling_factor(38, 60, 38, 60)) == "1.000"


def test_scaling_factor_perfect_linearity():
    assert format_factor(scaling_factor(76, 120, 38, 60)) == "1.000"


def test_scaling_factor_is_exact_rational():
    assert scaling_factor(57, 90, 38, 60) == Fraction(1)
    assert scaling_factor(76, 60, 38, 60) == Fraction(2)


def test_scaling_factor_zero_baseline_rejected():
    with pytest.raises(InvalidBaselineError):
        scaling_factor(10, 10, 0, 60)
    with pytest.raises(InvalidBaselineError):
        scaling_factor(10, 10, 38, 0)


def test_blocking_scenario_counts():
    report = scenario_blocking()
    assert report.results["2pc"]["metrics"]["commit_messages_at_coordinator"] == 2
    assert report.results["2pc"]["metrics"]["committed_txns"] == 1
    assert report.results["cbt"]["metrics"]["commit_messages_at_coordinator"] == 10
    assert report.results["cbt"]["metrics"]["committed_txns"] == 5
    assert report.results["2pc"]["outcome"] == "blocked"
    assert report.results["cbt"]["outcome"] == "decided"


def test_blocking_scenario_without_crash_is_symmetric():
    report = scenario_blocking(crash_after_txn=None)
    for key in ("2pc", "cbt"):
        assert report.results[key]["metrics"]["commit_messages_at_coordinator"] == 10


def test_blocking_scenario_crash_after_third_txn():
    report = scenario_blocking(crash_after_txn=3)
    assert report.results["2pc"]["metrics"]["commit_messages_at_coordinator"] == 6
    assert report.results["cbt"]["metrics"]["commit_messages_at_coordinator"] == 10


def test_txn_scaling_factors_stay_near_one():
    report = scenario_txn_scaling(workloads=[10, 20, 40])
    for row in report.results.values():
        assert 0.97 <= float(row["scaling_factor"]) <= 1.03


def test_chain_scaling_small_instance():
    report = scenario_chain_scaling(chain_counts=[2, 4], txns=12)
    for row in report.results.values():
        assert float(row["cbt_overhead_vs_2pc_pct"]) <= 5.0
        assert float(row["hub_message_ratio_vs_cbt"]) >= 2.0
        assert row["hub"]["elapsed_ticks"] > row["cbt"]["elapsed_ticks"]
        for proto in ("2pc", "cbt", "hub"):
            assert row[proto]["outcome"] == "decided"


def test_report_rerun_reproduces_records():
    a = scenario_blocking(seed=3)
    b = scenario_blocking(seed=3)
    assert a.to_records() == b.to_records()


def test_report_renders_tables_and_records():
    report = scenario_blocking()
    text = render_report(report)
    assert "scenario: blocking" in text and "[cbt]" in text
    records = report.to_records()
    assert all(json.loads(line) for line in records)
    head = json.loads(records[0])
    assert head["config"]["config"]["chains"] == 3
