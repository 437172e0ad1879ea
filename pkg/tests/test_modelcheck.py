"""Schedule enumeration: agreement, blocking, and the literal-recovery
counterexample."""

import json

import pytest

from cbt.config import ClusterConfig, ProtocolKind, ProtocolMode
from cbt.errors import SizeLimitError
from cbt import modelcheck as mc
from cbt.sim import Workload


def verdict_set(verdicts):
    return {v.verdict for v in verdicts}


def test_enumeration_refuses_large_instances():
    with pytest.raises(SizeLimitError):
        mc.enumerate_crashes(ClusterConfig(chains=4, nodes_per_chain=2), Workload(txns=1))
    with pytest.raises(SizeLimitError):
        mc.enumerate_crashes(ClusterConfig(chains=2, nodes_per_chain=3), Workload(txns=1))
    with pytest.raises(SizeLimitError):
        mc.enumerate_crashes(ClusterConfig(chains=2, nodes_per_chain=2), Workload(txns=2))


def test_safe_mode_single_crash_all_agree_and_decide():
    for chains in (2, 3):
        cfg = ClusterConfig(chains=chains, nodes_per_chain=2)
        verdicts = mc.enumerate_crashes(cfg, Workload(txns=1))
        assert verdict_set(verdicts) == {mc.DECIDED}


def test_blocking_2pc_blocks_between_log_and_broadcast():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, protocol=ProtocolKind.BLOCKING_2PC)
    verdicts = mc.enumerate_crashes(cfg, Workload(txns=1))
    assert mc.DISAGREEMENT not in verdict_set(verdicts)
    # the canonical blocking window: coordinator leader dies after logging
    # the decision, before any commit message leaves (tick 2, mid position)
    window = [
        v for v in verdicts
        if v.schedule.events[0].chain == 0
        and v.schedule.events[0].node == 0
        and v.schedule.events[0].pos == "mid"
        and v.schedule.events[0].at_tick == 2
    ]
    assert len(window) == 1
    assert window[0].verdict == mc.BLOCKED
    assert set(window[0].uncertain) == {"1.0", "2.0"}


def test_safe_mode_meets_the_liveness_bound_everywhere():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2)
    verdicts = mc.enumerate_crashes(cfg, Workload(txns=1))
    bound = mc.liveness_bound(cfg)
    assert mc.check_liveness(verdicts, bound) == []


def test_blocking_2pc_misses_liveness_for_some_schedule():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, protocol=ProtocolKind.BLOCKING_2PC)
    verdicts = mc.enumerate_crashes(cfg, Workload(txns=1))
    bound = mc.liveness_bound(cfg)
    assert len(mc.check_liveness(verdicts, bound)) > 0


def test_paper_literal_recovery_loses_agreement_under_delay():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, mode=ProtocolMode.PAPER_LITERAL)
    verdicts = mc.enumerate_delayed_decision(cfg, Workload(txns=1))
    bad = [v for v in verdicts if v.verdict == mc.DISAGREEMENT]
    assert bad, "expected at least one disagreement schedule"
    assert any("conflicting decisions" in c for v in bad for c in v.conflicts)


def test_safe_mode_survives_the_same_delay_schedules():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, mode=ProtocolMode.SAFE)
    verdicts = mc.enumerate_delayed_decision(cfg, Workload(txns=1))
    assert verdict_set(verdicts) == {mc.DECIDED}


def test_archive_is_replayable_json(tmp_path):
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, mode=ProtocolMode.PAPER_LITERAL)
    verdicts = mc.enumerate_delayed_decision(cfg, Workload(txns=1))
    path = mc.archive_verdicts(verdicts, tmp_path / "cx.jsonl")
    lines = path.read_text().splitlines()
    assert len(lines) == len(verdicts)
    for line in lines:
        obj = json.loads(line)
        assert {"schedule", "verdict", "outcome"} <= obj.keys()


def test_sim_enumerate_dispatch():
    cfg = ClusterConfig(chains=2, nodes_per_chain=1)
    assert mc.sim_enumerate(cfg, Workload(txns=1), "single-crash")
    with pytest.raises(ValueError):
        mc.sim_enumerate(cfg, Workload(txns=1), "no-such-template")
