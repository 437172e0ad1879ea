"""Baseline protocols: the blocking comparison and the hub's structural
costs."""

from cbt.baselines import run_blocking_2pc, run_hub, run_protocol
from cbt.config import ClusterConfig, ProtocolKind
from cbt.metrics import MetricsCollector
from cbt.sim import CrashNode, FaultSchedule, Workload
from cbt.harness import blocking_fault


def run_collect(fn, cfg, workload, faults=None, budget=2000):
    collector = MetricsCollector()
    result = fn(cfg, workload, faults, budget=budget, keep_trace=True,
                sink=collector.on_event)
    return result, collector.finish(result.outcome)


def test_blocking_2pc_freezes_after_coordinator_crash():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2)
    result, metrics = run_collect(run_blocking_2pc, cfg, Workload(txns=5),
                                  blocking_fault(), budget=300)
    assert result.outcome == "blocked"
    assert metrics.committed_txns == 1
    assert metrics.commit_messages_at_coordinator == 2


def test_blocking_2pc_without_faults_commits_all():
    cfg = ClusterConfig(chains=3, nodes_per_chain=2)
    result, metrics = run_collect(run_blocking_2pc, cfg, Workload(txns=5), budget=300)
    assert result.outcome == "decided"
    assert metrics.committed_txns == 5
    assert metrics.commit_messages_at_coordinator == 10


def test_2pc_and_cbt_match_exactly_on_failure_free_runs():
    cfg = ClusterConfig(chains=4, nodes_per_chain=2)
    workload = Workload(txns=4, coordinator="round-robin")
    out = {}
    for kind in (ProtocolKind.BLOCKING_2PC, ProtocolKind.CBT):
        result, metrics = run_collect(
            lambda c, w, f, **kw: run_protocol(kind, c, w, f, **kw), cfg, workload)
        decisions = {
            str(nid): node.txn_phase(1) for nid, node in result.nodes.items()
        }
        out[kind] = (metrics.committed_txns, metrics.total_cross_chain_messages,
                     metrics.commit_messages_at_coordinator, decisions)
    a, b = out.values()
    assert a == b  # identical decisions and identical cross-chain counts


def test_hub_doubles_every_logical_message():
    cfg = ClusterConfig(chains=3, nodes_per_chain=1)
    result, metrics = run_collect(run_hub, cfg, Workload(txns=1), budget=400)
    assert result.outcome == "decided"
    assert metrics.total_cross_chain_messages == 6  # logical: 3n, n=2
    assert metrics.total_protocol_messages == 12  # every message takes two hops


def test_hub_traces_have_no_direct_edges():
    cfg = ClusterConfig(chains=3, nodes_per_chain=1)
    result, _ = run_collect(run_hub, cfg, Workload(txns=2), budget=400)
    protocol_kinds = {"vote-request", "vote-yes", "vote-no", "commit", "abort",
                      "decision-require", "decision-reply"}
    for evt in result.trace:
        if evt["e"] == "send" and evt["kind"] in protocol_kinds:
            assert evt.get("leg") in (1, 2)  # everything transits the relay


def test_hub_crash_blocks_in_flight_transactions():
    cfg = ClusterConfig(chains=3, nodes_per_chain=1)
    faults = FaultSchedule([CrashNode(0, 0, 1, "start")])
    result, metrics = run_collect(run_hub, cfg, Workload(txns=1), faults, budget=300)
    assert result.outcome == "blocked"
    assert metrics.committed_txns == 0


def test_hub_serializes_with_bounded_forwarding():
    cfg = ClusterConfig(chains=6, nodes_per_chain=1, hub_capacity=2)
    result, metrics = run_collect(run_hub, cfg, Workload(txns=1), budget=400)
    assert result.outcome == "decided"
    # 5 vote requests through a 2-per-tick relay cannot land in one tick
    deliver_ticks = [e["t"] for e in result.trace
                     if e["e"] == "deliver" and e["kind"] == "vote-request"
                     and e.get("leg") == 2]
    assert max(deliver_ticks) - min(deliver_ticks) >= 2
