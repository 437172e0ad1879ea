"""Experiment runner: the blocking demonstration, the two scaling studies,
and the model-check battery, plus report rendering.

Every report embeds the full config, workload, fault schedule, and seed;
re-running the embedded inputs reproduces the report exactly. Ticks and
message counts are the primary metrics; wall-clock numbers are
machine-dependent and deliberately absent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from . import modelcheck
from .config import ClusterConfig, ProtocolKind, ProtocolMode
from .metrics import MetricsCollector, ScenarioMetrics, format_factor, scaling_factor
from .sim import CrashOnSend, FaultSchedule, MsgMatch, SimResult, Workload, sim_run


@dataclass
class Report:
    scenario: str
    config: dict[str, Any]
    results: dict[str, Any]
    notes: list[str] = field(default_factory=list)

    def to_obj(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "config": self.config,
            "results": self.results,
            "notes": self.notes,
        }

    def to_records(self) -> list[str]:
        """Machine-readable form: newline-delimited JSON records."""
        head = {"scenario": self.scenario, "config": self.config, "notes": self.notes}
        lines = [json.dumps(head, sort_keys=True, separators=(",", ":"))]
        for key in sorted(self.results):
            rec = {"scenario": self.scenario, "row": key, "data": self.results[key]}
            lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
        return lines


def _run_with_metrics(
    cfg: ClusterConfig,
    workload: Workload,
    faults: FaultSchedule | None = None,
    *,
    budget: int,
    keep_trace: bool = False,
) -> tuple[SimResult, ScenarioMetrics]:
    collector = MetricsCollector()
    result = sim_run(
        cfg, workload, faults, budget=budget, keep_trace=keep_trace, sink=collector.on_event
    )
    return result, collector.finish(result.outcome)


# ---------------------------------------------------------------------------
# scenario: blocking vs nonblocking commit counts
# ---------------------------------------------------------------------------


def blocking_fault(txn: int = 1) -> FaultSchedule:
    """Kill the coordinator chain's leader right after it broadcasts the
    commit decision for the given transaction."""
    return FaultSchedule([CrashOnSend(0, 0, MsgMatch(kind="commit", txn=txn))])


def scenario_blocking(
    seed: int = 0, *, crash_after_txn: int | None = 1, keep_trace: bool = False
) -> Report:
    """Five transactions over three chains; the coordinator leader dies after
    the first commit broadcast. The blocking baseline freezes at 2 commit
    messages; the recovering protocol finishes all five (10 messages)."""
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, seed=seed)
    workload = Workload(txns=5)
    faults = blocking_fault(crash_after_txn) if crash_after_txn else None
    results: dict[str, Any] = {}
    for kind in (ProtocolKind.BLOCKING_2PC, ProtocolKind.CBT):
        run_cfg = replace(cfg, protocol=kind)
        result, metrics = _run_with_metrics(
            run_cfg, workload, faults, budget=400, keep_trace=keep_trace
        )
        results[kind.value] = {
            "metrics": metrics.to_obj(),
            "outcome": result.outcome,
            "ticks": result.ticks,
        }
    return Report(
        scenario="blocking",
        config={
            "config": cfg.to_obj(),
            "workload": workload.to_obj(),
            "faults": faults.to_obj() if faults else None,
        },
        results=results,
        notes=["coordinator fixed at chain 0; crash trigger fires after the "
               f"commit broadcast of txn {crash_after_txn}"] if crash_after_txn else [],
    )


# ---------------------------------------------------------------------------
# scenario: transaction scaling
# ---------------------------------------------------------------------------


def scenario_txn_scaling(
    workloads: list[int] | None = None, seed: int = 0, *, chains: int = 2,
    nodes_per_chain: int = 2,
) -> Report:
    workloads = workloads or [60, 120, 240, 480]
    cfg = ClusterConfig(chains=chains, nodes_per_chain=nodes_per_chain, seed=seed)
    rows: dict[str, Any] = {}
    t0 = w0 = None
    for w in workloads:
        workload = Workload(txns=w, coordinator="round-robin")
        result, metrics = _run_with_metrics(cfg, workload, budget=80 * w + 500)
        if t0 is None:
            t0, w0 = metrics.elapsed_ticks, w
        factor = scaling_factor(metrics.elapsed_ticks, w, t0, w0)
        rows[f"w{w}"] = {
            "txns": w,
            "ticks": metrics.elapsed_ticks,
            "scaling_factor": format_factor(factor),
            "metrics": metrics.to_obj(),
        }
    return Report(
        scenario="txn-scaling",
        config={"config": cfg.to_obj(), "workloads": workloads,
                "baseline": {"t0": t0, "w0": w0}},
        results=rows,
    )


# ---------------------------------------------------------------------------
# scenario: chain scaling and protocol comparison
# ---------------------------------------------------------------------------


def scenario_chain_scaling(
    chain_counts: list[int] | None = None,
    txns: int = 640,
    seed: int = 0,
    *,
    nodes_per_chain: int = 1,
) -> Report:
    """Fixed workload over a growing number of chains, for all three
    protocols. Coordinators rotate round-robin; the hub is chain 0.

    Timeouts are scaled with the hub's worst-case queueing delay and applied
    identically to every protocol, so the comparison measures message flow,
    not timer tuning. The direct protocols never get near these timers on a
    failure-free run."""
    chain_counts = chain_counts or [2, 4, 8, 16, 32, 64]
    rows: dict[str, Any] = {}
    for n in chain_counts:
        base = ClusterConfig(chains=n, nodes_per_chain=nodes_per_chain, seed=seed)
        queue_depth = -(-(n - 1) // base.hub_capacity)  # ceil division
        vote_timeout = max(10, 4 + 2 * (2 + queue_depth))
        timeouts = replace(
            base.timeouts,
            vote_timeout=vote_timeout,
            decision_timeout=2 * vote_timeout,
            recovery_interval=2 * vote_timeout,
        )
        cfg = replace(base, timeouts=timeouts)
        workload = Workload(txns=txns, coordinator="round-robin")
        per_protocol: dict[str, Any] = {}
        for kind in (ProtocolKind.BLOCKING_2PC, ProtocolKind.CBT, ProtocolKind.HUB):
            run_cfg = replace(cfg, protocol=kind)
            _, metrics = _run_with_metrics(run_cfg, workload, budget=200 * txns)
            per_protocol[kind.value] = metrics.to_obj()
        ticks_2pc = per_protocol["2pc"]["elapsed_ticks"]
        ticks_cbt = per_protocol["cbt"]["elapsed_ticks"]
        overhead = Fraction(ticks_cbt - ticks_2pc, ticks_2pc) if ticks_2pc else Fraction(0)
        per_protocol["cbt_overhead_vs_2pc_pct"] = f"{float(100 * overhead):.2f}"
        per_protocol["hub_message_ratio_vs_cbt"] = format_factor(
            Fraction(per_protocol["hub"]["total_protocol_messages"],
                     per_protocol["cbt"]["total_cross_chain_messages"])
        )
        rows[f"chains{n}"] = per_protocol
    return Report(
        scenario="chain-scaling",
        config={"chains": chain_counts, "txns": txns, "seed": seed,
                "nodes_per_chain": nodes_per_chain,
                "coordinator": "round-robin", "hub_chain": 0},
        results=rows,
    )


# ---------------------------------------------------------------------------
# scenario: model check
# ---------------------------------------------------------------------------


def scenario_modelcheck(out_dir: str | Path = "reports", seed: int = 0) -> Report:
    out_dir = Path(out_dir)
    results: dict[str, Any] = {}

    for chains in (2, 3):
        cfg = ClusterConfig(chains=chains, nodes_per_chain=2, seed=seed)
        workload = Workload(txns=1)
        safe = modelcheck.enumerate_crashes(cfg, workload)
        bound = modelcheck.liveness_bound(cfg)
        late = modelcheck.check_liveness(safe, bound)
        counts = _verdict_counts(safe)
        results[f"cbt-safe-{chains}chains"] = {
            "schedules": len(safe),
            "verdicts": counts,
            "liveness_bound_ticks": bound,
            "schedules_missing_bound": len(late),
        }

        cfg_2pc = replace(cfg, protocol=ProtocolKind.BLOCKING_2PC)
        blocked = modelcheck.enumerate_crashes(cfg_2pc, workload)
        results[f"2pc-{chains}chains"] = {
            "schedules": len(blocked),
            "verdicts": _verdict_counts(blocked),
        }

    cfg_paper = ClusterConfig(chains=3, nodes_per_chain=2, seed=seed,
                              mode=ProtocolMode.PAPER_LITERAL)
    paper = modelcheck.enumerate_delayed_decision(cfg_paper, Workload(txns=1))
    counterexamples = [v for v in paper if v.verdict == modelcheck.DISAGREEMENT]
    archive = modelcheck.archive_verdicts(
        counterexamples, out_dir / "paper_literal_counterexamples.jsonl"
    )
    results["paper-literal-delayed-decision"] = {
        "schedules": len(paper),
        "verdicts": _verdict_counts(paper),
        "counterexamples": len(counterexamples),
        "archive": str(archive),
    }

    cfg_safe = replace(cfg_paper, mode=ProtocolMode.SAFE)
    safe_delayed = modelcheck.enumerate_delayed_decision(cfg_safe, Workload(txns=1))
    results["safe-delayed-decision"] = {
        "schedules": len(safe_delayed),
        "verdicts": _verdict_counts(safe_delayed),
    }

    return Report(
        scenario="modelcheck",
        config={"seed": seed, "out_dir": str(out_dir)},
        results=results,
    )


def _verdict_counts(verdicts: list[modelcheck.Verdict]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for v in verdicts:
        counts[v.verdict] = counts.get(v.verdict, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def render_report(report: Report) -> str:
    """Human-readable table form of a report."""
    lines = [f"scenario: {report.scenario}", ""]
    for key in sorted(report.results):
        lines.append(f"[{key}]")
        lines.extend(_render_obj(report.results[key], indent="  "))
        lines.append("")
    for note in report.notes:
        lines.append(f"note: {note}")
    return "\n".join(lines)


def _render_obj(obj: Any, indent: str) -> list[str]:
    lines = []
    if isinstance(obj, dict):
        width = max((len(str(k)) for k in obj), default=0)
        for k, v in obj.items():
            if isinstance(v, (dict, list)):
                lines.append(f"{indent}{k}:")
                lines.extend(_render_obj(v, indent + "  "))
            else:
                lines.append(f"{indent}{str(k):<{width}}  {v}")
    elif isinstance(obj, list):
        for v in obj:
            lines.append(f"{indent}- {v}")
    return lines


SCENARIOS: dict[str, Callable[..., Report]] = {
    "blocking": scenario_blocking,
    "txn-scaling": scenario_txn_scaling,
    "chain-scaling": scenario_chain_scaling,
    "modelcheck": scenario_modelcheck,
}
