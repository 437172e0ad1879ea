"""Exhaustive schedule enumeration: the mechanized stand-in for a safety
proof.

For a small instance (at most 3 chains, 2 nodes per chain, 1 transaction)
we enumerate every single-crash point (each tick of the failure-free
baseline x each node x before/after-processing position), run each
schedule to quiescence, and classify the result. Agreement is checked over
the durable logs of *all* nodes, crashed ones included: a decision record
on a dead disk still counts, because that node may come back.

Verdicts: "agreement+decided", "agreement+blocked", "DISAGREEMENT".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .config import ClusterConfig
from .dtlog import DECISION_RECORDS, decision_of
from .errors import SizeLimitError
from .sim import (
    CrashNode,
    DelayMessage,
    FaultSchedule,
    MsgMatch,
    SimResult,
    Workload,
    sim_run,
)

DECIDED = "agreement+decided"
BLOCKED = "agreement+blocked"
DISAGREEMENT = "DISAGREEMENT"


@dataclass
class Verdict:
    schedule: FaultSchedule
    verdict: str
    outcome: str
    crash_tick: int | None
    last_decide_tick: int
    conflicts: list[str] = field(default_factory=list)
    uncertain: list[str] = field(default_factory=list)

    def to_obj(self) -> dict[str, Any]:
        return {
            "schedule": self.schedule.to_obj(),
            "verdict": self.verdict,
            "outcome": self.outcome,
            "crash_tick": self.crash_tick,
            "last_decide_tick": self.last_decide_tick,
            "conflicts": self.conflicts,
            "uncertain": self.uncertain,
        }


def classify(result: SimResult, expected_txns: int = 1) -> tuple[str, list[str], list[str]]:
    """Classify a finished run from durable logs and final node states.

    Blocked means a surviving node is stuck in its uncertain period or some
    transaction never reached a decision anywhere; a cluster that decided
    everything but lost a chain leader afterwards still counts as decided.
    """
    conflicts: list[str] = []
    decisions: dict[int, dict[str, str]] = {}
    for nid, node in sorted(result.nodes.items()):
        for rec in node.dtlog.records:
            if rec.kind in DECISION_RECORDS:
                decisions.setdefault(rec.txn, {})[str(nid)] = decision_of(rec.kind).value
        for v in node.violations:
            conflicts.append(f"{nid}: {v}")
    for txn, per_node in sorted(decisions.items()):
        kinds = set(per_node.values())
        if len(kinds) > 1:
            conflicts.append(f"txn {txn}: conflicting decisions {per_node}")
    uncertain = [
        str(nid)
        for nid, node in sorted(result.nodes.items())
        if nid not in result.crashed and node.uncertain_txns()
    ]
    if conflicts:
        return DISAGREEMENT, conflicts, uncertain
    if not uncertain and len(decisions) >= expected_txns:
        return DECIDED, conflicts, uncertain
    return BLOCKED, conflicts, uncertain


def _check_size(cfg: ClusterConfig, workload: Workload) -> None:
    if cfg.chains > 3 or cfg.nodes_per_chain > 2 or workload.txns > 1:
        raise SizeLimitError(
            "enumeration is limited to <=3 chains, <=2 nodes/chain, 1 txn"
        )


def _baseline_span(cfg: ClusterConfig, workload: Workload) -> int:
    base = sim_run(cfg, workload, keep_trace=False, budget=500)
    return base.ticks


def enumerate_crashes(
    cfg: ClusterConfig, workload: Workload, *, budget: int = 300
) -> list[Verdict]:
    """Every single-crash schedule: (tick of baseline span) x node x position."""
    _check_size(cfg, workload)
    span = _baseline_span(cfg, workload)
    verdicts: list[Verdict] = []
    for tick in range(span + 1):
        for c in range(cfg.chains):
            for n in range(cfg.nodes_per_chain):
                for pos in ("start", "mid"):
                    sched = FaultSchedule([CrashNode(c, n, tick, pos)])
                    result = sim_run(cfg, workload, sched, keep_trace=False, budget=budget)
                    verdict, conflicts, uncertain = classify(result, workload.txns)
                    verdicts.append(
                        Verdict(
                            schedule=sched,
                            verdict=verdict,
                            outcome=result.outcome,
                            crash_tick=tick,
                            last_decide_tick=result.last_decide_tick,
                            conflicts=conflicts,
                            uncertain=uncertain,
                        )
                    )
    return verdicts


def enumerate_delayed_decision(
    cfg: ClusterConfig, workload: Workload, *, delay: int | None = None, budget: int = 500
) -> list[Verdict]:
    """Delay all decision-carrying traffic into one chain past the recovery
    window, for every chain. Under the literal recovery rule the uncertain
    participant aborts unilaterally and the late COMMIT then contradicts it."""
    _check_size(cfg, workload)
    t = cfg.timeouts
    if delay is None:
        delay = t.decision_timeout + 2 * t.recovery_interval + 10
    verdicts: list[Verdict] = []
    coord = workload.coordinator_of(1, cfg.chains)
    for chain in range(cfg.chains):
        if chain == coord:
            continue
        events = [
            DelayMessage(MsgMatch(kind=kind, to_chain=chain), ticks=delay)
            for kind in ("commit", "abort", "decision-reply")
        ]
        sched = FaultSchedule(events)
        result = sim_run(cfg, workload, sched, keep_trace=False, budget=budget + delay)
        verdict, conflicts, uncertain = classify(result, workload.txns)
        verdicts.append(
            Verdict(
                schedule=sched,
                verdict=verdict,
                outcome=result.outcome,
                crash_tick=None,
                last_decide_tick=result.last_decide_tick,
                conflicts=conflicts,
                uncertain=uncertain,
            )
        )
    return verdicts


def sim_enumerate(
    cfg: ClusterConfig,
    workload: Workload,
    template: str = "single-crash",
    **kwargs: Any,
) -> list[Verdict]:
    if template == "single-crash":
        return enumerate_crashes(cfg, workload, **kwargs)
    if template == "delayed-decision":
        return enumerate_delayed_decision(cfg, workload, **kwargs)
    raise ValueError(f"unknown enumeration template: {template}")


def liveness_bound(cfg: ClusterConfig) -> int:
    t = cfg.timeouts
    return t.election_ticks(cfg.delivery_delay) + t.recovery_interval + cfg.delivery_delay


def check_liveness(verdicts: Iterable[Verdict], bound: int) -> list[Verdict]:
    """Return the schedules whose surviving nodes missed the decision bound."""
    late = []
    for v in verdicts:
        if v.verdict != DECIDED:
            late.append(v)
            continue
        crash = v.crash_tick or 0
        if v.last_decide_tick > crash + bound:
            late.append(v)
    return late


def archive_verdicts(verdicts: Iterable[Verdict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for v in verdicts:
            fh.write(json.dumps(v.to_obj(), sort_keys=True) + "\n")
    return path
