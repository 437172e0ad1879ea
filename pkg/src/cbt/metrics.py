"""Run metrics: the units the experiment figures are measured in.

The commit counter mirrors the operator console's reading: batches of n
commit messages at a coordinator mean successful transactions. It counts
distinct (transaction, participant chain) commit sends from that
transaction's coordinator chain, so a replacement leader re-broadcasting an
already-delivered decision does not inflate the count and the batch rule
stays sound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .errors import InvalidBaselineError

_PROTOCOL = {
    "vote-request",
    "vote-yes",
    "vote-no",
    "commit",
    "abort",
    "decision-require",
    "decision-reply",
}
_HEARTBEAT = {"heartbeat-ping", "heartbeat-ack"}


@dataclass
class ScenarioMetrics:
    committed_txns: int = 0
    commit_messages_at_coordinator: int = 0
    total_cross_chain_messages: int = 0
    total_protocol_messages: int = 0  # relay hops count individually in hub runs
    heartbeat_messages: int = 0
    elapsed_ticks: int = 0
    outcome: str = ""

    def to_obj(self) -> dict[str, Any]:
        return dict(self.__dict__)


class MetricsCollector:
    """Streaming consumer of trace events; works with trace retention off."""

    def __init__(self):
        self.coordinator_of: dict[int, int] = {}
        self.committed: set[int] = set()
        self.commit_sends: set[tuple[int, int]] = set()
        self.cross_chain = 0
        self.protocol_sends = 0
        self.heartbeats = 0
        self.last_decide_tick = 0

    def on_event(self, evt: dict[str, Any]) -> None:
        e = evt["e"]
        if e == "send":
            kind = evt["kind"]
            if kind in _HEARTBEAT:
                self.heartbeats += 1
                return
            if kind not in _PROTOCOL:
                return
            self.protocol_sends += 1
            leg = evt.get("leg")
            if leg == 2:
                return  # second relay hop: already counted as a logical send
            if evt["fc"] != evt["dtc"]:
                self.cross_chain += 1
            if kind == "commit":
                coord = self.coordinator_of.get(evt["txn"])
                if coord is not None and evt["fc"] == coord:
                    self.commit_sends.add((evt["txn"], evt["dtc"]))
        elif e == "submit":
            self.coordinator_of[evt["txn"]] = evt["coordinator"]
        elif e == "decide":
            self.last_decide_tick = max(self.last_decide_tick, evt["t"])
            if evt["decision"] == "commit":
                txn = evt["txn"]
                coord = self.coordinator_of.get(txn)
                node_chain = int(evt["node"].split(".")[0])
                if coord is not None and node_chain == coord:
                    self.committed.add(txn)

    def finish(self, outcome: str = "") -> ScenarioMetrics:
        return ScenarioMetrics(
            committed_txns=len(self.committed),
            commit_messages_at_coordinator=len(self.commit_sends),
            total_cross_chain_messages=self.cross_chain,
            total_protocol_messages=self.protocol_sends,
            heartbeat_messages=self.heartbeats,
            elapsed_ticks=self.last_decide_tick,
            outcome=outcome,
        )


def scaling_factor(t: int, w: int, t0: int, w0: int) -> Fraction:
    """Normalized runtime growth relative to workload growth: (t/t0)/(w/w0).

    1.0 means perfectly linear scaling. Exact rational arithmetic; format
    with format_factor for the 3-decimal report form.
    """
    if t0 <= 0 or w0 <= 0 or w <= 0:
        raise InvalidBaselineError("scaling factor needs positive baselines")
    return Fraction(t, t0) / Fraction(w, w0)


def format_factor(f: Fraction) -> str:
    return f"{float(f):.3f}"
