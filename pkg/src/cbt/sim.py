"""Deterministic discrete-event simulator with scripted fault injection.

Time is logical ticks. Within a tick: start-of-tick faults apply, due
messages are delivered (per sender-receiver pair FIFO, cross-pair order
drawn from a seeded RNG), the hub relay forwards its bounded batch, due
timers fire, the workload driver acts, mid-tick crashes discard staged
output, and finally every surviving node's staged messages enter the
network with next-tick delivery. Identical (config, workload, faults,
seed) inputs produce byte-identical traces.

A mid-tick crash models the classic failure window: the node's log appends
from this tick are durable but none of its outgoing messages survive.
"""

from __future__ import annotations

import heapq
import json
import random
from collections import deque
from dataclasses import dataclass, field, replace as dc_replace
from typing import Any, Callable, Iterable

from .config import ClusterConfig, ProtocolKind
from .dtlog import DTLog
from .errors import DuplicateTransactionError, InvalidRequestError, NotLeaderError
from .messages import Message, MessageKind, NodeId, PROTOCOL_KINDS
from .node import Node
from .replication import NodeRole

# ---------------------------------------------------------------------------
# fault schedule
# ---------------------------------------------------------------------------


@dataclass
class MsgMatch:
    """Field filter for drop/delay/trigger rules; None fields match anything."""

    kind: str | None = None
    txn: int | None = None
    from_chain: int | None = None
    to_chain: int | None = None

    def matches(self, msg: Message) -> bool:
        if self.kind is not None and msg.kind.value != self.kind:
            return False
        if self.txn is not None and msg.txn != self.txn:
            return False
        if self.from_chain is not None and msg.frm.chain != self.from_chain:
            return False
        if self.to_chain is not None and msg.to.chain != self.to_chain:
            return False
        return True

    def to_obj(self) -> dict[str, Any]:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class CrashNode:
    chain: int
    node: int
    at_tick: int
    pos: str = "start"  # "start": before processing; "mid": after processing, before sends

    def to_obj(self):
        return {"fault": "crash", "chain": self.chain, "node": self.node,
                "at_tick": self.at_tick, "pos": self.pos}


@dataclass
class RestartNode:
    chain: int
    node: int
    at_tick: int

    def to_obj(self):
        return {"fault": "restart", "chain": self.chain, "node": self.node,
                "at_tick": self.at_tick}


@dataclass
class DropMessage:
    match: MsgMatch
    count: int = 1
    skip: int = 0  # let this many matches through before dropping
    _seen: int = field(default=0, repr=False, compare=False)

    def to_obj(self):
        return {"fault": "drop", "match": self.match.to_obj(), "count": self.count,
                "skip": self.skip}


@dataclass
class DelayMessage:
    match: MsgMatch
    ticks: int
    count: int = -1  # -1: every match
    _seen: int = field(default=0, repr=False, compare=False)

    def to_obj(self):
        return {"fault": "delay", "match": self.match.to_obj(), "ticks": self.ticks,
                "count": self.count}


@dataclass
class CrashOnSend:
    """Crash a node at the end of the tick in which it sends a matching
    message: the broadcast goes out, then the node dies."""

    chain: int
    node: int
    match: MsgMatch

    def to_obj(self):
        return {"fault": "crash-on-send", "chain": self.chain, "node": self.node,
                "match": self.match.to_obj()}


@dataclass
class FaultSchedule:
    events: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        timed = [e for e in self.events if hasattr(e, "at_tick")]
        timed.sort(key=lambda e: e.at_tick)
        rest = [e for e in self.events if not hasattr(e, "at_tick")]
        self.events = timed + rest

    def to_obj(self):
        return {"seed": self.seed, "events": [e.to_obj() for e in self.events]}


# ---------------------------------------------------------------------------
# workload
# ---------------------------------------------------------------------------


@dataclass
class Workload:
    """Sequential transaction stream: one transaction in flight at a time;
    the next is submitted once the previous one settled everywhere that can
    still settle. Every transaction spans all chains."""

    txns: int
    coordinator: str = "fixed"  # or "round-robin"
    fixed_chain: int = 0
    votes: dict[int, dict[int, bool]] = field(default_factory=dict)

    def coordinator_of(self, txn: int, chains: int) -> int:
        if self.coordinator == "round-robin":
            return (txn - 1) % chains
        return self.fixed_chain

    def to_obj(self):
        return {
            "txns": self.txns,
            "coordinator": self.coordinator,
            "fixed_chain": self.fixed_chain,
            "votes": {str(t): {str(c): v for c, v in m.items()} for t, m in self.votes.items()},
        }


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------


@dataclass
class SimResult:
    outcome: str  # "decided" | "blocked"
    ticks: int
    trace: list[dict[str, Any]] | None
    nodes: dict[NodeId, Node]
    crashed: set[NodeId]
    snapshots: dict[str, Any]
    last_decide_tick: int


def trace_to_jsonl(trace: Iterable[dict[str, Any]]) -> bytes:
    lines = [json.dumps(evt, sort_keys=True, separators=(",", ":")) for evt in trace]
    return ("\n".join(lines) + "\n").encode() if lines else b""


class Simulator:
    def __init__(
        self,
        cfg: ClusterConfig,
        workload: Workload,
        faults: FaultSchedule | None = None,
        *,
        keep_trace: bool = True,
        sink: Callable[[dict[str, Any]], None] | None = None,
    ):
        if cfg.chains < 1 or cfg.nodes_per_chain < 1:
            raise InvalidRequestError("cluster needs >=1 chain and >=1 node per chain")
        if workload.txns > 0 and cfg.chains < 2:
            raise InvalidRequestError("cross-chain transactions need >=2 chains")
        self.cfg = cfg
        self.workload = workload
        self.faults = faults or FaultSchedule()
        self.keep_trace = keep_trace
        self.sink = sink
        self.rng = random.Random(cfg.seed * 1_000_003 + self.faults.seed)

        votes = workload.votes
        self.nodes: dict[NodeId, Node] = {}
        for c in range(cfg.chains):
            for i in range(cfg.nodes_per_chain):
                nid = NodeId(c, i)
                self.nodes[nid] = Node(nid, cfg, dtlog=DTLog(), votes=votes)
        self.crashed: set[NodeId] = set()

        # network: per-pair FIFO with monotone effective due ticks
        self.queues: dict[tuple[NodeId, NodeId], deque] = {}
        self.ready_heap: list[tuple[int, int, tuple[NodeId, NodeId]]] = []
        self._heap_serial = 0
        self.proto_in_flight = 0
        self.repl_in_flight = 0

        # hub relay
        self.relay: deque[Message] = deque()

        # timers
        self.timers: dict[int, list[tuple[NodeId, tuple]]] = {}
        self.timer_ticks: list[int] = []

        self.trace: list[dict[str, Any]] = []
        self._seq = 0
        self.now = 0
        self.last_decide_tick = -1

        self._drops = [e for e in self.faults.events if isinstance(e, DropMessage)]
        self._delays = [e for e in self.faults.events if isinstance(e, DelayMessage)]
        self._triggers = [e for e in self.faults.events if isinstance(e, CrashOnSend)]
        self._timed = [e for e in self.faults.events if isinstance(e, (CrashNode, RestartNode))]

        # driver state
        self._submitted = 0
        self._participants: dict[int, frozenset[int]] = {}

    # -- trace -----------------------------------------------------------

    def _emit(self, etype: str, **fields: Any) -> None:
        evt = {"t": self.now, "seq": self._seq, "e": etype, **fields}
        self._seq += 1
        if self.keep_trace:
            self.trace.append(evt)
        if self.sink is not None:
            self.sink(evt)

    def _flush_events(self, node: Node) -> None:
        staged = node._staged.events
        if staged:
            node._staged.events = []
            for evt in staged:
                if evt["e"] == "decide":
                    self.last_decide_tick = self.now
                self._emit(evt.pop("e"), **evt)

    # -- network -----------------------------------------------------------

    def _enqueue(self, msg: Message, due: int, leg: int | None = None,
                 dest_chain: int | None = None) -> None:
        pair = (msg.frm, msg.to)
        q = self.queues.get(pair)
        if q is None:
            q = self.queues[pair] = deque()
        if q:
            due = max(due, q[-1][0])
        q.append((due, msg, leg, dest_chain))
        if len(q) == 1:
            self._heap_serial += 1
            heapq.heappush(self.ready_heap, (due, self._heap_serial, pair))
        if msg.kind in PROTOCOL_KINDS:
            self.proto_in_flight += 1
        elif msg.kind in (MessageKind.REPLICATE, MessageKind.REPLICATE_ACK):
            self.repl_in_flight += 1

    def _count_delivered(self, msg: Message) -> None:
        if msg.kind in PROTOCOL_KINDS:
            self.proto_in_flight -= 1
        elif msg.kind in (MessageKind.REPLICATE, MessageKind.REPLICATE_ACK):
            self.repl_in_flight -= 1

    def _msg_fields(self, msg: Message, leg: int | None, dest_chain: int | None) -> dict:
        fields = {
            "kind": msg.kind.value,
            "frm": str(msg.frm),
            "to": str(msg.to),
            "fc": msg.frm.chain,
            "tc": msg.to.chain,
            "txn": msg.txn,
            "term": msg.term,
            "dtc": msg.to.chain if dest_chain is None else dest_chain,
        }
        if leg is not None:
            fields["leg"] = leg
        return fields

    # -- main loop -----------------------------------------------------------

    def run(self, budget: int = 10_000) -> SimResult:
        outcome = "blocked"
        self.now = 0
        while self.now <= budget:
            self._tick()
            if self._quiesced():
                outcome = "decided"
                break
            nxt = self._next_tick()
            if nxt is None:
                break  # stalemate: nothing pending can ever wake the cluster
            self.now = nxt
        ticks = self.now
        snapshots = {
            str(nid): {**node.snapshot(), "crashed": nid in self.crashed}
            for nid, node in sorted(self.nodes.items())
        }
        return SimResult(
            outcome=outcome,
            ticks=ticks,
            trace=self.trace if self.keep_trace else None,
            nodes=self.nodes,
            crashed=set(self.crashed),
            snapshots=snapshots,
            last_decide_tick=self.last_decide_tick,
        )

    def _tick(self) -> None:
        t = self.now
        if t == 0:
            for nid in sorted(self.nodes):
                self.nodes[nid].on_start(0)
                self._flush_events(self.nodes[nid])

        # 1. start-of-tick faults
        for ev in self._timed:
            if ev.at_tick != t:
                continue
            nid = NodeId(ev.chain, ev.node)
            if isinstance(ev, CrashNode) and ev.pos == "start":
                if nid not in self.crashed:
                    self.crashed.add(nid)
                    self._emit("crash", node=str(nid), pos="start")
            elif isinstance(ev, RestartNode):
                if nid in self.crashed:
                    self.crashed.discard(nid)
                    self._emit("restart", node=str(nid))
                    self.nodes[nid].on_restart(t)
                    self._flush_events(self.nodes[nid])

        # 2. deliveries (seeded cross-pair interleave, FIFO within pair)
        ready: list[tuple[NodeId, NodeId]] = []
        while self.ready_heap and self.ready_heap[0][0] <= t:
            _, _, pair = heapq.heappop(self.ready_heap)
            ready.append(pair)
        while ready:
            idx = self.rng.randrange(len(ready)) if len(ready) > 1 else 0
            pair = ready[idx]
            due, msg, leg, dest_chain = self.queues[pair].popleft()
            q = self.queues[pair]
            if q:
                if q[0][0] <= t:
                    pass  # pair stays ready at same position
                else:
                    self._heap_serial += 1
                    heapq.heappush(self.ready_heap, (q[0][0], self._heap_serial, pair))
                    ready.pop(idx)
            else:
                ready.pop(idx)
            self._deliver(msg, leg, dest_chain)

        # 3. relay forwarding (hub mode): bounded batch per tick
        if self.relay and self.cfg.protocol is ProtocolKind.HUB:
            hub_leader = self.current_leader(self.cfg.hub_chain)
            if hub_leader is not None:
                for _ in range(min(self.cfg.hub_capacity, len(self.relay))):
                    msg = self.relay.popleft()
                    self._emit("send", **self._msg_fields(msg, 2, None),
                               via=str(hub_leader))
                    self._enqueue(msg, t + self.cfg.delivery_delay, leg=2)

        # 4. timers
        if t in self.timers:
            fires = sorted(self.timers.pop(t), key=lambda x: (str(x[0]), x[1]))
            for nid, key in fires:
                if nid in self.crashed:
                    continue
                node = self.nodes[nid]
                node.handle_timer(t, key)
                self._flush_events(node)

        # 5. workload driver
        self._driver_step(t)

        # 6. mid-tick crashes: appends stay durable, staged output is lost
        for ev in self._timed:
            if isinstance(ev, CrashNode) and ev.pos == "mid" and ev.at_tick == t:
                nid = NodeId(ev.chain, ev.node)
                if nid not in self.crashed:
                    self.crashed.add(nid)
                    self._emit("crash", node=str(nid), pos="mid")
                    self.nodes[nid].take_staged()

        # 7. send phase
        tripped: list[NodeId] = []
        for nid in sorted(self.nodes):
            if nid in self.crashed:
                continue
            node = self.nodes[nid]
            staged = node.take_staged()
            for evt in staged.events:
                if evt["e"] == "decide":
                    self.last_decide_tick = self.now
                self._emit(evt.pop("e"), **evt)
            for tick, key in staged.timers:
                if tick <= t:
                    tick = t + 1
                self.timers.setdefault(tick, []).append((nid, key))
                heapq.heappush(self.timer_ticks, tick)
            sent_match = False
            for msg in staged.msgs:
                if self._apply_drop(msg):
                    continue
                for trig in self._triggers:
                    if (trig.chain, trig.node) == nid and trig.match.matches(msg):
                        sent_match = True
                self._route(msg, t)
            if sent_match:
                tripped.append(nid)
        for nid in tripped:
            if nid not in self.crashed:
                self.crashed.add(nid)
                self._emit("crash", node=str(nid), pos="end")

    def _apply_drop(self, msg: Message) -> bool:
        for rule in self._drops:
            if rule.match.matches(msg):
                rule._seen += 1
                if rule.skip < rule._seen <= rule.skip + rule.count:
                    self._emit("drop", **self._msg_fields(msg, None, None), reason="fault")
                    return True
        return False

    def _delay_for(self, msg: Message) -> int:
        for rule in self._delays:
            if rule.match.matches(msg):
                rule._seen += 1
                if rule.count < 0 or rule._seen <= rule.count:
                    return rule.ticks
        return 0

    def _route(self, msg: Message, t: int) -> None:
        delay = self.cfg.delivery_delay + self._delay_for(msg)
        if self.cfg.protocol is ProtocolKind.HUB and msg.kind in PROTOCOL_KINDS:
            # first hop goes to the hub chain's leader; the relay forwards it
            hub_leader = self.current_leader(self.cfg.hub_chain) or NodeId(self.cfg.hub_chain, 0)
            hop = dc_replace(msg)
            self._emit("send", **self._msg_fields(hop, 1, msg.to.chain), via=str(hub_leader))
            self._enqueue(hop, t + delay, leg=1, dest_chain=msg.to.chain)
            return
        self._emit("send", **self._msg_fields(msg, None, None))
        self._enqueue(msg, t + delay)

    def _deliver(self, msg: Message, leg: int | None, dest_chain: int | None) -> None:
        if leg == 1:
            # arriving at the hub relay; queue for forwarding
            hub_leader = self.current_leader(self.cfg.hub_chain)
            if hub_leader is None:
                self._emit("drop", **self._msg_fields(msg, 1, dest_chain), reason="crashed")
                self._count_delivered(msg)
                return
            self._emit("deliver", **self._msg_fields(msg, 1, dest_chain), via=str(hub_leader))
            self._count_delivered(msg)
            self.relay.append(msg)
            return
        if msg.to in self.crashed:
            self._emit("drop", **self._msg_fields(msg, leg, dest_chain), reason="crashed")
            self._count_delivered(msg)
            return
        self._emit("deliver", **self._msg_fields(msg, leg, dest_chain))
        self._count_delivered(msg)
        node = self.nodes[msg.to]
        node.handle_message(self.now, msg)
        self._flush_events(node)

    # -- driver ------------------------------------------------------------

    def current_leader(self, chain: int) -> NodeId | None:
        best: NodeId | None = None
        best_term = -1
        for i in range(self.cfg.nodes_per_chain):
            nid = NodeId(chain, i)
            if nid in self.crashed:
                continue
            node = self.nodes[nid]
            if node.role is NodeRole.LEADER and node.term > best_term:
                best, best_term = nid, node.term
        return best

    def _txn_settled(self, txn: int) -> bool:
        coord_chain = self.workload.coordinator_of(txn, self.cfg.chains)
        leader = self.current_leader(coord_chain)
        if leader is None:
            return False
        coord_phase = self.nodes[leader].txn_phase(txn)
        if coord_phase not in ("commit", "abort"):
            return False
        for c in range(self.cfg.chains):
            if c == coord_chain:
                continue
            peer = self.current_leader(c)
            if peer is None:
                return False
            phase = self.nodes[peer].txn_phase(txn)
            if phase is None:
                continue  # chain never joined; the coordinator aborted without it
            if phase not in ("commit", "abort"):
                return False
        return True

    def _driver_step(self, t: int) -> None:
        w = self.workload
        if self._submitted > 0:
            txn = self._submitted
            coord_chain = w.coordinator_of(txn, self.cfg.chains)
            leader = self.current_leader(coord_chain)
            if (
                leader is not None
                and txn not in self.nodes[leader].coord
                and not self.nodes[leader].dtlog.records_for(txn)
            ):
                # the submission died with its leader before reaching anyone:
                # the client retries against the current leader
                self._submit(t, txn, leader)
                return
        if self._submitted >= w.txns:
            return
        if self._submitted > 0 and not self._txn_settled(self._submitted):
            return
        txn = self._submitted + 1
        coord_chain = w.coordinator_of(txn, self.cfg.chains)
        leader = self.current_leader(coord_chain)
        if leader is None:
            return
        self._submitted = txn
        self._submit(t, txn, leader)

    def _submit(self, t: int, txn: int, leader: NodeId) -> None:
        coord_chain = leader.chain
        participants = self._participants.get(txn)
        if participants is None:
            participants = frozenset(c for c in range(self.cfg.chains) if c != coord_chain)
            self._participants[txn] = participants
        node = self.nodes[leader]
        try:
            node.handle_submit(t, txn, participants)
        except (NotLeaderError, DuplicateTransactionError):
            return
        self._emit("submit", txn=txn, coordinator=coord_chain,
                   participants=sorted(participants))
        self._flush_events(node)

    # -- quiescence -----------------------------------------------------------

    def _quiesced(self) -> bool:
        if self._submitted < self.workload.txns:
            return False
        if any(ev.at_tick > self.now for ev in self._timed):
            return False  # the schedule still owes a crash or restart
        if self.proto_in_flight or self.repl_in_flight or self.relay:
            return False
        if self._submitted > 0 and not self._txn_settled(self._submitted):
            return False
        for nid, node in self.nodes.items():
            if nid not in self.crashed and node.has_pending_protocol_work():
                return False
        for chain in range(self.cfg.chains):
            leader = self.current_leader(chain)
            if leader is None:
                continue
            target = len(self.nodes[leader].rlog)
            for i in range(self.cfg.nodes_per_chain):
                nid = NodeId(chain, i)
                if nid not in self.crashed and len(self.nodes[nid].rlog) < target:
                    return False  # a live follower is still catching up
        return True

    def _next_tick(self) -> int | None:
        # The driver only reacts to state changes, and those only happen on
        # event ticks, so jumping to the earliest pending event is lossless.
        candidates: list[int] = []
        if self.ready_heap:
            candidates.append(max(self.ready_heap[0][0], self.now + 1))
        while self.timer_ticks and self.timer_ticks[0] not in self.timers:
            heapq.heappop(self.timer_ticks)
        if self.timer_ticks:
            candidates.append(max(self.timer_ticks[0], self.now + 1))
        for ev in self._timed:
            if ev.at_tick > self.now:
                candidates.append(ev.at_tick)
        if self.relay:
            candidates.append(self.now + 1)
        if not candidates:
            return None
        return min(candidates)


def sim_run(
    cfg: ClusterConfig,
    workload: Workload,
    faults: FaultSchedule | None = None,
    *,
    budget: int = 10_000,
    keep_trace: bool = True,
    sink: Callable[[dict[str, Any]], None] | None = None,
) -> SimResult:
    """Run one simulation to protocol quiescence or the tick budget.

    Budget exhaustion with pending uncertainty is reported as outcome
    "blocked": that is a result (it is how blocking 2PC manifests), not an
    error.
    """
    return Simulator(cfg, workload, faults, keep_trace=keep_trace, sink=sink).run(budget)
