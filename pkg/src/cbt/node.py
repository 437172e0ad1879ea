"""Per-node state machine: one blockchain node composing the commit
protocol, intra-chain replication, heartbeat monitoring, and the durable
transaction log.

A node is driven entirely from outside: the simulator or the live runtime
feeds it messages, timer fires, and submissions, then collects whatever it
staged (outgoing messages, new timers, semantic events). Nothing in here
knows about transports or wall clocks, so the same code runs under both.

Leadership discipline: only the current chain leader executes protocol
transitions. Followers mirror the leader's log through replication and can
therefore take over losslessly; a node receiving cross-chain traffic while
not leader forwards it to its believed leader.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace
from typing import Any

from .config import ClusterConfig
from .dtlog import DECISION_RECORDS, DTLog, RecordKind, decision_of
from .errors import (
    DuplicateTransactionError,
    LogIntegrityError,
    NotLeaderError,
    ProtocolViolationError,
    InvariantViolationError,
)
from .messages import (
    DECISION_KINDS,
    Decision,
    Message,
    MessageKind,
    NodeId,
    PROTOCOL_KINDS,
)
from . import protocol as proto
from .protocol import CoordinatorState, CoordPhase, ParticipantState, PartPhase
from .replication import (
    HeartbeatCounters,
    LogEntry,
    NodeRole,
    ReplicatedLog,
    advance_commit,
    follower_on_replicate,
    heartbeat_tick,
    leader_replicate,
)

TimerKey = tuple


class _ChainLog:
    """Log handle given to protocol operations: appends land in the node's
    DT log and are fanned out to followers in the same step."""

    def __init__(self, node: "Node"):
        self.node = node
        self.participants_for_next: frozenset[int] | None = None

    def append(self, txn: int, kind: RecordKind) -> int:
        participants = None
        if kind is RecordKind.START_2PC:
            participants = self.participants_for_next
        return self.node._append_record(txn, kind, participants)


@dataclass
class Staged:
    msgs: list[Message] = field(default_factory=list)
    timers: list[tuple[int, TimerKey]] = field(default_factory=list)
    events: list[dict[str, Any]] = field(default_factory=list)


class Node:
    def __init__(self, nid: NodeId, cfg: ClusterConfig, dtlog: DTLog | None = None,
                 votes: dict[int, dict[int, bool]] | None = None):
        self.nid = nid
        self.cfg = cfg
        self.votes = votes or {}
        self.dtlog = dtlog if dtlog is not None else DTLog()
        self.rlog = ReplicatedLog()
        self.role = NodeRole.LEADER if nid.node == 0 else NodeRole.FOLLOWER
        self.term = 1
        self.leader_view: dict[int, NodeId] = {c: NodeId(c, 0) for c in range(cfg.chains)}
        self.coord: dict[int, CoordinatorState] = {}
        self.part: dict[int, ParticipantState] = {}
        self.txn_participants: dict[int, frozenset[int]] = {}
        self.acked: dict[NodeId, int] = {}  # leader: per-follower matched index
        self._acked_at_retry: dict[NodeId, int] = {}
        self.hb = HeartbeatCounters()
        self._hb_ack_seen = False
        self._ping_target: NodeId | None = None
        self._cand_term: int | None = None
        self.stale_messages = 0
        self.violations: list[str] = []
        self._staged = Staged()
        self._chainlog = _ChainLog(self)

    # ------------------------------------------------------------------
    # plumbing
    # ------------------------------------------------------------------

    def take_staged(self) -> Staged:
        out, self._staged = self._staged, Staged()
        return out

    def _send(self, msg: Message) -> None:
        self._staged.msgs.append(msg)

    def _arm(self, tick: int, key: TimerKey) -> None:
        self._staged.timers.append((tick, key))

    def _event(self, etype: str, **fields: Any) -> None:
        self._staged.events.append({"e": etype, "node": str(self.nid), **fields})

    def chain_peers(self) -> list[NodeId]:
        return [
            NodeId(self.nid.chain, i)
            for i in range(self.cfg.nodes_per_chain)
            if i != self.nid.node
        ]

    def other_chains(self) -> list[int]:
        return [c for c in range(self.cfg.chains) if c != self.nid.chain]

    def all_nodes(self) -> list[NodeId]:
        return [
            NodeId(c, i)
            for c in range(self.cfg.chains)
            for i in range(self.cfg.nodes_per_chain)
            if (c, i) != self.nid
        ]

    def _vote_for(self, txn: int) -> bool:
        return self.votes.get(txn, {}).get(self.nid.chain, True)

    def is_leader(self) -> bool:
        return self.role is NodeRole.LEADER

    # ------------------------------------------------------------------
    # log + replication
    # ------------------------------------------------------------------

    def _append_record(
        self, txn: int, kind: RecordKind, participants: frozenset[int] | None = None
    ) -> int:
        seq = self.dtlog.append(txn, kind, term=self.term)
        payload = {
            "txn": txn,
            "kind": kind.value,
            "participants": sorted(participants) if participants else None,
        }
        if participants:
            self.txn_participants[txn] = frozenset(participants)
        _, msgs = leader_replicate(self.rlog, payload, self.term, self.nid, self.chain_peers())
        if self.is_leader():
            for m in msgs:
                self._send(m)
        self._event("log-append", txn=txn, kind=kind.name, term=self.term, rseq=seq)
        if kind in DECISION_RECORDS:
            self._event("decide", txn=txn, decision=decision_of(kind).value)
        if self.cfg.nodes_per_chain == 1:
            self.rlog.committed_index = self.rlog.last_index()
        return seq

    def _apply_replicated(self, entry: LogEntry) -> None:
        # Content-level apply: two leaderships may replicate the same
        # record under different indices and terms (their entry streams
        # merge after churn), so idempotence is judged by (txn, kind), and
        # only a genuinely conflicting decision is a violation.
        payload = entry.payload
        txn = payload["txn"]
        kind = RecordKind(payload["kind"])
        if payload.get("participants") is not None:
            self.txn_participants[txn] = frozenset(payload["participants"])
        if self.dtlog.has(txn, kind):
            return
        try:
            seq = self.dtlog.append(txn, kind, term=entry.term)
        except LogIntegrityError as exc:
            self.violations.append(str(exc))
            self._event("invariant-violation", txn=txn, detail=str(exc))
            return
        self._event("log-append", txn=txn, kind=kind.name, term=entry.term, rseq=seq)
        if kind in DECISION_RECORDS:
            decision = decision_of(kind)
            self._event("decide", txn=txn, decision=decision.value)
            st = self.part.get(txn)
            if st is not None and not st.decided:
                st.phase = PartPhase.DECIDED
                st.decision = decision

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    def on_start(self, now: int = 0) -> None:
        if self.is_leader():
            self.acked = {p: -1 for p in self.chain_peers()}
            if self.cfg.nodes_per_chain > 1:
                self._arm(now + self.cfg.timeouts.replication_retry, ("replretry",))
        elif self.cfg.heartbeat_enabled:
            self._ping_leader()
            self._arm(now + self.cfg.timeouts.heartbeat_interval, ("hb",))

    def on_restart(self, now: int) -> None:
        """Rejoin after a crash: durable state (logs) survives, volatile
        state is rebuilt. A restarted node always comes back as a follower;
        a single-node chain immediately re-elects itself."""
        self.role = NodeRole.FOLLOWER
        self._cand_term = None
        self.hb = HeartbeatCounters()
        self._hb_ack_seen = False
        self._staged = Staged()
        self.coord = {}
        self.part = {}
        for txn, phase in self.dtlog.phases().items():
            if phase == "uncertain":
                self.part[txn] = ParticipantState(txn=txn, phase=PartPhase.VOTED_YES)
            elif phase in ("commit", "abort") and not self.dtlog.has(txn, RecordKind.START_2PC):
                self.part[txn] = ParticipantState(
                    txn=txn, phase=PartPhase.DECIDED, decision=Decision(phase)
                )
        if self.cfg.nodes_per_chain == 1:
            self._become_leader(self.term + 1, now)
            return
        if self.cfg.heartbeat_enabled:
            for p in self.chain_peers():
                self._send(Message(kind=MessageKind.HEARTBEAT_PING, frm=self.nid, to=p, term=self.term))
            self._arm(now + self.cfg.timeouts.heartbeat_interval, ("hb",))

    # ------------------------------------------------------------------
    # submissions (coordinator entry point)
    # ------------------------------------------------------------------

    def handle_submit(self, now: int, txn: int, participants: frozenset[int]) -> None:
        if not self.is_leader():
            raise NotLeaderError(self.leader_view.get(self.nid.chain))
        if txn in self.coord or txn in self.txn_participants or self.dtlog.records_for(txn):
            raise DuplicateTransactionError(f"txn {txn} already known to chain {self.nid.chain}")
        self._chainlog.participants_for_next = participants
        state, msgs = proto.coordinator_begin(
            self._chainlog,
            txn,
            participants,
            self.nid,
            own_vote_yes=self._vote_for(txn),
            now=now,
            vote_timeout=self.cfg.timeouts.vote_timeout,
            leaders=self.leader_view,
        )
        self._chainlog.participants_for_next = None
        self.coord[txn] = state
        for m in msgs:
            self._send(m)
        self._arm(state.vote_deadline, ("vote", txn))

    # ------------------------------------------------------------------
    # message dispatch
    # ------------------------------------------------------------------

    def handle_message(self, now: int, msg: Message) -> None:
        kind = msg.kind
        if kind is MessageKind.REPLICATE:
            self._on_replicate(msg)
        elif kind is MessageKind.REPLICATE_ACK:
            self._on_replicate_ack(msg)
        elif kind is MessageKind.HEARTBEAT_PING:
            self._on_ping(msg)
        elif kind is MessageKind.HEARTBEAT_ACK:
            self._on_ping_ack(msg)
        elif kind is MessageKind.ELECTION_START:
            self._on_election_start(msg, now)
        elif kind is MessageKind.ELECTION_WIN:
            self._on_election_win(msg, now)
        elif kind in PROTOCOL_KINDS:
            if not self.is_leader():
                self._forward(msg)
                return
            if kind is MessageKind.VOTE_REQUEST:
                self._on_vote_request(msg, now)
            elif kind in (MessageKind.VOTE_YES, MessageKind.VOTE_NO):
                self._on_vote(msg)
            elif kind in DECISION_KINDS:
                self._on_decision(msg)
            elif kind is MessageKind.DECISION_REQUIRE:
                self._on_decision_require(msg)

    def _forward(self, msg: Message) -> None:
        leader = self.leader_view.get(self.nid.chain)
        if leader and leader != self.nid:
            self._send(dc_replace(msg, to=leader))
        else:
            self.stale_messages += 1

    # -- participant ----------------------------------------------------

    def _on_vote_request(self, msg: Message, now: int) -> None:
        txn = msg.txn
        if txn in self.coord:
            self.stale_messages += 1
            return
        st = self.part.get(txn)
        if st is not None:
            self._send(proto.participant_revote(st, msg.frm, self.nid))
            if st.uncertain and self.cfg.recovery_enabled:
                # a (possibly new) coordinator is active again: give the
                # decision a fresh window before recovery kicks in
                st.decision_deadline = now + self.cfg.timeouts.decision_timeout
                self._arm(st.decision_deadline, ("decision", txn))
            return
        recorded = self.dtlog.decision_for(txn)
        if recorded is not None:
            st = ParticipantState(txn=txn, phase=PartPhase.DECIDED, decision=recorded)
            self.part[txn] = st
            self._send(proto.participant_revote(st, msg.frm, self.nid))
            return
        state, reply = proto.participant_on_vote_request(
            self._chainlog,
            txn,
            self._vote_for(txn),
            msg.frm,
            self.nid,
            now=now,
            decision_timeout=self.cfg.timeouts.decision_timeout,
        )
        self.part[txn] = state
        self._send(reply)
        if state.uncertain and self.cfg.recovery_enabled:
            self._arm(state.decision_deadline, ("decision", txn))

    def _on_decision(self, msg: Message) -> None:
        txn = msg.txn
        if txn in self.coord:
            self.stale_messages += 1
            return
        st = self.part.get(txn)
        if st is None:
            if msg.kind is MessageKind.COMMIT or msg.decision is Decision.COMMIT:
                detail = f"txn {txn}: commit delivered to a chain holding no vote"
                self.violations.append(detail)
                self._event("invariant-violation", txn=txn, detail=detail)
            else:
                self.stale_messages += 1
            return
        try:
            proto.participant_on_decision(st, self._chainlog, msg)
        except InvariantViolationError as exc:
            self.violations.append(str(exc))
            self._event("invariant-violation", txn=txn, detail=str(exc))
        except ProtocolViolationError as exc:
            self.violations.append(str(exc))
            self._event("invariant-violation", txn=txn, detail=str(exc))

    def _on_decision_require(self, msg: Message) -> None:
        txn = msg.txn
        new_state, reply = proto.recovery_respond(
            txn, self.coord.get(txn), self.part.get(txn), self._chainlog, msg.frm, self.nid
        )
        if new_state is not None:
            self.part[txn] = new_state
        if reply is not None:
            self._send(reply)

    # -- coordinator ----------------------------------------------------

    def _on_vote(self, msg: Message) -> None:
        st = self.coord.get(msg.txn)
        if st is None or st.decided:
            self.stale_messages += 1
            return
        _, msgs = proto.coordinator_on_vote(st, self._chainlog, msg, self.nid, leaders=self.leader_view)
        for m in msgs:
            self._send(m)

    # ------------------------------------------------------------------
    # timers
    # ------------------------------------------------------------------

    def handle_timer(self, now: int, key: TimerKey) -> None:
        match key[0]:
            case "vote":
                self._timer_vote(now, key[1])
            case "decision":
                self._timer_decision(now, key[1])
            case "recovery":
                self._timer_recovery(now, key[1])
            case "hb":
                self._timer_heartbeat(now)
            case "election":
                self._timer_election(now, key[1])
            case "replretry":
                self._timer_replretry(now)

    def _timer_vote(self, now: int, txn: int) -> None:
        st = self.coord.get(txn)
        if st is None or st.decided or not self.is_leader() or st.vote_deadline != now:
            return
        _, msgs = proto.coordinator_on_timeout(st, self._chainlog, self.nid, leaders=self.leader_view)
        for m in msgs:
            self._send(m)

    def _timer_decision(self, now: int, txn: int) -> None:
        st = self.part.get(txn)
        if (
            st is None
            or not st.uncertain
            or not self.is_leader()
            or not self.cfg.recovery_enabled
            or st.decision_deadline != now
        ):
            return
        _, msgs = proto.recovery_initiate(
            st,
            self.other_chains(),
            self.nid,
            now=now,
            recovery_interval=self.cfg.timeouts.recovery_interval,
            leaders=self.leader_view,
        )
        for m in msgs:
            self._send(m)
        self._arm(st.recovery_deadline, ("recovery", txn))

    def _timer_recovery(self, now: int, txn: int) -> None:
        st = self.part.get(txn)
        if (
            st is None
            or not st.uncertain
            or not self.is_leader()
            or not self.cfg.recovery_enabled
            or st.recovery_deadline != now
        ):
            return
        _, msgs = proto.recovery_on_timeout(
            st,
            self._chainlog,
            self.cfg.mode,
            self.other_chains(),
            self.nid,
            now=now,
            recovery_interval=self.cfg.timeouts.recovery_interval,
            leaders=self.leader_view,
        )
        for m in msgs:
            self._send(m)
        if st.uncertain:
            self._arm(st.recovery_deadline, ("recovery", txn))

    # ------------------------------------------------------------------
    # heartbeat + election
    # ------------------------------------------------------------------

    def _ping_leader(self) -> None:
        target = self.leader_view.get(self.nid.chain)
        self._ping_target = target if target != self.nid else None
        if self._ping_target is not None:
            self._send(
                Message(kind=MessageKind.HEARTBEAT_PING, frm=self.nid, to=self._ping_target, term=self.term)
            )

    def _timer_heartbeat(self, now: int) -> None:
        if self.role is not NodeRole.FOLLOWER or not self.cfg.heartbeat_enabled:
            return
        responded = self._hb_ack_seen
        self._hb_ack_seen = False
        self.hb, trigger = heartbeat_tick(self.hb, responded)
        if trigger:
            self._start_candidacy(self.term + 1, now)
            return
        self._ping_leader()
        self._arm(now + self.cfg.timeouts.heartbeat_interval, ("hb",))

    def _on_ping(self, msg: Message) -> None:
        leader = self.leader_view.get(self.nid.chain)
        self._send(
            Message(
                kind=MessageKind.HEARTBEAT_ACK,
                frm=self.nid,
                to=msg.frm,
                term=self.term,
                payload={"leader": str(leader) if leader else None},
            )
        )

    def _on_ping_ack(self, msg: Message) -> None:
        if msg.frm == self._ping_target:
            self._hb_ack_seen = True
        if msg.term > self.term and msg.payload and msg.payload.get("leader"):
            # rejoin probe: adopt the newer leadership we just learned about
            self.term = msg.term
            self.leader_view[self.nid.chain] = NodeId.parse(msg.payload["leader"])

    def _start_candidacy(self, term: int, now: int) -> None:
        if self._cand_term is not None and self._cand_term >= term:
            return
        self.role = NodeRole.CANDIDATE
        self._cand_term = term
        for p in self.chain_peers():
            self._send(
                Message(
                    kind=MessageKind.ELECTION_START,
                    frm=self.nid,
                    to=p,
                    term=term,
                    payload={"loglen": len(self.rlog)},
                )
            )
        self._arm(now + self.cfg.timeouts.election_timeout, ("election", term))

    def _on_election_start(self, msg: Message, now: int) -> None:
        if msg.term <= self.term:
            return
        their_key = (-msg.payload["loglen"], msg.frm)
        my_key = (-len(self.rlog), self.nid)
        if self.role is NodeRole.CANDIDATE and self._cand_term == msg.term:
            if their_key < my_key:
                self.role = NodeRole.FOLLOWER  # stand down; they outrank us
                self._arm(now + self.cfg.timeouts.heartbeat_interval, ("hb",))
            return
        if their_key < my_key:
            if self.role is NodeRole.LEADER:
                self.role = NodeRole.FOLLOWER
            elif self.role is NodeRole.CANDIDATE:
                # a better candidacy in a newer round supersedes ours
                self.role = NodeRole.FOLLOWER
                self._cand_term = None
                self._arm(now + self.cfg.timeouts.heartbeat_interval, ("hb",))
            return
        self._start_candidacy(msg.term, now)

    def _timer_election(self, now: int, term: int) -> None:
        if self.role is NodeRole.CANDIDATE and self._cand_term == term:
            self._become_leader(term, now)

    def _become_leader(self, term: int, now: int) -> None:
        self.role = NodeRole.LEADER
        self.term = term
        self._cand_term = None
        self.leader_view[self.nid.chain] = self.nid
        self.acked = {p: -1 for p in self.chain_peers()}
        self._acked_at_retry = {}
        self._event("election", chain=self.nid.chain, leader=str(self.nid), term=term)
        for n in self.all_nodes():
            self._send(
                Message(kind=MessageKind.ELECTION_WIN, frm=self.nid, to=n, term=term)
            )
        # bring followers up to date with everything we hold
        for peer in self.chain_peers():
            for entry in self.rlog.entries:
                self._send(
                    Message(
                        kind=MessageKind.REPLICATE,
                        frm=self.nid,
                        to=peer,
                        term=term,
                        payload={"entry": entry.to_obj(), "commit": self.rlog.committed_index},
                    )
                )
        if self.cfg.nodes_per_chain > 1:
            self._arm(now + self.cfg.timeouts.replication_retry, ("replretry",))
        self._replay_as_leader(now)

    def _replay_as_leader(self, now: int) -> None:
        """Resume every open transaction from the durable log.

        Decided-commit transactions are re-broadcast (participants may have
        missed the original). Undecided coordinated transactions are re-run
        by re-issuing vote requests; participants answer idempotently from
        their own logs. Uncertain participations start a recovery round
        immediately: their original decision window elapsed while the chain
        was leaderless.
        """
        self.coord = {}
        self.part = {}
        for txn, phase in self.dtlog.phases().items():
            coordinated = self.dtlog.has(txn, RecordKind.START_2PC)
            participants = self.txn_participants.get(txn)
            if coordinated:
                if phase in ("commit", "abort"):
                    st = CoordinatorState(
                        txn=txn,
                        participants=participants or frozenset(),
                        yes_received=participants or frozenset(),
                        phase=CoordPhase.DECIDED,
                        decision=Decision(phase),
                    )
                    self.coord[txn] = st
                    if st.decision is Decision.COMMIT and participants:
                        for c in sorted(participants):
                            self._send(
                                Message(
                                    kind=MessageKind.COMMIT,
                                    frm=self.nid,
                                    to=self.leader_view.get(c, NodeId(c, 0)),
                                    txn=txn,
                                )
                            )
                elif participants:
                    st = CoordinatorState(
                        txn=txn,
                        participants=participants,
                        own_vote_yes=self._vote_for(txn),
                        vote_deadline=now + self.cfg.timeouts.vote_timeout,
                    )
                    self.coord[txn] = st
                    self._arm(st.vote_deadline, ("vote", txn))
                    for c in sorted(participants):
                        self._send(
                            Message(
                                kind=MessageKind.VOTE_REQUEST,
                                frm=self.nid,
                                to=self.leader_view.get(c, NodeId(c, 0)),
                                txn=txn,
                            )
                        )
                else:
                    # start record restored from disk alone: presume abort;
                    # nobody can have committed without our commit record
                    self._append_record(txn, RecordKind.ABORT)
                    self.coord[txn] = CoordinatorState(
                        txn=txn,
                        participants=frozenset(),
                        phase=CoordPhase.DECIDED,
                        decision=Decision.ABORT,
                    )
            else:
                if phase in ("commit", "abort"):
                    self.part[txn] = ParticipantState(
                        txn=txn, phase=PartPhase.DECIDED, decision=Decision(phase)
                    )
                elif phase == "uncertain":
                    st = ParticipantState(txn=txn, phase=PartPhase.VOTED_YES)
                    self.part[txn] = st
                    if self.cfg.recovery_enabled:
                        _, msgs = proto.recovery_initiate(
                            st,
                            self.other_chains(),
                            self.nid,
                            now=now,
                            recovery_interval=self.cfg.timeouts.recovery_interval,
                            leaders=self.leader_view,
                        )
                        for m in msgs:
                            self._send(m)
                        self._arm(st.recovery_deadline, ("recovery", txn))

    def _on_election_win(self, msg: Message, now: int) -> None:
        winner = msg.frm
        if winner.chain != self.nid.chain:
            self.leader_view[winner.chain] = winner
            return
        if msg.term < self.term:
            return
        self.term = msg.term
        self.leader_view[self.nid.chain] = winner
        if winner != self.nid and self.role is not NodeRole.FOLLOWER:
            self.role = NodeRole.FOLLOWER
            self._cand_term = None
        if winner != self.nid and self.cfg.heartbeat_enabled:
            self.hb = HeartbeatCounters()
            self._hb_ack_seen = False
            self._arm(now + self.cfg.timeouts.heartbeat_interval, ("hb",))

    # ------------------------------------------------------------------
    # replication handlers
    # ------------------------------------------------------------------

    def _on_replicate(self, msg: Message) -> None:
        if msg.term > self.term:
            self.term = msg.term
            if self.role is not NodeRole.FOLLOWER:
                self.role = NodeRole.FOLLOWER
                self._cand_term = None
            self.leader_view[self.nid.chain] = msg.frm
        appended, ack = follower_on_replicate(self.rlog, msg, self.term, self.nid)
        if msg.term >= self.term or appended is not None:
            # apply the record content even when the index slot was taken:
            # the durable log converges by content, not by entry position
            self._apply_replicated(LogEntry.from_obj(msg.payload["entry"]))
        self._send(ack)

    def _on_replicate_ack(self, msg: Message) -> None:
        if not self.is_leader():
            return
        if msg.term > self.term:
            self.role = NodeRole.FOLLOWER
            self.term = msg.term
            return
        matched = msg.payload.get("matched", -1)
        prev = self.acked.get(msg.frm, -1)
        self.acked[msg.frm] = max(prev, matched)
        advance_commit(self.rlog, self.acked, self.cfg.nodes_per_chain)

    def _timer_replretry(self, now: int) -> None:
        if not self.is_leader():
            return
        for peer in self.chain_peers():
            matched = self.acked.get(peer, -1)
            if matched >= self.rlog.last_index():
                continue
            if self._acked_at_retry.get(peer) == matched:
                # no progress since last retry: resend a bounded batch
                for entry in self.rlog.entries[matched + 1 : matched + 33]:
                    self._send(
                        Message(
                            kind=MessageKind.REPLICATE,
                            frm=self.nid,
                            to=peer,
                            term=self.term,
                            payload={"entry": entry.to_obj(), "commit": self.rlog.committed_index},
                        )
                    )
            self._acked_at_retry[peer] = matched
        self._arm(now + self.cfg.timeouts.replication_retry, ("replretry",))

    # ------------------------------------------------------------------
    # introspection
    # ------------------------------------------------------------------

    def has_pending_protocol_work(self) -> bool:
        if self.is_leader() and any(not s.decided for s in self.coord.values()):
            return True
        return any(s.uncertain for s in self.part.values())

    def uncertain_txns(self) -> list[int]:
        return sorted(t for t, s in self.part.items() if s.uncertain)

    def txn_phase(self, txn: int) -> str | None:
        if txn in self.coord:
            st = self.coord[txn]
            return st.decision.value if st.decided else "awaiting-votes"
        if txn in self.part:
            st = self.part[txn]
            if st.decided:
                return st.decision.value
            return "uncertain" if st.uncertain else "init"
        return None

    def snapshot(self) -> dict[str, Any]:
        txns: dict[str, Any] = {}
        for txn in sorted(set(self.coord) | set(self.part)):
            txns[str(txn)] = self.txn_phase(txn)
        return {
            "node": str(self.nid),
            "role": self.role.value,
            "term": self.term,
            "log_len": len(self.rlog),
            "committed_index": self.rlog.committed_index,
            "txns": txns,
            "stale_messages": self.stale_messages,
            "violations": list(self.violations),
            "uncertain": self.uncertain_txns(),
        }
