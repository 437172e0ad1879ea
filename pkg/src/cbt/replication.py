"""Intra-chain consistency: leader/follower log replication, heartbeat
failure counters, and deterministic leader election.

Each "blockchain" is modeled as a small replicated log cluster. The leader
appends entries and pushes them to followers; an entry is committed once a
majority of the chain (leader included) holds it. Followers probe the
leader with heartbeats; the third consecutive miss triggers an election.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .errors import ChainDeadError
from .messages import Message, MessageKind, NodeId


class NodeRole(Enum):
    LEADER = "leader"
    FOLLOWER = "follower"
    CANDIDATE = "candidate"


@dataclass(frozen=True, slots=True)
class LogEntry:
    index: int
    term: int
    payload: Any  # opaque to this layer; the node stores DT records here

    def to_obj(self) -> dict[str, Any]:
        return {"index": self.index, "term": self.term, "payload": self.payload}

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "LogEntry":
        return cls(index=int(obj["index"]), term=int(obj["term"]), payload=obj["payload"])


@dataclass
class ReplicatedLog:
    """Dense, append-only log. ``committed_index`` is the last index known
    to be held by a majority; -1 while nothing is committed."""

    entries: list[LogEntry] = field(default_factory=list)
    committed_index: int = -1

    def append(self, term: int, payload: Any) -> LogEntry:
        entry = LogEntry(index=len(self.entries), term=term, payload=payload)
        self.entries.append(entry)
        return entry

    def last_index(self) -> int:
        return len(self.entries) - 1

    def __len__(self) -> int:
        return len(self.entries)


def majority(cluster_size: int) -> int:
    return cluster_size // 2 + 1


def leader_replicate(
    log: ReplicatedLog,
    payload: Any,
    term: int,
    sender: NodeId,
    followers: list[NodeId],
) -> tuple[LogEntry, list[Message]]:
    """Append an entry as leader and produce the replication fan-out.

    The caller is responsible for verifying leadership; non-leaders must
    raise NotLeaderError before getting here.
    """
    entry = log.append(term, payload)
    msgs = [
        Message(
            kind=MessageKind.REPLICATE,
            frm=sender,
            to=f,
            term=term,
            payload={"entry": entry.to_obj(), "commit": log.committed_index},
        )
        for f in followers
    ]
    return entry, msgs


def follower_on_replicate(
    log: ReplicatedLog, msg: Message, local_term: int, sender: NodeId
) -> tuple[LogEntry | None, Message]:
    """Apply one replicated entry, returning (appended entry or None, ack).

    A stale leader (msg.term < local_term) is rejected with a negative ack
    and nothing is appended. Entries already present are matched
    idempotently; a gap is refused so the leader can resend from our end.
    """
    if msg.term < local_term:
        ack = Message(
            kind=MessageKind.REPLICATE_ACK,
            frm=sender,
            to=msg.frm,
            term=local_term,
            payload={"ok": False, "matched": log.last_index()},
        )
        return None, ack

    entry = LogEntry.from_obj(msg.payload["entry"])
    appended = None
    if entry.index == len(log.entries):
        log.entries.append(entry)
        appended = entry
    elif entry.index > len(log.entries):
        # gap: refuse so the leader backfills
        ack = Message(
            kind=MessageKind.REPLICATE_ACK,
            frm=sender,
            to=msg.frm,
            term=msg.term,
            payload={"ok": False, "matched": log.last_index()},
        )
        return None, ack
    # entry.index < len: already have it (replay); ack what we hold
    leader_commit = msg.payload.get("commit", -1)
    if leader_commit > log.committed_index:
        log.committed_index = min(leader_commit, log.last_index())
    ack = Message(
        kind=MessageKind.REPLICATE_ACK,
        frm=sender,
        to=msg.frm,
        term=msg.term,
        payload={"ok": True, "matched": max(entry.index, log.committed_index)},
    )
    return appended, ack


def advance_commit(
    log: ReplicatedLog, acked: Mapping[NodeId, int], cluster_size: int
) -> int:
    """Advance committed_index to the highest index held by a majority
    (the leader's own copy counts)."""
    for idx in range(log.last_index(), log.committed_index, -1):
        holders = 1 + sum(1 for m in acked.values() if m >= idx)
        if holders >= majority(cluster_size):
            log.committed_index = idx
            break
    return log.committed_index


@dataclass
class HeartbeatCounters:
    """Consecutive-outcome counters per the three-strike rule.

    Success resets upon reaching 3; the third consecutive failure triggers
    an election and resets. At most one counter is nonzero at any
    observation point.
    """

    success: int = 0
    failure: int = 0


def heartbeat_tick(
    counters: HeartbeatCounters, responded: bool
) -> tuple[HeartbeatCounters, bool]:
    """Score one heartbeat round; returns (counters, election_triggered)."""
    if responded:
        success = counters.success + 1
        if success == 3:
            return HeartbeatCounters(0, 0), False
        return HeartbeatCounters(success, 0), False
    failure = counters.failure + 1
    if failure == 3:
        return HeartbeatCounters(0, 0), True
    return HeartbeatCounters(0, failure), False


def run_election(
    candidates: Mapping[NodeId, int], term: int
) -> tuple[NodeId, int]:
    """Pick the new leader among live nodes: longest log wins, ties go to
    the lowest node id. Returns (winner, next term)."""
    if not candidates:
        raise ChainDeadError("no live nodes to elect from")
    winner = min(candidates, key=lambda n: (-candidates[n], n))
    return winner, term + 1
