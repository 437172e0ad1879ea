"""Protocol message vocabulary, node addressing, and the wire codec.

The message kinds form a closed set: anything else is a decode error, never
a silent drop. Cross-chain traffic uses the first seven kinds; the rest are
intra-chain replication, heartbeat, and election traffic (ELECTION_WIN is
also announced cross-chain so remote nodes can update their routing view).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

from .errors import DecodeError


class Decision(Enum):
    COMMIT = "commit"
    ABORT = "abort"


class MessageKind(Enum):
    VOTE_REQUEST = "vote-request"
    VOTE_YES = "vote-yes"
    VOTE_NO = "vote-no"
    COMMIT = "commit"
    ABORT = "abort"
    DECISION_REQUIRE = "decision-require"
    DECISION_REPLY = "decision-reply"
    HEARTBEAT_PING = "heartbeat-ping"
    HEARTBEAT_ACK = "heartbeat-ack"
    ELECTION_START = "election-start"
    ELECTION_WIN = "election-win"
    REPLICATE = "replicate"
    REPLICATE_ACK = "replicate-ack"


#: Kinds that implement the cross-chain commit protocol itself (as opposed
#: to intra-chain replication / liveness machinery).
PROTOCOL_KINDS = frozenset(
    {
        MessageKind.VOTE_REQUEST,
        MessageKind.VOTE_YES,
        MessageKind.VOTE_NO,
        MessageKind.COMMIT,
        MessageKind.ABORT,
        MessageKind.DECISION_REQUIRE,
        MessageKind.DECISION_REPLY,
    }
)

#: Kinds that carry a final decision to a participant.
DECISION_KINDS = frozenset(
    {MessageKind.COMMIT, MessageKind.ABORT, MessageKind.DECISION_REPLY}
)


class NodeId(NamedTuple):
    """(chain, node) pair; node ids are 0..k-1 within a chain."""

    chain: int
    node: int

    def __str__(self) -> str:
        return f"{self.chain}.{self.node}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        try:
            chain, node = text.replace("-", ".").split(".")
            return cls(int(chain), int(node))
        except ValueError as exc:
            raise DecodeError(f"bad node id {text!r}") from exc


@dataclass(frozen=True, slots=True)
class Message:
    """One protocol message.

    ``txn`` is absent for heartbeat/election/replication traffic.
    ``decision`` is present exactly when kind is DECISION_REPLY.
    ``payload`` carries kind-specific extras (replicated entries, election
    candidacy info, leader hints) and must be JSON-serializable.
    """

    kind: MessageKind
    frm: NodeId
    to: NodeId
    term: int = 0
    txn: int | None = None
    decision: Decision | None = None
    payload: dict[str, Any] | None = field(default=None)

    def __post_init__(self):
        if (self.decision is not None) != (self.kind is MessageKind.DECISION_REPLY):
            raise ValueError("decision must be set exactly for DECISION_REPLY")

    def to_obj(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "kind": self.kind.value,
            "txn": self.txn,
            "from_chain": self.frm.chain,
            "from_node": self.frm.node,
            "to_chain": self.to.chain,
            "to_node": self.to.node,
            "term": self.term,
        }
        if self.decision is not None:
            obj["decision"] = self.decision.value
        if self.payload is not None:
            obj["payload"] = self.payload
        return obj

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "Message":
        try:
            kind = MessageKind(obj["kind"])
        except (ValueError, KeyError, TypeError) as exc:
            raise DecodeError(f"unknown message kind: {obj.get('kind')!r}") from exc
        try:
            decision = obj.get("decision")
            return cls(
                kind=kind,
                frm=NodeId(int(obj["from_chain"]), int(obj["from_node"])),
                to=NodeId(int(obj["to_chain"]), int(obj["to_node"])),
                term=int(obj["term"]),
                txn=None if obj.get("txn") is None else int(obj["txn"]),
                decision=None if decision is None else Decision(decision),
                payload=obj.get("payload"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"malformed message object: {exc}") from exc


# Wire format (live transport): 4-byte big-endian frame length, then the
# JSON encoding of Message.to_obj().

_LEN = struct.Struct(">I")
MAX_FRAME = 1 << 20


def encode_frame(msg: Message) -> bytes:
    body = json.dumps(msg.to_obj(), separators=(",", ":"), sort_keys=True).encode()
    return _LEN.pack(len(body)) + body


def decode_frame(data: bytes) -> Message:
    """Decode one complete frame (length prefix included)."""
    if len(data) < 4:
        raise DecodeError("short frame header")
    (length,) = _LEN.unpack_from(data)
    if length > MAX_FRAME:
        raise DecodeError(f"frame too large: {length}")
    body = data[4 : 4 + length]
    if len(body) != length:
        raise DecodeError("truncated frame body")
    try:
        obj = json.loads(body.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"bad frame payload: {exc}") from exc
    if not isinstance(obj, dict):
        raise DecodeError("frame payload is not an object")
    return Message.from_obj(obj)


def read_frames(buffer: bytes) -> tuple[list[Message], bytes]:
    """Split a byte buffer into complete messages plus the unconsumed tail."""
    out: list[Message] = []
    pos = 0
    while len(buffer) - pos >= 4:
        (length,) = _LEN.unpack_from(buffer, pos)
        if length > MAX_FRAME:
            raise DecodeError(f"frame too large: {length}")
        if len(buffer) - pos - 4 < length:
            break
        out.append(decode_frame(buffer[pos : pos + 4 + length]))
        pos += 4 + length
    return out, buffer[pos:]
