"""Per-transaction coordinator and participant state machines.

These are pure, transport-free transitions: every operation takes explicit
state plus a log handle, appends its write-ahead records *before* building
any outgoing message, and returns the messages for the caller to deliver.
Timers arrive as explicit tick values; nothing here sleeps or schedules.

The uncertain period is modeled exactly: a participant enters it when its
yes record is logged and leaves it only on a decision. Recovery is the
interactive DECISION-REQUIRE exchange; its timeout behavior depends on the
configured ProtocolMode (see config).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Protocol

from .config import ProtocolMode
from .dtlog import RecordKind
from .errors import InvalidRequestError, InvariantViolationError, ProtocolViolationError
from .messages import Decision, Message, MessageKind, NodeId


class AppendLog(Protocol):
    def append(self, txn: int, kind: RecordKind) -> int: ...


class CoordPhase(Enum):
    AWAITING_VOTES = "awaiting-votes"
    DECIDED = "decided"


class PartPhase(Enum):
    INIT = "init"
    VOTED_YES = "voted-yes"  # the uncertain period
    DECIDED = "decided"


@dataclass
class CoordinatorState:
    txn: int
    participants: frozenset[int]
    yes_received: frozenset[int] = frozenset()
    phase: CoordPhase = CoordPhase.AWAITING_VOTES
    decision: Decision | None = None
    own_vote_yes: bool = True
    vote_deadline: int = 0
    # True once there is evidence this transaction ran before under an
    # earlier leadership (a replayed vote arrived, or the state itself was
    # rebuilt from the log). A re-run must never abort on timeout: a prior
    # incarnation may have committed, so it keeps asking instead.
    resumed: bool = False

    @property
    def decided(self) -> bool:
        return self.phase is CoordPhase.DECIDED


@dataclass
class ParticipantState:
    txn: int
    phase: PartPhase = PartPhase.INIT
    decision: Decision | None = None
    decision_deadline: int | None = None
    recovery_round: int = 0
    recovery_deadline: int | None = None

    @property
    def uncertain(self) -> bool:
        return self.phase is PartPhase.VOTED_YES

    @property
    def decided(self) -> bool:
        return self.phase is PartPhase.DECIDED


def _route(leaders: Mapping[int, NodeId] | None, chain: int) -> NodeId:
    if leaders and chain in leaders:
        return leaders[chain]
    return NodeId(chain, 0)


# ---------------------------------------------------------------------------
# Coordinator side
# ---------------------------------------------------------------------------


def coordinator_begin(
    log: AppendLog,
    txn: int,
    participants: Iterable[int],
    sender: NodeId,
    *,
    own_vote_yes: bool = True,
    now: int = 0,
    vote_timeout: int = 10,
    leaders: Mapping[int, NodeId] | None = None,
) -> tuple[CoordinatorState, list[Message]]:
    """Open a transaction: log the start record, request every vote.

    The caller must ensure the txn id was never seen before on this chain.
    """
    parts = frozenset(participants)
    if not parts:
        raise InvalidRequestError("participant set must be nonempty")
    log.append(txn, RecordKind.START_2PC)
    state = CoordinatorState(
        txn=txn,
        participants=parts,
        own_vote_yes=own_vote_yes,
        vote_deadline=now + vote_timeout,
    )
    msgs = [
        Message(kind=MessageKind.VOTE_REQUEST, frm=sender, to=_route(leaders, c), txn=txn)
        for c in sorted(parts)
    ]
    return state, msgs


def _decide_commit(
    state: CoordinatorState, log: AppendLog, sender: NodeId, leaders
) -> list[Message]:
    log.append(state.txn, RecordKind.COMMIT)
    state.phase = CoordPhase.DECIDED
    state.decision = Decision.COMMIT
    return [
        Message(kind=MessageKind.COMMIT, frm=sender, to=_route(leaders, c), txn=state.txn)
        for c in sorted(state.participants)
    ]


def _decide_abort(
    state: CoordinatorState, log: AppendLog, sender: NodeId, leaders
) -> list[Message]:
    # Abort goes only to chains that voted YES: the others either aborted
    # unilaterally already or never joined.
    log.append(state.txn, RecordKind.ABORT)
    state.phase = CoordPhase.DECIDED
    state.decision = Decision.ABORT
    return [
        Message(kind=MessageKind.ABORT, frm=sender, to=_route(leaders, c), txn=state.txn)
        for c in sorted(state.yes_received)
    ]


def coordinator_on_vote(
    state: CoordinatorState,
    log: AppendLog,
    vote: Message,
    sender: NodeId,
    *,
    leaders: Mapping[int, NodeId] | None = None,
) -> tuple[CoordinatorState, list[Message]]:
    """Fold one vote in; decide once the tally is complete.

    Duplicate votes from the same chain are no-ops. Votes for a decided
    transaction must be filtered by the caller (they are stale traffic).
    """
    assert state.phase is CoordPhase.AWAITING_VOTES
    voter = vote.frm.chain
    if vote.payload and vote.payload.get("replayed"):
        state.resumed = True
    if voter not in state.participants:
        return state, []
    if vote.kind is MessageKind.VOTE_NO:
        return state, _decide_abort(state, log, sender, leaders)
    if vote.kind is not MessageKind.VOTE_YES:
        raise ProtocolViolationError(f"not a vote: {vote.kind}")
    if voter in state.yes_received:
        return state, []
    state.yes_received = state.yes_received | {voter}
    if state.yes_received == state.participants:
        if state.own_vote_yes:
            return state, _decide_commit(state, log, sender, leaders)
        return state, _decide_abort(state, log, sender, leaders)
    return state, []


def coordinator_on_timeout(
    state: CoordinatorState,
    log: AppendLog,
    sender: NodeId,
    *,
    leaders: Mapping[int, NodeId] | None = None,
) -> tuple[CoordinatorState, list[Message]]:
    """Vote collection timed out: abort, notifying exactly the YES voters."""
    if state.phase is CoordPhase.DECIDED:
        return state, []
    return state, _decide_abort(state, log, sender, leaders)


# ---------------------------------------------------------------------------
# Participant side
# ---------------------------------------------------------------------------


def participant_on_vote_request(
    log: AppendLog,
    txn: int,
    vote_yes: bool,
    coordinator: NodeId,
    sender: NodeId,
    *,
    now: int = 0,
    decision_timeout: int = 20,
) -> tuple[ParticipantState, Message]:
    """Answer a fresh vote request. The vote itself is an input from the
    workload layer; this operation only enforces the logging discipline."""
    if vote_yes:
        log.append(txn, RecordKind.VOTED_YES)
        state = ParticipantState(
            txn=txn,
            phase=PartPhase.VOTED_YES,
            decision_deadline=now + decision_timeout,
        )
        reply = Message(kind=MessageKind.VOTE_YES, frm=sender, to=coordinator, txn=txn)
    else:
        log.append(txn, RecordKind.ABORT)
        state = ParticipantState(txn=txn, phase=PartPhase.DECIDED, decision=Decision.ABORT)
        reply = Message(kind=MessageKind.VOTE_NO, frm=sender, to=coordinator, txn=txn)
    return state, reply


def participant_revote(state: ParticipantState, coordinator: NodeId, sender: NodeId) -> Message:
    """Replay our recorded vote for a duplicate or re-issued vote request."""
    if state.phase is PartPhase.VOTED_YES or state.decision is Decision.COMMIT:
        kind = MessageKind.VOTE_YES
    else:
        kind = MessageKind.VOTE_NO
    return Message(kind=kind, frm=sender, to=coordinator, txn=state.txn)


def participant_on_wait_timeout(log: AppendLog, txn: int) -> ParticipantState:
    """No vote request arrived in time: abort unilaterally, tell no one."""
    log.append(txn, RecordKind.ABORT)
    return ParticipantState(txn=txn, phase=PartPhase.DECIDED, decision=Decision.ABORT)


def participant_on_decision(
    state: ParticipantState, log: AppendLog, msg: Message
) -> ParticipantState:
    """Adopt a final decision (COMMIT/ABORT/DECISION_REPLY).

    Idempotent on re-delivery; a conflicting decision after a terminal
    state raises InvariantViolationError, and COMMIT for a transaction we
    never voted on raises ProtocolViolationError.
    """
    if msg.kind is MessageKind.COMMIT:
        decision = Decision.COMMIT
    elif msg.kind is MessageKind.ABORT:
        decision = Decision.ABORT
    elif msg.kind is MessageKind.DECISION_REPLY:
        decision = msg.decision
    else:
        raise ProtocolViolationError(f"not a decision message: {msg.kind}")

    if state.phase is PartPhase.DECIDED:
        if state.decision is not decision:
            raise InvariantViolationError(
                f"txn {state.txn}: {decision.value} after decided {state.decision.value}"
            )
        return state
    if decision is Decision.COMMIT and state.phase is PartPhase.INIT:
        raise ProtocolViolationError(
            f"txn {state.txn}: COMMIT delivered to a participant that never voted"
        )
    log.append(state.txn, RecordKind.COMMIT if decision is Decision.COMMIT else RecordKind.ABORT)
    state.phase = PartPhase.DECIDED
    state.decision = decision
    state.decision_deadline = None
    state.recovery_deadline = None
    return state


# ---------------------------------------------------------------------------
# Interactive recovery
# ---------------------------------------------------------------------------


def recovery_initiate(
    state: ParticipantState,
    peers: Iterable[int],
    sender: NodeId,
    *,
    now: int,
    recovery_interval: int = 20,
    leaders: Mapping[int, NodeId] | None = None,
) -> tuple[ParticipantState, list[Message]]:
    """Broadcast DECISION-REQUIRE to every other chain and arm the next
    recovery deadline."""
    assert state.phase is PartPhase.VOTED_YES
    state.recovery_round += 1
    state.recovery_deadline = now + recovery_interval
    msgs = [
        Message(
            kind=MessageKind.DECISION_REQUIRE,
            frm=sender,
            to=_route(leaders, c),
            txn=state.txn,
        )
        for c in sorted(set(peers))
    ]
    return state, msgs


def recovery_respond(
    txn: int,
    coord_state: CoordinatorState | None,
    part_state: ParticipantState | None,
    log: AppendLog,
    requester: NodeId,
    sender: NodeId,
) -> tuple[ParticipantState | None, Message | None]:
    """Answer a DECISION-REQUIRE per the four responder cases.

    1) decided commit -> reply COMMIT; 2) decided abort -> reply ABORT;
    3) never voted (participant) -> abort unilaterally and reply ABORT;
    4) ourselves uncertain -> no reply. A coordinator that has not decided
    yet also stays silent: it will decide by tally or timeout shortly and
    must not fork its own outcome.

    Returns (new participant state if case 3 created one, reply or None).
    """

    def reply(decision: Decision) -> Message:
        return Message(
            kind=MessageKind.DECISION_REPLY,
            frm=sender,
            to=requester,
            txn=txn,
            decision=decision,
        )

    if coord_state is not None:
        if coord_state.decided:
            return None, reply(coord_state.decision)
        return None, None
    if part_state is not None:
        if part_state.decided:
            return None, reply(part_state.decision)
        return None, None  # uncertain ourselves: cannot help
    # Case 3: we have not voted (and now never will): abort unilaterally.
    new_state = participant_on_wait_timeout(log, txn)
    return new_state, reply(Decision.ABORT)


def recovery_on_timeout(
    state: ParticipantState,
    log: AppendLog,
    mode: ProtocolMode,
    peers: Iterable[int],
    sender: NodeId,
    *,
    now: int,
    recovery_interval: int = 20,
    leaders: Mapping[int, NodeId] | None = None,
) -> tuple[ParticipantState, list[Message]]:
    """Recovery round expired with no decision.

    SAFE re-broadcasts forever (liveness rests on the heartbeat eventually
    producing a live coordinator leader). PAPER_LITERAL writes an abort
    record and decides, which is what the published recovery procedure
    says to do; the model checker shows why that is dangerous.
    """
    assert state.phase is PartPhase.VOTED_YES
    if mode is ProtocolMode.PAPER_LITERAL:
        log.append(state.txn, RecordKind.ABORT)
        state.phase = PartPhase.DECIDED
        state.decision = Decision.ABORT
        state.recovery_deadline = None
        return state, []
    return recovery_initiate(
        state,
        peers,
        sender,
        now=now,
        recovery_interval=recovery_interval,
        leaders=leaders,
    )
