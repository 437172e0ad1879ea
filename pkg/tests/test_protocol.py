"""Commit-protocol state machines: every contract example, frozen.

Chains are numbered like the running 3-chain example: coordinator A=0,
participants B=1 and C=2.
"""

import pytest

from cbt.config import ProtocolMode
from cbt.dtlog import DTLog, RecordKind
from cbt.errors import (
    InvalidRequestError,
    InvariantViolationError,
    ProtocolViolationError,
)
from cbt.messages import Decision, Message, MessageKind, NodeId
from cbt import protocol as p

A, B, C = NodeId(0, 0), NodeId(1, 0), NodeId(2, 0)


def vote_msg(kind, frm, txn=1):
    return Message(kind=kind, frm=frm, to=A, txn=txn)


class RecordingLog(DTLog):
    """DTLog that also exposes the append order for the log-before-send check."""

    def __init__(self):
        super().__init__()
        self.order = []

    def append(self, txn, kind, term=0):
        self.order.append(("append", txn, kind))
        return super().append(txn, kind, term)


# ---------------------------------------------------------------------------
# coordinator
# ---------------------------------------------------------------------------


def test_begin_two_participants():
    log = DTLog()
    state, msgs = p.coordinator_begin(log, 1, {1, 2}, A, now=0, vote_timeout=10)
    assert state.phase is p.CoordPhase.AWAITING_VOTES
    assert state.vote_deadline == 10
    assert [(m.kind, m.to.chain) for m in msgs] == [
        (MessageKind.VOTE_REQUEST, 1),
        (MessageKind.VOTE_REQUEST, 2),
    ]
    assert log.has(1, RecordKind.START_2PC)


def test_begin_single_participant():
    state, msgs = p.coordinator_begin(DTLog(), 1, {1}, A)
    assert [m.to.chain for m in msgs] == [1]


def test_begin_empty_participants_rejected():
    with pytest.raises(InvalidRequestError):
        p.coordinator_begin(DTLog(), 1, set(), A)


def test_all_yes_commits_and_logs_before_sending():
    log = RecordingLog()
    state, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    state, msgs = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    assert msgs == [] and state.yes_received == {1}
    state, msgs = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, C), A)
    assert state.phase is p.CoordPhase.DECIDED and state.decision is Decision.COMMIT
    assert [(m.kind, m.to.chain) for m in msgs] == [
        (MessageKind.COMMIT, 1),
        (MessageKind.COMMIT, 2),
    ]
    assert log.order[-1] == ("append", 1, RecordKind.COMMIT)


def test_no_vote_with_empty_yes_set_aborts_silently():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    state, msgs = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_NO, B), A)
    assert state.decision is Decision.ABORT
    assert msgs == []  # no YES voters: nobody is owed an abort
    assert log.has(1, RecordKind.ABORT)


def test_no_vote_aborts_to_yes_voters_only():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    state, _ = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    state, msgs = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_NO, C), A)
    assert state.decision is Decision.ABORT
    assert [(m.kind, m.to.chain) for m in msgs] == [(MessageKind.ABORT, 1)]


def test_duplicate_vote_is_idempotent():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    state, _ = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    state, msgs = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    assert msgs == [] and state.yes_received == {1}
    assert state.phase is p.CoordPhase.AWAITING_VOTES


def test_own_no_vote_forces_abort_even_on_all_yes():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1}, A, own_vote_yes=False)
    state, msgs = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    assert state.decision is Decision.ABORT
    assert [(m.kind, m.to.chain) for m in msgs] == [(MessageKind.ABORT, 1)]


def test_timeout_aborts_to_partial_yes_set():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    state, _ = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    state, msgs = p.coordinator_on_timeout(state, log, A)
    assert state.decision is Decision.ABORT
    assert [(m.kind, m.to.chain) for m in msgs] == [(MessageKind.ABORT, 1)]


def test_timeout_with_no_yes_votes_sends_nothing():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    state, msgs = p.coordinator_on_timeout(state, log, A)
    assert state.decision is Decision.ABORT and msgs == []


def test_late_timeout_after_decision_is_a_noop():
    log = DTLog()
    state, _ = p.coordinator_begin(log, 1, {1}, A)
    state, _ = p.coordinator_on_vote(state, log, vote_msg(MessageKind.VOTE_YES, B), A)
    assert state.decision is Decision.COMMIT
    state, msgs = p.coordinator_on_timeout(state, log, A)
    assert state.decision is Decision.COMMIT and msgs == []


# ---------------------------------------------------------------------------
# participant
# ---------------------------------------------------------------------------


def test_vote_yes_logs_then_replies_and_enters_uncertain_period():
    log = RecordingLog()
    state, reply = p.participant_on_vote_request(log, 1, True, A, B, now=5, decision_timeout=20)
    assert state.phase is p.PartPhase.VOTED_YES and state.uncertain
    assert state.decision_deadline == 25
    assert reply.kind is MessageKind.VOTE_YES and reply.to == A
    assert log.order == [("append", 1, RecordKind.VOTED_YES)]


def test_vote_no_aborts_unilaterally():
    log = DTLog()
    state, reply = p.participant_on_vote_request(log, 1, False, A, B)
    assert state.decided and state.decision is Decision.ABORT
    assert reply.kind is MessageKind.VOTE_NO
    assert log.has(1, RecordKind.ABORT)


def test_wait_timeout_aborts_without_a_message():
    log = DTLog()
    state = p.participant_on_wait_timeout(log, 1)
    assert state.decided and state.decision is Decision.ABORT
    assert log.has(1, RecordKind.ABORT)


def test_revote_replays_the_recorded_vote():
    log = DTLog()
    state, _ = p.participant_on_vote_request(log, 1, True, A, B)
    assert p.participant_revote(state, A, B).kind is MessageKind.VOTE_YES
    state = p.participant_on_decision(state, log, Message(
        kind=MessageKind.COMMIT, frm=A, to=B, txn=1))
    assert p.participant_revote(state, A, B).kind is MessageKind.VOTE_YES
    log2 = DTLog()
    aborted, _ = p.participant_on_vote_request(log2, 2, False, A, B)
    assert p.participant_revote(aborted, A, B).kind is MessageKind.VOTE_NO


def test_decision_commit_and_abort():
    for kind, decision in ((MessageKind.COMMIT, Decision.COMMIT),
                           (MessageKind.ABORT, Decision.ABORT)):
        log = DTLog()
        state, _ = p.participant_on_vote_request(log, 1, True, A, B)
        state = p.participant_on_decision(state, log, Message(kind=kind, frm=A, to=B, txn=1))
        assert state.decided and state.decision is decision


def test_duplicate_decision_is_idempotent_with_no_new_record():
    log = DTLog()
    state, _ = p.participant_on_vote_request(log, 1, True, A, B)
    msg = Message(kind=MessageKind.COMMIT, frm=A, to=B, txn=1)
    state = p.participant_on_decision(state, log, msg)
    before = len(log)
    state = p.participant_on_decision(state, log, msg)
    assert len(log) == before and state.decision is Decision.COMMIT


def test_conflicting_decision_raises_invariant_violation():
    log = DTLog()
    state, _ = p.participant_on_vote_request(log, 1, True, A, B)
    state = p.participant_on_decision(state, log, Message(
        kind=MessageKind.COMMIT, frm=A, to=B, txn=1))
    with pytest.raises(InvariantViolationError):
        p.participant_on_decision(state, log, Message(
            kind=MessageKind.ABORT, frm=A, to=B, txn=1))


def test_commit_without_vote_is_a_protocol_violation():
    state = p.ParticipantState(txn=1)
    with pytest.raises(ProtocolViolationError):
        p.participant_on_decision(state, DTLog(), Message(
            kind=MessageKind.COMMIT, frm=A, to=B, txn=1))


# ---------------------------------------------------------------------------
# interactive recovery
# ---------------------------------------------------------------------------


def uncertain_state(log=None):
    state, _ = p.participant_on_vote_request(log or DTLog(), 1, True, A, C)
    return state


def test_recovery_initiate_broadcasts_to_all_peers():
    state = uncertain_state()
    state, msgs = p.recovery_initiate(state, [0, 1], C, now=30, recovery_interval=20)
    assert state.recovery_round == 1 and state.recovery_deadline == 50
    assert [(m.kind, m.to.chain) for m in msgs] == [
        (MessageKind.DECISION_REQUIRE, 0),
        (MessageKind.DECISION_REQUIRE, 1),
    ]


def test_recovery_initiate_two_chain_cluster():
    state = uncertain_state()
    _, msgs = p.recovery_initiate(state, [0], C, now=0)
    assert [m.to.chain for m in msgs] == [0]


def req(frm=C, to=B):
    return Message(kind=MessageKind.DECISION_REQUIRE, frm=frm, to=to, txn=1)


def test_respond_decided_commit():
    log = DTLog()
    st = uncertain_state(log)
    st = p.participant_on_decision(st, log, Message(kind=MessageKind.COMMIT, frm=A, to=B, txn=1))
    new_state, reply = p.recovery_respond(1, None, st, log, C, B)
    assert new_state is None
    assert reply.kind is MessageKind.DECISION_REPLY and reply.decision is Decision.COMMIT


def test_respond_decided_abort():
    log = DTLog()
    st, _ = p.participant_on_vote_request(log, 1, False, A, B)
    _, reply = p.recovery_respond(1, None, st, log, C, B)
    assert reply.decision is Decision.ABORT


def test_respond_never_voted_aborts_unilaterally():
    log = DTLog()
    new_state, reply = p.recovery_respond(1, None, None, log, C, B)
    assert new_state.decided and new_state.decision is Decision.ABORT
    assert reply.decision is Decision.ABORT
    assert log.has(1, RecordKind.ABORT)


def test_respond_uncertain_stays_silent():
    st = uncertain_state()
    new_state, reply = p.recovery_respond(1, None, st, DTLog(), C, B)
    assert new_state is None and reply is None


def test_respond_undecided_coordinator_stays_silent():
    log = DTLog()
    coord, _ = p.coordinator_begin(log, 1, {1, 2}, A)
    _, reply = p.recovery_respond(1, coord, None, log, C, A)
    assert reply is None


def test_respond_decided_coordinator_replies():
    log = DTLog()
    coord, _ = p.coordinator_begin(log, 1, {1}, A)
    coord, _ = p.coordinator_on_vote(coord, log, vote_msg(MessageKind.VOTE_YES, B), A)
    _, reply = p.recovery_respond(1, coord, None, log, C, A)
    assert reply.decision is Decision.COMMIT


def test_recovery_timeout_paper_literal_aborts():
    log = DTLog()
    state = uncertain_state(log)
    state, msgs = p.recovery_on_timeout(state, log, ProtocolMode.PAPER_LITERAL, [0, 1], C, now=50)
    assert state.decided and state.decision is Decision.ABORT and msgs == []
    assert log.has(1, RecordKind.ABORT)


def test_recovery_timeout_safe_rebroadcasts():
    state = uncertain_state()
    state, _ = p.recovery_initiate(state, [0, 1], C, now=30, recovery_interval=20)
    state, msgs = p.recovery_on_timeout(state, DTLog(), ProtocolMode.SAFE, [0, 1], C,
                                        now=50, recovery_interval=20)
    assert not state.decided and state.recovery_round == 2
    assert state.recovery_deadline == 70
    assert [m.kind for m in msgs] == [MessageKind.DECISION_REQUIRE] * 2
