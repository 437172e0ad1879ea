"""Write-ahead log: append invariants, crash recovery, file round trips."""

import pytest
from hypothesis import given, strategies as st

from cbt.dtlog import DTLog, RecordKind, iter_file_records, log_path
from cbt.errors import LogIntegrityError


def test_append_assigns_dense_sequence():
    log = DTLog()
    assert log.append(1, RecordKind.VOTED_YES) == 0
    assert log.append(1, RecordKind.COMMIT) == 1


def test_conflicting_decision_is_rejected():
    log = DTLog()
    log.append(1, RecordKind.COMMIT)
    with pytest.raises(LogIntegrityError):
        log.append(1, RecordKind.ABORT)


def test_duplicate_decision_is_rejected():
    log = DTLog()
    log.append(1, RecordKind.ABORT)
    with pytest.raises(LogIntegrityError):
        log.append(1, RecordKind.ABORT)


def test_vote_after_decision_is_rejected():
    log = DTLog()
    log.append(1, RecordKind.ABORT)
    with pytest.raises(LogIntegrityError):
        log.append(1, RecordKind.VOTED_YES)


def test_unilateral_abort_without_prior_records_is_fine():
    log = DTLog()
    log.append(2, RecordKind.ABORT)
    assert log.phases() == {2: "abort"}


def test_recover_uncertain_participant():
    log = DTLog()
    log.append(1, RecordKind.VOTED_YES)
    assert log.recover() == {1: "uncertain"}
    assert len(log) == 1  # recovery does not decide for an uncertain vote


def test_recover_decided():
    log = DTLog()
    log.append(1, RecordKind.VOTED_YES)
    log.append(1, RecordKind.COMMIT)
    assert log.recover() == {1: "commit"}


def test_recover_coordinator_start_only_presumes_abort():
    log = DTLog()
    log.append(1, RecordKind.START_2PC)
    assert log.recover() == {1: "abort"}
    assert log.has(1, RecordKind.ABORT)  # the abort record was written


def test_file_round_trip(tmp_path):
    path = log_path(tmp_path, 0, 1)
    log = DTLog(path)
    log.append(1, RecordKind.START_2PC, term=1)
    log.append(1, RecordKind.COMMIT, term=1)
    log.append(2, RecordKind.ABORT, term=2)
    log.close()

    reopened = DTLog(path)
    assert [(r.txn, r.kind, r.term, r.seq) for r in reopened.records] == [
        (1, RecordKind.START_2PC, 1, 0),
        (1, RecordKind.COMMIT, 1, 1),
        (2, RecordKind.ABORT, 2, 2),
    ]
    reopened.close()


def test_torn_tail_is_truncated(tmp_path):
    path = log_path(tmp_path, 1, 0)
    log = DTLog(path)
    log.append(1, RecordKind.VOTED_YES)
    log.append(1, RecordKind.COMMIT)
    log.close()
    with open(path, "ab") as fh:
        fh.write(b"\x1d\x00\x00\x00partial-garbage")

    reopened = DTLog(path)
    assert [r.kind for r in reopened.records] == [RecordKind.VOTED_YES, RecordKind.COMMIT]
    # the torn bytes are gone from disk after recovery
    assert list(iter_file_records(path)) == reopened.records
    reopened.close()


def test_corrupt_crc_truncates_from_there(tmp_path):
    path = log_path(tmp_path, 0, 0)
    log = DTLog(path)
    log.append(1, RecordKind.VOTED_YES)
    log.append(1, RecordKind.ABORT)
    log.close()
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF  # flip a bit in the last record's checksum
    path.write_bytes(bytes(data))

    reopened = DTLog(path)
    assert [r.kind for r in reopened.records] == [RecordKind.VOTED_YES]
    reopened.close()


@st.composite
def legal_histories(draw):
    txns = draw(st.lists(st.integers(1, 4), min_size=1, max_size=6, unique=True))
    history = []
    for txn in txns:
        shape = draw(st.sampled_from([
            ["start"], ["start", "commit"], ["start", "abort"],
            ["yes"], ["yes", "commit"], ["yes", "abort"], ["abort"],
        ]))
        history.append((txn, shape))
    return history


KINDS = {"start": RecordKind.START_2PC, "yes": RecordKind.VOTED_YES,
         "commit": RecordKind.COMMIT, "abort": RecordKind.ABORT}


@given(legal_histories())
def test_recover_matches_reference(history):
    log = DTLog()
    for txn, shape in history:
        for step in shape:
            log.append(txn, KINDS[step])
    expected = {}
    for txn, shape in history:
        if "commit" in shape:
            expected[txn] = "commit"
        elif "abort" in shape:
            expected[txn] = "abort"
        elif "yes" in shape:
            expected[txn] = "uncertain"
        else:
            expected[txn] = "abort"  # coordinator start with no decision
    assert log.recover() == expected
