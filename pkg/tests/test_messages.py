"""Wire codec: round trips for the closed message vocabulary."""

import pytest
from hypothesis import given, strategies as st

from cbt.errors import DecodeError
from cbt.messages import (
    Decision,
    Message,
    MessageKind,
    NodeId,
    decode_frame,
    encode_frame,
    read_frames,
)

ALL_KINDS = list(MessageKind)


def make(kind: MessageKind, **kw) -> Message:
    base = dict(frm=NodeId(0, 0), to=NodeId(1, 0), term=3, txn=7)
    if kind is MessageKind.DECISION_REPLY:
        base["decision"] = Decision.COMMIT
    if kind in (MessageKind.HEARTBEAT_PING, MessageKind.HEARTBEAT_ACK,
                MessageKind.ELECTION_START, MessageKind.ELECTION_WIN,
                MessageKind.REPLICATE, MessageKind.REPLICATE_ACK):
        base["txn"] = None
    base.update(kw)
    return Message(kind=kind, **base)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_frame_round_trip_every_kind(kind):
    msg = make(kind)
    assert decode_frame(encode_frame(msg)) == msg


def test_decision_reply_carries_exactly_one_decision():
    with pytest.raises(ValueError):
        Message(kind=MessageKind.COMMIT, frm=NodeId(0, 0), to=NodeId(1, 0),
                txn=1, decision=Decision.COMMIT)
    with pytest.raises(ValueError):
        Message(kind=MessageKind.DECISION_REPLY, frm=NodeId(0, 0), to=NodeId(1, 0), txn=1)


def test_unknown_kind_is_a_decode_error():
    obj = make(MessageKind.COMMIT).to_obj()
    obj["kind"] = "commit-v2"
    import json
    body = json.dumps(obj).encode()
    frame = len(body).to_bytes(4, "big") + body
    with pytest.raises(DecodeError):
        decode_frame(frame)


def test_truncated_frame_is_a_decode_error():
    frame = encode_frame(make(MessageKind.VOTE_REQUEST))
    with pytest.raises(DecodeError):
        decode_frame(frame[:-3])


def test_read_frames_splits_stream_and_keeps_tail():
    msgs = [make(MessageKind.VOTE_YES), make(MessageKind.ABORT, txn=9)]
    stream = b"".join(encode_frame(m) for m in msgs)
    head, tail = stream[:-5], stream[-5:]
    got, rest = read_frames(head)
    assert got == msgs[:1]
    got2, rest2 = read_frames(rest + tail)
    assert got2 == msgs[1:]
    assert rest2 == b""


def test_node_id_parse():
    assert NodeId.parse("2.1") == NodeId(2, 1)
    assert NodeId.parse("0-3") == NodeId(0, 3)
    with pytest.raises(DecodeError):
        NodeId.parse("xyz")


@given(
    kind=st.sampled_from(ALL_KINDS),
    fc=st.integers(0, 63), fn=st.integers(0, 3),
    tc=st.integers(0, 63), tn=st.integers(0, 3),
    term=st.integers(0, 10**6),
    txn=st.one_of(st.none(), st.integers(1, 10**9)),
)
def test_round_trip_property(kind, fc, fn, tc, tn, term, txn):
    msg = Message(
        kind=kind,
        frm=NodeId(fc, fn),
        to=NodeId(tc, tn),
        term=term,
        txn=txn,
        decision=Decision.ABORT if kind is MessageKind.DECISION_REPLY else None,
    )
    assert decode_frame(encode_frame(msg)) == msg
