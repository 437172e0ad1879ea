"""Durable, append-only per-node write-ahead log for transaction records.

Each node keeps one log; it is the sole source of truth for crash recovery.
The on-disk layout is a stream of length-prefixed binary records with a
per-record checksum so a torn tail write is detected and truncated instead
of poisoning recovery.

Record layout: 4-byte little-endian length, payload (txn 8 bytes, kind
1 byte, term 8 bytes, seq 8 bytes, all little-endian), 4-byte CRC32 of the
payload.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator

from .errors import LogIntegrityError
from .messages import Decision

log = logging.getLogger(__name__)


class RecordKind(Enum):
    START_2PC = 0
    VOTED_YES = 1
    COMMIT = 2
    ABORT = 3


DECISION_RECORDS = frozenset({RecordKind.COMMIT, RecordKind.ABORT})

_PAYLOAD = struct.Struct("<QBQQ")
_LEN = struct.Struct("<I")
_CRC = struct.Struct("<I")


@dataclass(frozen=True, slots=True)
class LogRecord:
    txn: int
    kind: RecordKind
    term: int
    seq: int

    def encode(self) -> bytes:
        payload = _PAYLOAD.pack(self.txn, self.kind.value, self.term, self.seq)
        return _LEN.pack(len(payload)) + payload + _CRC.pack(zlib.crc32(payload))


def decision_of(kind: RecordKind) -> Decision | None:
    if kind is RecordKind.COMMIT:
        return Decision.COMMIT
    if kind is RecordKind.ABORT:
        return Decision.ABORT
    return None


class DTLog:
    """Append-only transaction log with invariant enforcement.

    In simulation the log lives in memory and durability is a modeling
    assumption (an append survives any later crash of its node). When
    constructed with a path, every append is written through and flushed
    before the call returns.
    """

    def __init__(self, path: str | Path | None = None):
        self.records: list[LogRecord] = []
        self._by_txn: dict[int, list[LogRecord]] = {}
        self._path = Path(path) if path else None
        self._fh = None
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._load_existing()
            self._fh = open(self._path, "ab")

    # -- append path ---------------------------------------------------

    def append(self, txn: int, kind: RecordKind, term: int = 0) -> int:
        """Append one record, returning its sequence number.

        Raises LogIntegrityError if the record would give the transaction a
        second decision or a vote after a decision.
        """
        self._check(txn, kind)
        rec = LogRecord(txn=txn, kind=kind, term=term, seq=len(self.records))
        self.records.append(rec)
        self._by_txn.setdefault(txn, []).append(rec)
        if self._fh:
            self._fh.write(rec.encode())
            self._fh.flush()
        return rec.seq

    def _check(self, txn: int, kind: RecordKind) -> None:
        existing = self._by_txn.get(txn, ())
        decided = next((r for r in existing if r.kind in DECISION_RECORDS), None)
        if decided is not None:
            if kind in DECISION_RECORDS and kind is not decided.kind:
                raise LogIntegrityError(
                    f"txn {txn}: conflicting decision {kind.name} after {decided.kind.name}"
                )
            if kind in DECISION_RECORDS:
                raise LogIntegrityError(
                    f"txn {txn}: duplicate decision record {kind.name}"
                )
            if kind is RecordKind.VOTED_YES:
                raise LogIntegrityError(f"txn {txn}: vote after decision")

    # -- queries ---------------------------------------------------------

    def records_for(self, txn: int) -> list[LogRecord]:
        return list(self._by_txn.get(txn, ()))

    def decision_for(self, txn: int) -> Decision | None:
        for r in self._by_txn.get(txn, ()):
            d = decision_of(r.kind)
            if d is not None:
                return d
        return None

    def has(self, txn: int, kind: RecordKind) -> bool:
        return any(r.kind is kind for r in self._by_txn.get(txn, ()))

    def txns(self) -> list[int]:
        return sorted(self._by_txn)

    def __len__(self) -> int:
        return len(self.records)

    # -- recovery --------------------------------------------------------

    def phases(self) -> dict[int, str]:
        """Phase implied by the log for each transaction, without writes.

        Values: "commit", "abort", "uncertain" (yes vote, no decision),
        "undecided-coordinator" (start record only).
        """
        out: dict[int, str] = {}
        for txn in self.txns():
            recs = self._by_txn[txn]
            decided = next(
                (decision_of(r.kind) for r in recs if r.kind in DECISION_RECORDS), None
            )
            if decided is not None:
                out[txn] = decided.value
            elif any(r.kind is RecordKind.VOTED_YES for r in recs):
                out[txn] = "uncertain"
            else:
                out[txn] = "undecided-coordinator"
        return out

    def recover(self) -> dict[int, str]:
        """Reconstruct per-transaction phases after a crash.

        A transaction this node coordinated (start record only, no decision)
        is aborted here and now: no participant can have committed, because
        a commit record is always logged before any commit message is sent.
        Uncertain transactions are reported as such; the caller must run the
        interactive recovery protocol for them.
        """
        out: dict[int, str] = {}
        for txn, phase in self.phases().items():
            if phase == "undecided-coordinator":
                term = self._by_txn[txn][-1].term
                self.append(txn, RecordKind.ABORT, term=term)
                out[txn] = "abort"
            else:
                out[txn] = phase
        return out

    # -- file backend ------------------------------------------------------

    def _load_existing(self) -> None:
        if not self._path.exists():
            return
        data = self._path.read_bytes()
        records, valid = _decode_stream(data)
        if valid != len(data):
            log.warning(
                "truncating %s at byte %d (torn or corrupt tail record)",
                self._path,
                valid,
            )
            with open(self._path, "r+b") as fh:
                fh.truncate(valid)
        for rec in records:
            self._check(rec.txn, rec.kind)
            self.records.append(rec)
            self._by_txn.setdefault(rec.txn, []).append(rec)

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


def _decode_stream(data: bytes) -> tuple[list[LogRecord], int]:
    """Decode records from bytes, returning them plus the valid byte count."""
    records: list[LogRecord] = []
    pos = 0
    while True:
        if len(data) - pos < _LEN.size:
            break
        (length,) = _LEN.unpack_from(data, pos)
        end = pos + _LEN.size + length + _CRC.size
        if length != _PAYLOAD.size or len(data) < end:
            break
        payload = data[pos + _LEN.size : pos + _LEN.size + length]
        (crc,) = _CRC.unpack_from(data, pos + _LEN.size + length)
        if zlib.crc32(payload) != crc:
            break
        txn, kind_val, term, seq = _PAYLOAD.unpack(payload)
        try:
            kind = RecordKind(kind_val)
        except ValueError:
            break
        records.append(LogRecord(txn=txn, kind=kind, term=term, seq=seq))
        pos = end
    return records, pos


def log_path(data_dir: str | Path, chain: int, node: int) -> Path:
    """Path pattern for a node's log: <data_dir>/chain<c>/node<n>/dt.log."""
    return Path(data_dir) / f"chain{chain}" / f"node{node}" / "dt.log"


def iter_file_records(path: str | Path) -> Iterator[LogRecord]:
    data = Path(path).read_bytes()
    records, _ = _decode_stream(data)
    return iter(records)
