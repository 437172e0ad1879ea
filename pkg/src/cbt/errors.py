"""Exception types shared across the protocol, log, transport, and harness layers."""


class CBTError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRequestError(CBTError):
    """A request violates a precondition (empty participant set, bad config, ...)."""


class DuplicateTransactionError(CBTError):
    """A transaction id was submitted twice to the same coordinator chain."""


class NotLeaderError(CBTError):
    """A leader-only operation was invoked on a non-leader node.

    Carries the node's current belief about who the leader is (may be None
    during an election).
    """

    def __init__(self, believed_leader=None):
        super().__init__(f"not the leader (believed leader: {believed_leader})")
        self.believed_leader = believed_leader


class ProtocolViolationError(CBTError):
    """A message arrived that no legal execution can produce (e.g. COMMIT
    for a transaction the participant never voted on)."""


class InvariantViolationError(CBTError):
    """A terminal decision was contradicted. This is the disagreement the
    model checker hunts for; simulation surfaces it as a verdict rather
    than letting it escape."""


class LogIntegrityError(CBTError):
    """An append would violate the write-ahead log's per-transaction rules
    (second conflicting decision, vote after decision)."""


class DecodeError(CBTError):
    """A wire frame or log record could not be decoded."""


class ChainDeadError(CBTError):
    """An election was requested for a chain with no live nodes."""


class SizeLimitError(CBTError):
    """An exhaustive enumeration was requested on an instance too large to
    enumerate."""


class InvalidBaselineError(CBTError):
    """A scaling factor was requested against a zero baseline."""
