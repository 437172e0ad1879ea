"""Nonblocking cross-chain commit protocol, simulator, baselines, and
operator tooling."""

from .config import ClusterConfig, ProtocolKind, ProtocolMode, Timeouts
from .messages import Decision, Message, MessageKind, NodeId
from .sim import FaultSchedule, Workload, sim_run
from .modelcheck import sim_enumerate

__version__ = "0.1.0"

__all__ = [
    "ClusterConfig",
    "ProtocolKind",
    "ProtocolMode",
    "Timeouts",
    "Decision",
    "Message",
    "MessageKind",
    "NodeId",
    "FaultSchedule",
    "Workload",
    "sim_run",
    "sim_enumerate",
    "__version__",
]
