"""Baseline protocols for comparison runs.

Blocking 2PC is the commit core with failure detection and interactive
recovery switched off: a participant that voted YES waits for the decision
forever, and a dead primary is never replaced. The hub baseline routes
every cross-chain message through one designated witness chain (two hops
per logical message, bounded forwarding per tick), which is the
centralized design the direct protocol exists to avoid.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any

from .config import ClusterConfig, ProtocolKind
from .sim import FaultSchedule, SimResult, Workload, sim_run


def run_blocking_2pc(
    cfg: ClusterConfig,
    workload: Workload,
    faults: FaultSchedule | None = None,
    **kwargs: Any,
) -> SimResult:
    return sim_run(replace(cfg, protocol=ProtocolKind.BLOCKING_2PC), workload, faults, **kwargs)


def run_hub(
    cfg: ClusterConfig,
    workload: Workload,
    faults: FaultSchedule | None = None,
    **kwargs: Any,
) -> SimResult:
    return sim_run(replace(cfg, protocol=ProtocolKind.HUB), workload, faults, **kwargs)


def run_protocol(
    kind: ProtocolKind,
    cfg: ClusterConfig,
    workload: Workload,
    faults: FaultSchedule | None = None,
    **kwargs: Any,
) -> SimResult:
    return sim_run(replace(cfg, protocol=kind), workload, faults, **kwargs)
