"""Cluster configuration: topology, protocol selection, and timeout tuning.

All protocol timeouts are expressed in simulator ticks; live mode maps one
tick to ``tick_ms`` milliseconds. Keeping every timeout in the config makes
experiment reports self-describing and reruns exact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Any

from .errors import InvalidRequestError


class ProtocolKind(Enum):
    CBT = "cbt"
    BLOCKING_2PC = "2pc"
    HUB = "hub"


class ProtocolMode(Enum):
    """Recovery-timeout behavior for an uncertain participant.

    SAFE re-broadcasts the decision query forever and never aborts
    unilaterally inside the uncertain period. PAPER_LITERAL writes an abort
    record when the recovery wait times out; the model checker archives the
    schedules where that loses agreement.
    """

    SAFE = "safe"
    PAPER_LITERAL = "paper"


@dataclass(frozen=True)
class Timeouts:
    """Protocol timers, in ticks (sim) or tick units mapped to ms (live)."""

    vote_timeout: int = 10
    decision_timeout: int = 20
    recovery_interval: int = 20
    heartbeat_interval: int = 5
    election_timeout: int = 3  # candidacy collection window; must exceed 2x delivery
    replication_retry: int = 5
    submit_retry: int = 10

    def election_ticks(self, delivery_delay: int = 1) -> int:
        """Worst-case ticks from a leader crash to a working replacement.

        Detection needs up to 4 heartbeat intervals (the crash can land just
        after a successful evaluation), then the candidacy window, then one
        delivery for the win announcement.
        """
        return 4 * self.heartbeat_interval + self.election_timeout + delivery_delay


@dataclass(frozen=True)
class ClusterConfig:
    chains: int
    nodes_per_chain: int = 2
    protocol: ProtocolKind = ProtocolKind.CBT
    mode: ProtocolMode = ProtocolMode.SAFE
    seed: int = 0
    delivery_delay: int = 1
    timeouts: Timeouts = field(default_factory=Timeouts)
    hub_chain: int = 0
    hub_capacity: int = 4  # relayed messages forwarded per tick
    tick_ms: int = 100  # live mode: milliseconds per tick unit
    data_dir: str | None = None  # DT log root; CBT_DATA_DIR overrides
    base_port: int = 9600  # live mode: port of node 0.0; others follow
    ports: dict[str, int] = field(default_factory=dict)  # "chain.node" -> port

    def __post_init__(self):
        if self.chains < 1 or self.nodes_per_chain < 1:
            raise InvalidRequestError("need at least 1 chain and 1 node per chain")
        if self.protocol in (ProtocolKind.CBT, ProtocolKind.HUB) and self.chains < 2:
            # a single chain can still exercise replication, but the commit
            # protocol itself needs at least one participant
            pass
        if not (0 <= self.hub_chain < self.chains):
            raise InvalidRequestError("hub_chain out of range")

    @property
    def heartbeat_enabled(self) -> bool:
        # The blocking baseline and the hub baseline run without failure
        # detection: a dead primary stays dead, which is the point of the
        # comparison.
        return self.protocol is ProtocolKind.CBT

    @property
    def recovery_enabled(self) -> bool:
        return self.protocol is ProtocolKind.CBT

    def resolved_data_dir(self) -> Path | None:
        env = os.environ.get("CBT_DATA_DIR")
        if env:
            return Path(env)
        return Path(self.data_dir) if self.data_dir else None

    def port_for(self, chain: int, node: int) -> int:
        key = f"{chain}.{node}"
        if key in self.ports:
            return self.ports[key]
        return self.base_port + chain * self.nodes_per_chain + node

    def to_obj(self) -> dict[str, Any]:
        obj = asdict(self)
        obj["protocol"] = self.protocol.value
        obj["mode"] = self.mode.value
        return obj

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "ClusterConfig":
        data = dict(obj)
        if "timeouts" in data and isinstance(data["timeouts"], dict):
            data["timeouts"] = Timeouts(**data["timeouts"])
        if data.pop("hub", False) and "protocol" not in data:
            data["protocol"] = ProtocolKind.HUB
        if "protocol" in data:
            data["protocol"] = ProtocolKind(data["protocol"])
        if "mode" in data:
            data["mode"] = ProtocolMode(data["mode"])
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ClusterConfig":
        return cls.from_obj(json.loads(text))


def load_config(path: str | Path) -> ClusterConfig:
    return ClusterConfig.from_json(Path(path).read_text())
