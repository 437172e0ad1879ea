"""Record the operator event stream for the five-transaction coordinator
crash demo, once per protocol, as console test fixtures.

The recording goes through the same event hub the control service streams
from, so each line is byte-for-byte what a WebSocket subscriber receives.
Requires the backend package (`pip install -e ..`).
"""

import json
from pathlib import Path

from cbt.config import ClusterConfig, ProtocolKind
from cbt.harness import blocking_fault
from cbt.service import _EventHub
from cbt.sim import Simulator, Workload

OUT = Path(__file__).parent.parent / "tests" / "fixtures"


def record(protocol: ProtocolKind) -> list[str]:
    hub = _EventHub()
    cfg = ClusterConfig(chains=3, nodes_per_chain=2, protocol=protocol)
    sim = Simulator(cfg, Workload(txns=5), blocking_fault(), keep_trace=False,
                    sink=hub.publish)
    sim.run(budget=120)
    return [json.dumps(evt, sort_keys=True) for evt in hub.history]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for protocol, name in ((ProtocolKind.BLOCKING_2PC, "fig3_2pc_events.jsonl"),
                           (ProtocolKind.CBT, "fig3_cbt_events.jsonl")):
        lines = record(protocol)
        (OUT / name).write_text("\n".join(lines) + "\n")
        counters = [json.loads(l)["value"] for l in lines
                    if json.loads(l).get("event") == "commit-counter"]
        print(f"{name}: {len(lines)} events, final counter {counters[-1]}")


if __name__ == "__main__":
    main()
