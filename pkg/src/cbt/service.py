"""Operator control service: create clusters, submit transactions, inject
crashes, inspect state, and stream protocol events.

Clusters run on one of two transports. ``sim-interactive`` steps the
deterministic simulator in real time at a configurable tick rate so an
operator can inject faults mid-protocol; ``live`` hosts socket-backed
nodes. Both feed the same event stream, which also carries a synthesized
commit-counter update whenever the coordinator-side commit count grows
(the number the console's top-right panel shows).

All mutations to one cluster are serialized behind its lock; event
subscribers are fan-out read-only queues.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading
import time
from typing import Any

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .config import ClusterConfig, ProtocolKind, ProtocolMode, Timeouts
from .errors import InvalidRequestError
from .livenet import LiveCluster
from .messages import NodeId
from .metrics import MetricsCollector
from .sim import CrashNode, FaultSchedule, RestartNode, Simulator, Workload

_STREAM_NAMES = {
    "send": "message-sent",
    "deliver": "message-delivered",
    "log-append": "log-append",
    "decide": "decision",
    "crash": "crash",
    "restart": "restart",
    "election": "election",
    "submit": "submit",
    "drop": "message-dropped",
    "invariant-violation": "invariant-violation",
}


class _EventHub:
    """Fan-out of trace events to subscribers plus commit counting."""

    def __init__(self):
        self.collector = MetricsCollector()
        self.subscribers: list[queue.Queue] = []
        self.history: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def publish(self, evt: dict[str, Any]) -> None:
        self.collector.on_event(evt)
        out = dict(evt)
        out["event"] = _STREAM_NAMES.get(evt.get("e", ""), evt.get("e", ""))
        updates = [out]
        counter = len(self.collector.commit_sends)
        if getattr(self, "_last_counter", None) != counter:
            self._last_counter = counter
            updates.append({"t": evt.get("t", 0), "event": "commit-counter", "value": counter})
        with self._lock:
            for update in updates:
                self.history.append(update)
                for sub in self.subscribers:
                    sub.put(update)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            for evt in self.history:
                q.put(evt)
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self.subscribers:
                self.subscribers.remove(q)


class SimInteractiveCluster:
    """The deterministic simulator stepped in real time by a pacing thread."""

    def __init__(self, cfg: ClusterConfig, ticks_per_second: float = 50.0):
        self.cfg = cfg
        self.hub = _EventHub()
        self.lock = threading.Lock()
        self.workload = Workload(txns=0)
        self.sim = Simulator(cfg, self.workload, FaultSchedule([]), keep_trace=False,
                             sink=self.hub.publish)
        self.tps = ticks_per_second
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._pace, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)

    def _pace(self) -> None:
        period = 1.0 / self.tps
        while not self._stop.is_set():
            start = time.monotonic()
            with self.lock:
                self.sim._tick()
                self.sim.now += 1
            delay = period - (time.monotonic() - start)
            if delay > 0:
                self._stop.wait(delay)

    def submit_txns(self, count: int, votes: dict[int, dict[int, bool]] | None = None) -> list[int]:
        with self.lock:
            first = self.workload.txns + 1
            self.workload.txns += count
            if votes:
                self.workload.votes.update(votes)
            return list(range(first, first + count))

    def crash_node(self, nid: NodeId) -> None:
        with self.lock:
            self.sim._timed.append(CrashNode(nid.chain, nid.node, self.sim.now + 1, "start"))

    def restart_node(self, nid: NodeId) -> None:
        with self.lock:
            self.sim._timed.append(RestartNode(nid.chain, nid.node, self.sim.now + 1))

    def snapshot(self) -> dict[str, Any]:
        with self.lock:
            nodes = {
                str(nid): {**node.snapshot(), "crashed": nid in self.sim.crashed}
                for nid, node in sorted(self.sim.nodes.items())
            }
            tick = self.sim.now
        return {"tick": tick, "nodes": nodes}


class ClusterHandle:
    def __init__(self, cluster_id: str, cfg: ClusterConfig, transport: str,
                 backend: Any, hub: _EventHub):
        self.id = cluster_id
        self.cfg = cfg
        self.transport = transport
        self.backend = backend
        self.hub = hub

    def state(self) -> dict[str, Any]:
        snap = self.backend.snapshot()
        metrics = self.hub.collector
        txns: dict[str, Any] = {}
        for node in snap["nodes"].values():
            for txn, phase in (node.get("txns") or {}).items():
                agg = txns.setdefault(txn, {"phase": "in-flight", "uncertain_nodes": []})
                if phase in ("commit", "abort"):
                    agg["phase"] = phase
                if phase == "uncertain":
                    agg["uncertain_nodes"].append(node["node"])
        return {
            "cluster": self.id,
            "transport": self.transport,
            "config": self.cfg.to_obj(),
            "tick": snap.get("tick"),
            "nodes": snap["nodes"],
            "txns": txns,
            "commit_messages": len(metrics.commit_sends),
            "committed_txns": len(metrics.committed),
        }


def create_app() -> FastAPI:
    app = FastAPI(title="cross-chain commit control service")
    clusters: dict[str, ClusterHandle] = {}
    ids = itertools.count(1)
    registry_lock = threading.Lock()

    def _get(cluster_id: str) -> ClusterHandle:
        handle = clusters.get(cluster_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no cluster {cluster_id}")
        return handle

    @app.post("/clusters")
    def create_cluster(body: dict[str, Any]) -> dict[str, Any]:
        chains = int(body.get("chains", 3))
        if chains < 2:
            raise HTTPException(status_code=422,
                                detail="cross-chain protocol needs >=2 chains")
        protocol = ProtocolKind(body.get("protocol", "hub" if body.get("hub") else "cbt"))
        if body.get("hub") and protocol is ProtocolKind.CBT:
            protocol = ProtocolKind.HUB
        try:
            timeouts = Timeouts(**body["timeouts"]) if "timeouts" in body else Timeouts()
            cfg = ClusterConfig(
                chains=chains,
                nodes_per_chain=int(body.get("nodes_per_chain", 2)),
                protocol=protocol,
                mode=ProtocolMode(body.get("mode", "safe")),
                seed=int(body.get("seed", 0)),
                timeouts=timeouts,
                hub_chain=int(body.get("hub_chain", 0)),
                tick_ms=int(body.get("tick_ms", 100)),
                data_dir=body.get("data_dir"),
                base_port=int(body.get("base_port", 9600)),
                ports={str(k): int(v) for k, v in body.get("ports", {}).items()},
            )
        except (InvalidRequestError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        transport = body.get("transport", "sim-interactive")
        cluster_id = f"c{next(ids)}"
        if transport == "sim-interactive":
            backend = SimInteractiveCluster(cfg, float(body.get("ticks_per_second", 50)))
            hub = backend.hub
        elif transport == "live":
            hub = _EventHub()
            try:
                backend = LiveCluster(cfg)
            except OSError as exc:
                raise HTTPException(status_code=409, detail=f"port conflict: {exc}") from exc
            backend.subscribe(hub.publish)
        else:
            raise HTTPException(status_code=422, detail=f"unknown transport {transport!r}")
        backend.start()
        handle = ClusterHandle(cluster_id, cfg, transport, backend, hub)
        with registry_lock:
            clusters[cluster_id] = handle
        return {"id": cluster_id, "config": cfg.to_obj(), "transport": transport}

    @app.post("/clusters/{cluster_id}/txns")
    def submit_txns(cluster_id: str, body: dict[str, Any]) -> dict[str, Any]:
        handle = _get(cluster_id)
        count = int(body.get("count", 1))
        votes = {
            int(t): {int(c): bool(v) for c, v in m.items()}
            for t, m in (body.get("votes") or {}).items()
        }
        txns = handle.backend.submit_txns(count, votes) if handle.transport == "sim-interactive" \
            else handle.backend.submit_txns(count)
        return {"txns": txns}

    @app.post("/clusters/{cluster_id}/nodes/{node}/crash")
    def crash_node(cluster_id: str, node: str) -> dict[str, Any]:
        handle = _get(cluster_id)
        handle.backend.crash_node(NodeId.parse(node))
        return {"ok": True}

    @app.post("/clusters/{cluster_id}/nodes/{node}/restart")
    def restart_node(cluster_id: str, node: str) -> dict[str, Any]:
        handle = _get(cluster_id)
        handle.backend.restart_node(NodeId.parse(node))
        return {"ok": True}

    @app.get("/clusters/{cluster_id}/state")
    def get_state(cluster_id: str) -> dict[str, Any]:
        return _get(cluster_id).state()

    @app.delete("/clusters/{cluster_id}")
    def delete_cluster(cluster_id: str) -> dict[str, Any]:
        handle = _get(cluster_id)
        handle.backend.stop()
        with registry_lock:
            clusters.pop(cluster_id, None)
        return {"ok": True}

    @app.websocket("/clusters/{cluster_id}/events")
    async def events(ws: WebSocket, cluster_id: str) -> None:
        import asyncio

        handle = clusters.get(cluster_id)
        await ws.accept()
        if handle is None:
            await ws.close(code=4004)
            return
        sub = handle.hub.subscribe()
        try:
            while True:
                try:
                    evt = sub.get_nowait()
                except queue.Empty:
                    await asyncio.sleep(0.02)
                    continue
                await ws.send_text(json.dumps(evt, sort_keys=True))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            handle.hub.unsubscribe(sub)

    return app


app = create_app()
