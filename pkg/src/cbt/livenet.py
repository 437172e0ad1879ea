"""Socket transport and live cluster runtime.

Each node runs a real TCP listener plus one executor thread that serializes
everything touching its state machine: inbound messages, timer fires, and
submissions. Logical protocol time maps to wall time at ``tick_ms``
milliseconds per tick; timers fire with their scheduled tick value so the
state machines see the same arithmetic as under simulation.

Delivery is at-least-once best effort: a connection failure is simply a
lost message, indistinguishable from a crashed peer, and the protocol's
own timeouts take it from there.
"""

from __future__ import annotations

import heapq
import queue
import socket
import threading
import time
from typing import Any, Callable, Iterator

from .config import ClusterConfig
from .dtlog import DTLog, log_path
from .errors import DuplicateTransactionError, NotLeaderError
from .messages import Message, NodeId, encode_frame, read_frames
from .node import Node
from .replication import NodeRole


def live_send(msg: Message, addr: tuple[str, int], timeout: float = 0.5) -> None:
    """Send one framed message; failures surface as protocol timeouts."""
    with socket.create_connection(addr, timeout=timeout) as sock:
        sock.sendall(encode_frame(msg))


def live_listen(addr: tuple[str, int], stop: threading.Event | None = None) -> Iterator[Message]:
    """Accept framed messages on addr until the stop event is set."""
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(addr)
    server.listen(16)
    server.settimeout(0.2)
    try:
        while stop is None or not stop.is_set():
            try:
                conn, _ = server.accept()
            except socket.timeout:
                continue
            with conn:
                conn.settimeout(1.0)
                buf = b""
                try:
                    while True:
                        chunk = conn.recv(65536)
                        if not chunk:
                            break
                        buf += chunk
                        msgs, buf = read_frames(buf)
                        yield from msgs
                except (socket.timeout, OSError):
                    continue
    finally:
        server.close()


class LiveNode:
    """One node process: listener + serialized executor."""

    def __init__(
        self,
        nid: NodeId,
        cfg: ClusterConfig,
        addresses: dict[NodeId, tuple[str, int]],
        *,
        votes: dict[int, dict[int, bool]] | None = None,
        event_sink: Callable[[dict[str, Any]], None] | None = None,
    ):
        self.nid = nid
        self.cfg = cfg
        self.addresses = addresses
        self.event_sink = event_sink
        data_dir = cfg.resolved_data_dir()
        dtlog = DTLog(log_path(data_dir, nid.chain, nid.node)) if data_dir else DTLog()
        self.node = Node(nid, cfg, dtlog=dtlog, votes=votes)
        self._inbox: queue.Queue = queue.Queue()
        self._timers: list[tuple[float, int, tuple]] = []  # (deadline, tick, key)
        self._stop = threading.Event()
        self._t0 = time.monotonic()
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind(addresses[nid])
        self._server.listen(32)
        self._server.settimeout(0.1)
        self._threads: list[threading.Thread] = []

    # -- time mapping ------------------------------------------------------

    def _now_tick(self) -> int:
        return int((time.monotonic() - self._t0) * 1000 / self.cfg.tick_ms)

    def _deadline_for(self, tick: int) -> float:
        return self._t0 + tick * self.cfg.tick_ms / 1000.0

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._stop.clear()
        accept = threading.Thread(target=self._accept_loop, daemon=True)
        run = threading.Thread(target=self._run_loop, daemon=True)
        self._threads = [accept, run]
        self._inbox.put(("start", None))
        accept.start()
        run.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        self._server.close()
        self.node.dtlog.close()

    def submit(self, txn: int, participants: frozenset[int]) -> None:
        self._inbox.put(("submit", (txn, participants)))

    def call(self, fn: Callable[[Node], Any]) -> Any:
        """Run a read-only function on the executor thread and wait for it."""
        done = queue.Queue()
        self._inbox.put(("call", (fn, done)))
        return done.get(timeout=5.0)

    # -- loops ---------------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._read_conn, args=(conn,), daemon=True).start()

    def _read_conn(self, conn: socket.socket) -> None:
        buf = b""
        conn.settimeout(2.0)
        with conn:
            try:
                while not self._stop.is_set():
                    chunk = conn.recv(65536)
                    if not chunk:
                        break
                    buf += chunk
                    msgs, buf = read_frames(buf)
                    for m in msgs:
                        self._inbox.put(("msg", m))
            except (socket.timeout, OSError):
                return

    def _run_loop(self) -> None:
        while not self._stop.is_set():
            timeout = 0.05
            if self._timers:
                timeout = max(0.0, min(timeout, self._timers[0][0] - time.monotonic()))
            try:
                item = self._inbox.get(timeout=timeout)
            except queue.Empty:
                item = None
            if item is not None:
                kind, arg = item
                if kind == "msg":
                    self.node.handle_message(self._now_tick(), arg)
                elif kind == "submit":
                    txn, participants = arg
                    try:
                        self.node.handle_submit(self._now_tick(), txn, participants)
                    except (NotLeaderError, DuplicateTransactionError):
                        pass
                elif kind == "start":
                    self.node.on_start(self._now_tick())
                elif kind == "call":
                    fn, done = arg
                    done.put(fn(self.node))
                self._drain()
            while self._timers and self._timers[0][0] <= time.monotonic():
                _, tick, key = heapq.heappop(self._timers)
                self.node.handle_timer(tick, key)
                self._drain()

    def _drain(self) -> None:
        staged = self.node.take_staged()
        for tick, key in staged.timers:
            heapq.heappush(self._timers, (self._deadline_for(tick), tick, key))
        for evt in staged.events:
            if self.event_sink:
                self.event_sink({"t": self._now_tick(), **evt})
        for msg in staged.msgs:
            addr = self.addresses.get(msg.to)
            if addr is None:
                continue
            if self.event_sink:
                self.event_sink({
                    "t": self._now_tick(), "e": "send", "kind": msg.kind.value,
                    "frm": str(msg.frm), "to": str(msg.to), "fc": msg.frm.chain,
                    "tc": msg.to.chain, "dtc": msg.to.chain, "txn": msg.txn,
                    "term": msg.term,
                })
            try:
                live_send(msg, addr)
            except OSError:
                pass  # peer unreachable: the protocol timeout path owns this


class LiveCluster:
    """A full cluster of socket nodes hosted in one process (one executor
    thread per node, as separate processes would have)."""

    def __init__(self, cfg: ClusterConfig, *, votes: dict[int, dict[int, bool]] | None = None,
                 host: str = "127.0.0.1"):
        self.cfg = cfg
        self.host = host
        self.addresses = {
            NodeId(c, n): (host, cfg.port_for(c, n))
            for c in range(cfg.chains)
            for n in range(cfg.nodes_per_chain)
        }
        self.events: queue.Queue = queue.Queue()
        self._subs: list[Callable[[dict[str, Any]], None]] = []
        self.nodes: dict[NodeId, LiveNode] = {}
        self.crashed: set[NodeId] = set()
        self._next_txn = 1
        self._votes = votes or {}
        for nid, _ in sorted(self.addresses.items()):
            self.nodes[nid] = LiveNode(
                nid, cfg, self.addresses, votes=self._votes, event_sink=self._on_event
            )

    def _on_event(self, evt: dict[str, Any]) -> None:
        self.events.put(evt)
        for sub in list(self._subs):
            sub(evt)

    def subscribe(self, fn: Callable[[dict[str, Any]], None]) -> None:
        self._subs.append(fn)

    def start(self) -> None:
        for nid in sorted(self.nodes):
            self.nodes[nid].start()

    def stop(self) -> None:
        for nid in sorted(self.nodes):
            if nid not in self.crashed:
                self.nodes[nid].stop()

    # -- operator actions --------------------------------------------------

    def submit_txns(self, count: int, coordinator_chain: int = 0) -> list[int]:
        txns = []
        for _ in range(count):
            txn = self._next_txn
            self._next_txn += 1
            participants = frozenset(
                c for c in range(self.cfg.chains) if c != coordinator_chain
            )
            leader = self.current_leader(coordinator_chain)
            if leader is not None:
                self.nodes[leader].submit(txn, participants)
            txns.append(txn)
        return txns

    def crash_node(self, nid: NodeId) -> None:
        if nid in self.crashed:
            return
        self.crashed.add(nid)
        self.nodes[nid].stop()
        self._on_event({"t": 0, "e": "crash", "node": str(nid), "pos": "live"})

    def restart_node(self, nid: NodeId) -> None:
        if nid not in self.crashed:
            return
        self.crashed.discard(nid)
        live = LiveNode(
            nid, self.cfg, self.addresses, votes=self._votes, event_sink=self._on_event
        )
        self.nodes[nid] = live
        live.node.on_restart(0)
        live.start()
        self._on_event({"t": 0, "e": "restart", "node": str(nid)})

    def current_leader(self, chain: int) -> NodeId | None:
        best, best_term = None, -1
        for n in range(self.cfg.nodes_per_chain):
            nid = NodeId(chain, n)
            if nid in self.crashed:
                continue
            try:
                role, term = self.nodes[nid].call(lambda nd: (nd.role, nd.term))
            except queue.Empty:
                continue
            if role is NodeRole.LEADER and term > best_term:
                best, best_term = nid, term
        return best

    def snapshot(self) -> dict[str, Any]:
        out = {}
        for nid in sorted(self.nodes):
            if nid in self.crashed:
                out[str(nid)] = {"node": str(nid), "crashed": True}
                continue
            try:
                snap = self.nodes[nid].call(lambda nd: nd.snapshot())
            except queue.Empty:
                snap = {"node": str(nid)}
            snap["crashed"] = False
            out[str(nid)] = snap
        return out

    def wait_decided(self, txns: list[int], timeout: float = 10.0) -> bool:
        """Block until every chain's leader has decided all given txns."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self._all_decided(txns):
                return True
            time.sleep(0.05)
        return self._all_decided(txns)

    def _all_decided(self, txns: list[int]) -> bool:
        for c in range(self.cfg.chains):
            leader = self.current_leader(c)
            if leader is None:
                return False
            phases = self.nodes[leader].call(
                lambda nd: {t: nd.txn_phase(t) for t in txns}
            )
            for t in txns:
                if phases[t] not in ("commit", "abort", None):
                    return False
                if c == 0 and phases[t] is None:
                    return False
        return True
