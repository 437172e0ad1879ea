// Console view model: a pure reducer over the service's event stream plus
// state snapshots. It renders what it receives; the commit counter is the
// last commit-counter value the stream delivered, never a local recount.

import type { ClusterState } from "./api.js";

export interface StreamEvent {
  event: string;
  t?: number;
  value?: number;
  kind?: string;
  node?: string;
  frm?: string;
  to?: string;
  txn?: number | null;
  decision?: string;
  leader?: string;
  chain?: number;
  detail?: string;
  [key: string]: unknown;
}

export interface LogLine {
  tick: number;
  text: string;
  severity: "info" | "warn" | "error";
}

const LOGGED = new Set([
  "submit",
  "decision",
  "crash",
  "restart",
  "election",
  "invariant-violation",
]);

export class ClusterModel {
  commitCounter = 0;
  decisionEvents = 0;
  messagesSent = 0;
  messagesDelivered = 0;
  log: LogLine[] = [];
  crashedNodes = new Set<string>();
  leaders = new Map<number, string>();
  state: ClusterState | null = null;
  private uncertainSince = new Map<string, number>();
  blockedHoldMs: number;

  constructor(blockedHoldMs = 3000) {
    this.blockedHoldMs = blockedHoldMs;
  }

  apply(evt: StreamEvent): void {
    switch (evt.event) {
      case "commit-counter":
        this.commitCounter = evt.value ?? this.commitCounter;
        break;
      case "message-sent":
        this.messagesSent += 1;
        break;
      case "message-delivered":
        this.messagesDelivered += 1;
        break;
      case "decision":
        this.decisionEvents += 1;
        break;
      case "crash":
        if (evt.node) this.crashedNodes.add(evt.node);
        break;
      case "restart":
        if (evt.node) this.crashedNodes.delete(evt.node);
        break;
      case "election":
        if (evt.chain !== undefined && evt.leader) {
          this.leaders.set(evt.chain, evt.leader);
        }
        break;
    }
    if (LOGGED.has(evt.event)) {
      this.log.push({
        tick: evt.t ?? 0,
        text: describe(evt),
        severity:
          evt.event === "invariant-violation"
            ? "error"
            : evt.event === "crash"
              ? "warn"
              : "info",
      });
    }
  }

  applyAll(events: StreamEvent[]): void {
    for (const evt of events) this.apply(evt);
  }

  // State snapshots complement the stream (reconnect resync, uncertainty).
  applyState(state: ClusterState, nowMs: number): void {
    this.state = state;
    const uncertain = new Set<string>();
    for (const status of Object.values(state.txns)) {
      for (const node of status.uncertain_nodes) uncertain.add(node);
    }
    for (const node of uncertain) {
      if (!this.uncertainSince.has(node)) this.uncertainSince.set(node, nowMs);
    }
    for (const node of [...this.uncertainSince.keys()]) {
      if (!uncertain.has(node)) this.uncertainSince.delete(node);
    }
    for (const [node, info] of Object.entries(state.nodes)) {
      if (info.crashed) this.crashedNodes.add(node);
      else this.crashedNodes.delete(node);
    }
  }

  // A participant stuck in its uncertain period long enough that the
  // decision is clearly overdue gets the distinct "blocked" marking.
  blockedNodes(nowMs: number): string[] {
    const out: string[] = [];
    for (const [node, since] of this.uncertainSince.entries()) {
      if (nowMs - since >= this.blockedHoldMs) out.push(node);
    }
    return out.sort();
  }
}

function describe(evt: StreamEvent): string {
  switch (evt.event) {
    case "submit":
      return `txn ${evt.txn} submitted (coordinator chain ${evt["coordinator"]})`;
    case "decision":
      return `node ${evt.node} decided ${evt.decision} for txn ${evt.txn}`;
    case "crash":
      return `node ${evt.node} crashed`;
    case "restart":
      return `node ${evt.node} restarted`;
    case "election":
      return `chain ${evt.chain} elected ${evt.leader} (term ${evt["term"]})`;
    case "invariant-violation":
      return `INVARIANT VIOLATION at ${evt.node}: ${evt.detail}`;
    default:
      return evt.event;
  }
}
