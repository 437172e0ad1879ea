// Event stream subscription: one WebSocket per open cluster view, with
// automatic reconnect and a state resync on every (re)connect.

import type { ControlApi, ClusterState } from "./api.js";
import type { StreamEvent } from "./model.js";

export type WebSocketFactory = (url: string) => WebSocket;

export interface StreamHandlers {
  onEvent: (evt: StreamEvent) => void;
  onResync?: (state: ClusterState) => void;
  onStatus?: (connected: boolean) => void;
}

export class EventStream {
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 250;

  constructor(
    private readonly api: ControlApi,
    private readonly clusterId: string,
    private readonly handlers: StreamHandlers,
    private readonly makeSocket: WebSocketFactory = (url) => new WebSocket(url),
  ) {}

  connect(): void {
    if (this.closed) return;
    const ws = this.makeSocket(this.api.eventsUrl(this.clusterId));
    this.ws = ws;
    ws.onopen = () => {
      this.retryMs = 250;
      this.handlers.onStatus?.(true);
      void this.resync();
    };
    ws.onmessage = (msg: MessageEvent) => {
      this.handlers.onEvent(JSON.parse(String(msg.data)) as StreamEvent);
    };
    ws.onclose = () => {
      this.handlers.onStatus?.(false);
      if (!this.closed) {
        setTimeout(() => this.connect(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
    ws.onerror = () => ws.close();
  }

  private async resync(): Promise<void> {
    if (!this.handlers.onResync) return;
    try {
      this.handlers.onResync(await this.api.getState(this.clusterId));
    } catch {
      // the next reconnect will try again
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
