// Every console action maps to exactly one service endpoint.

import { describe, expect, it, vi } from "vitest";

import { ControlApi } from "../src/api.js";

function mockFetch(payload: unknown = { ok: true }) {
  return vi.fn(async () => ({
    ok: true,
    status: 200,
    json: async () => payload,
    text: async () => JSON.stringify(payload),
  })) as unknown as typeof fetch;
}

describe("ControlApi", () => {
  it("creates clusters via POST /clusters", async () => {
    const fetcher = mockFetch({ id: "c1" });
    const api = new ControlApi("http://svc:1", fetcher);
    const res = await api.createCluster({ chains: 3, nodes_per_chain: 2, hub: false });
    expect(res.id).toBe("c1");
    const [url, init] = (fetcher as any).mock.calls[0];
    expect(url).toBe("http://svc:1/clusters");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body).chains).toBe(3);
  });

  it("submits transactions to the cluster txns endpoint", async () => {
    const fetcher = mockFetch({ txns: [1, 2, 3] });
    const api = new ControlApi("http://svc:1", fetcher);
    const res = await api.submitTxns("c7", 3);
    expect(res.txns).toEqual([1, 2, 3]);
    expect((fetcher as any).mock.calls[0][0]).toBe("http://svc:1/clusters/c7/txns");
  });

  it("crash and restart hit the node endpoints", async () => {
    const fetcher = mockFetch();
    const api = new ControlApi("http://svc:1", fetcher);
    await api.crashNode("c7", "0.0");
    await api.restartNode("c7", "0.0");
    const urls = (fetcher as any).mock.calls.map((c: any[]) => c[0]);
    expect(urls).toEqual([
      "http://svc:1/clusters/c7/nodes/0.0/crash",
      "http://svc:1/clusters/c7/nodes/0.0/restart",
    ]);
  });

  it("state is a plain GET and delete uses DELETE", async () => {
    const fetcher = mockFetch({ cluster: "c7", nodes: {}, txns: {} });
    const api = new ControlApi("http://svc:1", fetcher);
    await api.getState("c7");
    await api.deleteCluster("c7");
    const calls = (fetcher as any).mock.calls;
    expect(calls[0][0]).toBe("http://svc:1/clusters/c7/state");
    expect(calls[1][1].method).toBe("DELETE");
  });

  it("surfaces service errors", async () => {
    const fetcher = vi.fn(async () => ({
      ok: false,
      status: 422,
      text: async () => "cross-chain protocol needs >=2 chains",
      json: async () => ({}),
    })) as unknown as typeof fetch;
    const api = new ControlApi("http://svc:1", fetcher);
    await expect(
      api.createCluster({ chains: 1, nodes_per_chain: 2, hub: false }),
    ).rejects.toThrow(/422/);
  });

  it("derives the websocket url from the http base", () => {
    const api = new ControlApi("http://svc:8008");
    expect(api.eventsUrl("c2")).toBe("ws://svc:8008/clusters/c2/events");
  });
});
