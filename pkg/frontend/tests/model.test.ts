// The console's view model replayed against recorded event streams from
// the backend: the counter it would display must match the stream exactly.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { ClusterModel, type StreamEvent } from "../src/model.js";

function loadFixture(name: string): StreamEvent[] {
  const raw = readFileSync(join(__dirname, "fixtures", name), "utf8");
  return raw
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line) as StreamEvent);
}

describe("fig3 demo streams", () => {
  it("blocking 2pc stream ends with the counter at 2", () => {
    const events = loadFixture("fig3_2pc_events.jsonl");
    const model = new ClusterModel();
    model.applyAll(events);
    expect(model.commitCounter).toBe(2);
    // exactly the counter values the stream carried, nothing recomputed
    const streamed = events
      .filter((e) => e.event === "commit-counter")
      .map((e) => e.value);
    expect(streamed.at(-1)).toBe(2);
    expect(model.crashedNodes.has("0.0")).toBe(true);
  });

  it("nonblocking stream ends with the counter at 10", () => {
    const events = loadFixture("fig3_cbt_events.jsonl");
    const model = new ClusterModel();
    model.applyAll(events);
    expect(model.commitCounter).toBe(10);
    const streamed = events
      .filter((e) => e.event === "commit-counter")
      .map((e) => e.value);
    expect(streamed.at(-1)).toBe(10);
    // the replacement leader shows up through election events
    expect(model.leaders.get(0)).toBe("0.1");
    const decisions = events.filter((e) => e.event === "decision");
    expect(model.decisionEvents).toBe(decisions.length);
  });

  it("counter equals the count shown at every step of the stream", () => {
    const events = loadFixture("fig3_cbt_events.jsonl");
    const model = new ClusterModel();
    for (const evt of events) {
      model.apply(evt);
      if (evt.event === "commit-counter") {
        expect(model.commitCounter).toBe(evt.value);
      }
    }
  });
});

describe("event log", () => {
  it("keeps crash and election entries with severities", () => {
    const model = new ClusterModel();
    model.applyAll(loadFixture("fig3_cbt_events.jsonl"));
    const crash = model.log.find((l) => l.text.includes("crashed"));
    expect(crash?.severity).toBe("warn");
    expect(model.log.some((l) => l.text.includes("elected 0.1"))).toBe(true);
  });
});

describe("blocked marking", () => {
  const state = (uncertain: string[]) =>
    ({
      cluster: "c1",
      transport: "sim-interactive",
      config: {},
      tick: 1,
      nodes: {},
      txns: { "2": { phase: "in-flight", uncertain_nodes: uncertain } },
      commit_messages: 2,
      committed_txns: 1,
    }) as const;

  it("marks a participant blocked only after the hold period", () => {
    const model = new ClusterModel(3000);
    model.applyState(state(["1.0"]), 1000);
    expect(model.blockedNodes(1500)).toEqual([]);
    expect(model.blockedNodes(4200)).toEqual(["1.0"]);
  });

  it("clears the marking once the node decides", () => {
    const model = new ClusterModel(3000);
    model.applyState(state(["1.0"]), 1000);
    model.applyState(state([]), 2000);
    expect(model.blockedNodes(9000)).toEqual([]);
  });
});
