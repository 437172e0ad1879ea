// Coordinator panel: transaction submission (top left), live message
// counters (top right), node grid with crash/restart buttons, and the
// scrolling event log (bottom). Participants stuck in their uncertain
// period are marked blocked.

import type { ClusterModel } from "../model.js";

export interface PanelActions {
  submit: (count: number) => void;
  crash: (node: string) => void;
  restart: (node: string) => void;
}

export class CoordinatorPanel {
  private logEl: HTMLElement | null = null;
  private renderedLogLines = 0;

  constructor(
    private readonly el: HTMLElement,
    private readonly actions: PanelActions,
    private readonly now: () => number = () => Date.now(),
  ) {}

  render(model: ClusterModel): void {
    this.el.innerHTML = `
      <div class="panel-top">
        <form id="submit-form" class="panel-left">
          <h3>Submit transactions</h3>
          <input name="count" type="number" min="1" value="5">
          <button type="submit">Submit</button>
        </form>
        <div class="panel-right">
          <h3>Messages</h3>
          <div class="counter" id="commit-counter">commits: 0</div>
          <div id="sent-counter">sent: 0</div>
          <div id="decision-counter">decisions: 0</div>
        </div>
      </div>
      <div id="node-grid"></div>
      <div id="event-log" class="log"></div>`;
    this.logEl = this.el.querySelector("#event-log");
    this.renderedLogLines = 0;
    const form = this.el.querySelector("#submit-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const count = Number(new FormData(form).get("count") ?? 1);
      this.actions.submit(count);
    });
    this.update(model);
  }

  update(model: ClusterModel): void {
    const counter = this.el.querySelector("#commit-counter");
    if (counter) counter.textContent = `commits: ${model.commitCounter}`;
    const sent = this.el.querySelector("#sent-counter");
    if (sent) sent.textContent = `sent: ${model.messagesSent}`;
    const decisions = this.el.querySelector("#decision-counter");
    if (decisions) decisions.textContent = `decisions: ${model.decisionEvents}`;
    this.updateNodes(model);
    this.appendLog(model);
  }

  private updateNodes(model: ClusterModel): void {
    const grid = this.el.querySelector("#node-grid");
    if (!grid || !model.state) return;
    const blocked = new Set(model.blockedNodes(this.now()));
    grid.innerHTML = "";
    for (const [name, info] of Object.entries(model.state.nodes)) {
      const div = document.createElement("div");
      div.className = "node";
      if (info.crashed) div.classList.add("crashed");
      if (blocked.has(name)) div.classList.add("blocked");
      const label = info.crashed
        ? "crashed"
        : blocked.has(name)
          ? "BLOCKED (uncertain)"
          : (info.role ?? "");
      div.innerHTML = `<span class="node-name">${name}</span> <span>${label}</span>`;
      const btn = document.createElement("button");
      btn.textContent = info.crashed ? "restart" : "crash";
      btn.dataset.node = name;
      btn.addEventListener("click", () =>
        info.crashed ? this.actions.restart(name) : this.actions.crash(name),
      );
      div.appendChild(btn);
      grid.appendChild(div);
    }
  }

  private appendLog(model: ClusterModel): void {
    if (!this.logEl) return;
    for (const line of model.log.slice(this.renderedLogLines)) {
      const div = document.createElement("div");
      div.className = `log-${line.severity}`;
      div.textContent = `[${line.tick}] ${line.text}`;
      this.logEl.appendChild(div);
    }
    this.renderedLogLines = model.log.length;
    this.logEl.scrollTop = this.logEl.scrollHeight;
  }
}
