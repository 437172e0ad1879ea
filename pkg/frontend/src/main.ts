// Console wiring: portal -> parameters -> coordinator panel, one cluster
// per open panel, one event-stream subscription per cluster view.

import { ControlApi } from "./api.js";
import { EventStream } from "./events.js";
import { ClusterModel } from "./model.js";
import { CoordinatorPanel } from "./views/panel.js";
import { ParametersView, type ClusterParameters } from "./views/parameters.js";
import { PortalView } from "./views/portal.js";

export function mountConsole(root: HTMLElement, baseUrl: string): void {
  const api = new ControlApi(baseUrl);
  const portal = new PortalView(root, (choice) => {
    const params = new ParametersView(root, (p) => void openCluster(p));
    params.render(choice);
  });
  portal.render();

  async function openCluster(params: ClusterParameters): Promise<void> {
    const { id } = await api.createCluster({
      chains: params.chains,
      nodes_per_chain: params.nodes_per_chain,
      hub: params.hub,
      protocol: params.protocol,
      transport: "sim-interactive",
      ticks_per_second: 10,
    });
    const model = new ClusterModel();
    const panel = new CoordinatorPanel(root, {
      submit: (count) => void api.submitTxns(id, count),
      crash: (node) => void api.crashNode(id, node),
      restart: (node) => void api.restartNode(id, node),
    });
    panel.render(model);
    const stream = new EventStream(api, id, {
      onEvent: (evt) => {
        model.apply(evt);
        panel.update(model);
      },
      onResync: (state) => {
        model.applyState(state, Date.now());
        panel.update(model);
      },
    });
    stream.connect();
    const poll = setInterval(async () => {
      try {
        model.applyState(await api.getState(id), Date.now());
        panel.update(model);
      } catch {
        clearInterval(poll);
      }
    }, 1000);
    window.addEventListener("beforeunload", () => {
      clearInterval(poll);
      stream.close();
    });
  }
}

declare global {
  interface Window {
    CBT_SERVICE_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountConsole(
    document.getElementById("app") as HTMLElement,
    window.CBT_SERVICE_URL ?? "http://127.0.0.1:8008",
  );
}
