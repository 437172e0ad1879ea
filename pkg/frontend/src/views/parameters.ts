// Parameter screen: per-chain node counts, chain ids, and port numbers.

import type { PortalChoice } from "./portal.js";

export interface ClusterParameters extends PortalChoice {
  nodes_per_chain: number;
  protocol: string;
  base_port: number;
  ports: Record<string, number>;
}

export class ParametersView {
  constructor(
    private readonly el: HTMLElement,
    private readonly onCreate: (params: ClusterParameters) => void,
  ) {}

  render(choice: PortalChoice): void {
    const rows = Array.from({ length: choice.chains }, (_, c) => {
      return `<tr><td>chain ${c}</td>
        <td><input name="nodes-${c}" type="number" min="1" max="5" value="2"></td>
        <td><input name="port-${c}" type="number" value="${9600 + c * 8}"></td></tr>`;
    }).join("");
    this.el.innerHTML = `
      <h2>Blockchain parameters</h2>
      <form id="params-form">
        <table>
          <thead><tr><th>id</th><th>nodes</th><th>first port</th></tr></thead>
          <tbody>${rows}</tbody>
        </table>
        <label>Protocol
          <select name="protocol">
            <option value="cbt">nonblocking (cbt)</option>
            <option value="2pc">blocking 2pc</option>
          </select>
        </label>
        <button type="submit">Create cluster</button>
      </form>`;
    const form = this.el.querySelector("#params-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const data = new FormData(form);
      const nodesPerChain = Number(data.get("nodes-0") ?? 2);
      const ports: Record<string, number> = {};
      for (let c = 0; c < choice.chains; c += 1) {
        const first = Number(data.get(`port-${c}`) ?? 9600 + c * 8);
        for (let n = 0; n < nodesPerChain; n += 1) {
          ports[`${c}.${n}`] = first + n;
        }
      }
      this.onCreate({
        ...choice,
        nodes_per_chain: nodesPerChain,
        protocol: choice.hub ? "hub" : String(data.get("protocol") ?? "cbt"),
        base_port: Number(data.get("port-0") ?? 9600),
        ports,
      });
    });
  }
}
