// HTTP client for the control service. Every console action maps to
// exactly one endpoint here; the console computes nothing itself.

export interface ClusterSpec {
  chains: number;
  nodes_per_chain: number;
  hub: boolean;
  protocol?: string;
  mode?: string;
  transport?: string;
  ticks_per_second?: number;
  seed?: number;
  ports?: Record<string, number>;
}

export interface NodeState {
  node: string;
  role?: string;
  term?: number;
  crashed: boolean;
  txns?: Record<string, string>;
  uncertain?: number[];
}

export interface TxnStatus {
  phase: string;
  uncertain_nodes: string[];
}

export interface ClusterState {
  cluster: string;
  transport: string;
  config: Record<string, unknown>;
  tick: number | null;
  nodes: Record<string, NodeState>;
  txns: Record<string, TxnStatus>;
  commit_messages: number;
  committed_txns: number;
}

async function check(res: Response): Promise<Response> {
  if (!res.ok) {
    const body = await res.text();
    throw new Error(`${res.status}: ${body}`);
  }
  return res;
}

export class ControlApi {
  constructor(
    readonly base: string,
    private readonly fetcher: typeof fetch = fetch,
  ) {}

  private async post(path: string, body?: unknown): Promise<unknown> {
    const res = await this.fetcher(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body ?? {}),
    });
    return (await check(res)).json();
  }

  async createCluster(spec: ClusterSpec): Promise<{ id: string }> {
    return (await this.post("/clusters", spec)) as { id: string };
  }

  async submitTxns(clusterId: string, count: number): Promise<{ txns: number[] }> {
    return (await this.post(`/clusters/${clusterId}/txns`, { count })) as {
      txns: number[];
    };
  }

  async crashNode(clusterId: string, node: string): Promise<void> {
    await this.post(`/clusters/${clusterId}/nodes/${node}/crash`);
  }

  async restartNode(clusterId: string, node: string): Promise<void> {
    await this.post(`/clusters/${clusterId}/nodes/${node}/restart`);
  }

  async getState(clusterId: string): Promise<ClusterState> {
    const res = await this.fetcher(`${this.base}/clusters/${clusterId}/state`);
    return (await check(res)).json() as Promise<ClusterState>;
  }

  async deleteCluster(clusterId: string): Promise<void> {
    const res = await this.fetcher(`${this.base}/clusters/${clusterId}`, {
      method: "DELETE",
    });
    await check(res);
  }

  eventsUrl(clusterId: string): string {
    return `${this.base.replace(/^http/, "ws")}/clusters/${clusterId}/events`;
  }
}
