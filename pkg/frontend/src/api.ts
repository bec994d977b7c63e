import type { LabelResult, LabelSubmission, QueueItem, StatusInfo } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/**
 * Thin client over the four queue endpoints. The fetch implementation is
 * injectable so the whole client is testable without a browser or server.
 */
export class ApiClient {
  constructor(
    private readonly fetchImpl: FetchLike,
    private readonly base: string = "",
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchImpl(this.base + path, init);
    const body = await resp.json().catch(() => null);
    if (!resp.ok) {
      const reason =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, reason);
    }
    return body;
  }

  async fetchQueue(limit: number): Promise<QueueItem[]> {
    return (await this.request(`/api/queue?limit=${limit}`)) as QueueItem[];
  }

  async fetchDoc(docId: string): Promise<QueueItem> {
    return (await this.request(`/api/doc/${encodeURIComponent(docId)}`)) as QueueItem;
  }

  async fetchStatus(): Promise<StatusInfo> {
    return (await this.request("/api/status")) as StatusInfo;
  }

  async postLabels(labels: LabelSubmission[]): Promise<LabelResult[]> {
    const body = (await this.request("/api/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ labels }),
    })) as { results: LabelResult[] };
    return body.results;
  }
}
