/** Thin typed client for the analysis service; all I/O goes through here. */
import type {
  DatasetCreated,
  DatasetDetail,
  JobSnapshot,
  JobState,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let code = "E_HTTP";
      let detail = `${resp.status}`;
      try {
        const body = await resp.json();
        code = body.code ?? code;
        detail = body.detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, code, detail);
    }
    return resp;
  }

  async uploadCsv(text: string): Promise<DatasetCreated> {
    const resp = await this.request("/datasets", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: text,
    });
    return resp.json();
  }

  async getDataset(id: string): Promise<DatasetDetail> {
    return (await this.request(`/datasets/${id}`)).json();
  }

  async enqueue(datasetId: string, kind: string, options: object): Promise<string> {
    const resp = await this.request(`/datasets/${datasetId}/analyses`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, options }),
    });
    return (await resp.json()).job_id;
  }

  async getJob<R>(jobId: string): Promise<JobSnapshot<R>> {
    return (await this.request(`/jobs/${jobId}`)).json();
  }

  async cancelJob(jobId: string): Promise<JobState> {
    const resp = await this.request(`/jobs/${jobId}`, { method: "DELETE" });
    return (await resp.json()).state;
  }

  /** Raw export bytes, passed through untouched (byte-equal downloads). */
  async exportJob(jobId: string, format: "json" | "csv"): Promise<Blob> {
    const resp = await this.request(`/jobs/${jobId}/export?format=${format}`);
    return resp.blob();
  }

  /** Poll until the job leaves queued/running. */
  async waitForJob<R>(
    jobId: string,
    opts: { intervalMs?: number; timeoutMs?: number; onProgress?: (p: string | null) => void } = {},
  ): Promise<JobSnapshot<R>> {
    const interval = opts.intervalMs ?? 300;
    const deadline = Date.now() + (opts.timeoutMs ?? 600_000);
    for (;;) {
      const snap = await this.getJob<R>(jobId);
      opts.onProgress?.(snap.progress);
      if (snap.state === "done" || snap.state === "failed" || snap.state === "cancelled") {
        return snap;
      }
      if (Date.now() > deadline) {
        throw new ApiError(408, "E_TIMEOUT", `job ${jobId} still ${snap.state}`);
      }
      await new Promise((r) => setTimeout(r, interval));
    }
  }
}
