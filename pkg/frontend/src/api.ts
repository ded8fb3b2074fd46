import type {
  ConnectedComponent,
  JobStatus,
  KeyboardLayout,
  PageSummary,
  PageXml,
  Point,
} from "./types.js";

/** HTTP failure carrying the server's status and diagnostics payload. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`API error ${status}: ${JSON.stringify(detail)}`);
  }
}

type FetchFn = typeof fetch;

async function fail(response: Response): Promise<never> {
  let detail: unknown;
  try {
    detail = (await response.json()).detail;
  } catch {
    detail = response.statusText;
  }
  throw new ApiError(response.status, detail);
}

/** Thin typed client over the correction service; one method per endpoint. */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  listPages(): Promise<PageSummary[]> {
    return this.json("/api/pages");
  }

  async getPageXml(pageId: string): Promise<PageXml> {
    const response = await this.fetchFn(`${this.baseUrl}/api/page/${pageId}/xml`);
    if (!response.ok) await fail(response);
    return {
      xml: await response.text(),
      revision: response.headers.get("X-Revision") ?? "",
    };
  }

  /** Save a page document; resolves to the new revision. 409 = stale, 422 = invalid. */
  async putPageXml(pageId: string, xml: string, revision: string): Promise<string> {
    const out = await this.json<{ revision: string }>(`/api/page/${pageId}/xml`, {
      method: "PUT",
      body: xml,
      headers: { "Content-Type": "application/xml", "X-Revision": revision },
    });
    return out.revision;
  }

  imageUrl(pageId: string, kind: "image" | "bin"): string {
    return `${this.baseUrl}/api/page/${pageId}/${kind}`;
  }

  getConnectedComponents(pageId: string): Promise<ConnectedComponent[]> {
    return this.json(`/api/page/${pageId}/ccs`);
  }

  /** Server-side smearing: the client only picks components. */
  async smear(pageId: string, ccIds: number[]): Promise<Point[]> {
    const out = await this.json<{ points: Point[] }>(`/api/page/${pageId}/smear`, {
      method: "POST",
      body: JSON.stringify({ cc_ids: ccIds }),
      headers: { "Content-Type": "application/json" },
    });
    return out.points;
  }

  async startFlow(
    steps: string[],
    params: Record<string, Record<string, unknown>> = {},
    pages?: string[],
  ): Promise<string> {
    const out = await this.json<{ job_id: string }>("/api/flow", {
      method: "POST",
      body: JSON.stringify({ steps, params, ...(pages ? { pages } : {}) }),
      headers: { "Content-Type": "application/json" },
    });
    return out.job_id;
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.json(`/api/job/${jobId}`);
  }

  putLineGt(pageId: string, lineId: string, text: string): Promise<{ line: string; gt: string }> {
    return this.json(`/api/line/${pageId}/${lineId}/gt`, {
      method: "PUT",
      body: JSON.stringify({ text }),
      headers: { "Content-Type": "application/json" },
    });
  }

  getKeyboard(): Promise<KeyboardLayout> {
    return this.json("/api/keyboard");
  }

  putKeyboard(layout: KeyboardLayout): Promise<KeyboardLayout> {
    return this.json("/api/keyboard", {
      method: "PUT",
      body: JSON.stringify(layout),
      headers: { "Content-Type": "application/json" },
    });
  }

  getEval(): Promise<Record<string, unknown>> {
    return this.json("/api/eval");
  }

  getModels(): Promise<string[]> {
    return this.json("/api/models");
  }
}
