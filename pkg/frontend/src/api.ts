/** Thin typed client over the engine's HTTP API; fetch is injectable for tests. */

import type { Form, ItemRecord, ReviewResult, StatusDoc } from "./types";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
    private token?: string,
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      throw new ApiError(res.status, await res.text());
    }
    return (await res.json()) as T;
  }

  listTypes() {
    return this.request<{ type_id: string; display_name: string }[]>(
      "GET",
      "/types",
    );
  }

  listItems() {
    return this.request<ItemRecord[]>("GET", "/items");
  }

  createItem(typeId: string, project: string, name = "") {
    return this.request<ItemRecord>("POST", "/items", {
      type_id: typeId,
      project,
      name,
    });
  }

  getForm(itemId: string) {
    return this.request<Form>("GET", `/items/${itemId}/form`);
  }

  /** PUT the form; a 422 is a rejected review, not a transport error. */
  async putForm(itemId: string, form: Form): Promise<ReviewResult> {
    const res = await this.fetchImpl(`${this.baseUrl}/items/${itemId}/form`, {
      method: "PUT",
      headers: this.headers(),
      body: JSON.stringify(form),
    });
    if (res.status === 200 || res.status === 422) {
      return (await res.json()) as ReviewResult;
    }
    throw new ApiError(res.status, await res.text());
  }

  processItem(itemId: string, action: string) {
    return this.request<{ ticket_id: string; state: string }>(
      "POST",
      `/items/${itemId}/process`,
      { action },
    );
  }

  cancelItem(itemId: string) {
    return this.request<{ state: string }>("POST", `/items/${itemId}/cancel`);
  }

  itemStatus(itemId: string) {
    return this.request<StatusDoc>("GET", `/items/${itemId}/status`);
  }

  eventStreamUrl(jobId: string, fromSeq: number): string {
    return `${this.baseUrl}/jobs/${jobId}/events?from_seq=${fromSeq}`;
  }
}
