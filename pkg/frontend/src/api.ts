// Thin typed client over the service's documented HTTP API.

import type { Rating, Report, ReviewRequest } from "./types.js";

export interface FetchedReport {
  report: Report;
  revision: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`HTTP ${status}`);
  }
}

export class ConflictError extends ApiError {}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (response.status === 409) {
      throw new ConflictError(409, await response.json().catch(() => null));
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => null));
    }
    return response;
  }

  async getReport(reportId: string): Promise<FetchedReport> {
    const response = await this.request(`/v1/reports/${reportId}`, {
      headers: { Accept: "application/json" },
    });
    const revision = Number(response.headers.get("ETag") ?? "1");
    return { report: (await response.json()) as Report, revision };
  }

  async postReview(reportId: string, body: ReviewRequest): Promise<FetchedReport> {
    const response = await this.request(`/v1/reports/${reportId}/review`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const revision = Number(response.headers.get("ETag") ?? "1");
    return { report: (await response.json()) as Report, revision };
  }

  async postRatings(ratings: Rating[]): Promise<{ accepted: number; rejected: unknown[] }> {
    const response = await this.request("/v1/ratings", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(ratings),
    });
    return (await response.json()) as { accepted: number; rejected: unknown[] };
  }
}
