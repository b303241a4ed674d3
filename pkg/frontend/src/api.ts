// Thin wrappers over the collection server's three routes.

import type { AnnotationExport, SampleDescriptor } from "./types.js";

export class ServerError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(`server rejected the request (${status}): ${JSON.stringify(detail)}`);
    this.status = status;
    this.detail = detail;
  }
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async fetchAssignment(annotatorId: string): Promise<SampleDescriptor[]> {
    const resp = await fetch(`${this.baseUrl}/assignment/${encodeURIComponent(annotatorId)}`);
    if (!resp.ok) {
      throw new ServerError(resp.status, await resp.json().catch(() => resp.statusText));
    }
    return (await resp.json()) as SampleDescriptor[];
  }

  imageUrl(sampleId: string): string {
    return `${this.baseUrl}/image/${encodeURIComponent(sampleId)}`;
  }

  async submitAnnotation(
    doc: AnnotationExport,
  ): Promise<{ status: string; replaced: boolean }> {
    const resp = await fetch(`${this.baseUrl}/annotation`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
    if (!resp.ok) {
      throw new ServerError(resp.status, await resp.json().catch(() => resp.statusText));
    }
    return (await resp.json()) as { status: string; replaced: boolean };
  }
}
