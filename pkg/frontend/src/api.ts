/**
 * Typed client for the edit3d session service. All geometry lives on the
 * server; this layer only moves bytes and JSON. `fetch` is injected so tests
 * can capture requests.
 */

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface SessionInfo {
  id: string;
  state?: string;
  frames: number;
  width: number;
  height: number;
  alignment?: AlignmentResult;
}

export interface AlignmentResult {
  scale: number;
  shift: number;
  residual_rmse: number;
  pixel_count: number;
}

export type AlignmentRequest = { auto: true } | { scale: number; shift: number };

export type PreviewKind = "pcr" | "mask" | "overlay" | "masked";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`service error ${status}: ${JSON.stringify(body)}`);
  }
}

async function fail(resp: Response): Promise<never> {
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = await resp.text().catch(() => null);
  }
  throw new ApiError(resp.status, body);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(form: FormData): Promise<SessionInfo> {
    const resp = await this.fetchImpl(this.url("/sessions"), { method: "POST", body: form });
    if (resp.status !== 201) await fail(resp);
    return (await resp.json()) as SessionInfo;
  }

  async getSession(id: string): Promise<SessionInfo> {
    const resp = await this.fetchImpl(this.url(`/sessions/${id}`));
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as SessionInfo;
  }

  async putMask(id: string, png: Blob | Uint8Array): Promise<void> {
    const body = png instanceof Uint8Array ? new Uint8Array(png) : png;
    const resp = await this.fetchImpl(this.url(`/sessions/${id}/mask`), {
      method: "PUT",
      body,
      headers: { "Content-Type": "image/png" },
    });
    if (resp.status !== 204) await fail(resp);
  }

  async putAlignment(id: string, request: AlignmentRequest): Promise<AlignmentResult> {
    const resp = await this.fetchImpl(this.url(`/sessions/${id}/alignment`), {
      method: "PUT",
      body: JSON.stringify(request),
      headers: { "Content-Type": "application/json" },
    });
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as AlignmentResult;
  }

  async propagate(id: string): Promise<{ frames: number }> {
    const resp = await this.fetchImpl(this.url(`/sessions/${id}/propagate`), { method: "POST" });
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as { frames: number };
  }

  previewUrl(id: string, frame: number, kind: PreviewKind): string {
    return this.url(`/sessions/${id}/frames/${frame}/preview?kind=${kind}`);
  }

  async fetchPreview(id: string, frame: number, kind: PreviewKind): Promise<Uint8Array> {
    const resp = await this.fetchImpl(this.previewUrl(id, frame, kind));
    if (!resp.ok) await fail(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }

  packUrl(id: string): string {
    return this.url(`/sessions/${id}/pack`);
  }

  async fetchPack(id: string): Promise<Uint8Array> {
    const resp = await this.fetchImpl(this.packUrl(id));
    if (!resp.ok) await fail(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
