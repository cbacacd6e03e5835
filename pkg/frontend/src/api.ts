/** Thin fetch client for the review service; the only data path the
 * console has. All state lives on the server, so every call refetches
 * rather than patching a local copy. */

import type {
  ApproveBody,
  Budget,
  CaptionDetail,
  EditBody,
  QueueResponse,
  Stats,
} from "./types.js";

export class ApiError extends Error {
  /** HTTP status; 0 means the request never reached the service. */
  readonly status: number;
  /** Server-side history length when the failure is a version conflict. */
  readonly currentVersion: number | null;

  constructor(status: number, message: string, currentVersion: number | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.currentVersion = currentVersion;
  }
}

function describe(detail: unknown): { message: string; version: number | null } {
  if (detail && typeof detail === "object") {
    const record = detail as Record<string, unknown>;
    return {
      message: String(record.message ?? JSON.stringify(detail)),
      version:
        typeof record.current_version === "number" ? record.current_version : null,
    };
  }
  return { message: String(detail ?? "request failed"), version: null };
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(path, init);
  } catch (error) {
    throw new ApiError(0, `service unreachable: ${String(error)}`);
  }
  if (!response.ok) {
    let detail: unknown = null;
    try {
      detail = (await response.json()).detail;
    } catch {
      // Non-JSON error body; fall through with the status alone.
    }
    const { message, version } = describe(detail);
    throw new ApiError(response.status, message, version);
  }
  return (await response.json()) as T;
}

function post(body: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  };
}

/** Caption ids contain `#`, which would truncate a raw URL. */
function captionPath(captionId: string): string {
  return `/api/captions/${encodeURIComponent(captionId)}`;
}

export function fetchQueue(budget?: Budget): Promise<QueueResponse> {
  const suffix = budget ? `?budget=${budget}` : "";
  return request<QueueResponse>(`/api/queue${suffix}`);
}

export function fetchCaption(captionId: string): Promise<CaptionDetail> {
  return request<CaptionDetail>(captionPath(captionId));
}

export function submitEdit(
  captionId: string,
  body: EditBody,
): Promise<CaptionDetail> {
  return request<CaptionDetail>(`${captionPath(captionId)}/edit`, post(body));
}

export function approveCaption(
  captionId: string,
  body: ApproveBody,
): Promise<CaptionDetail> {
  return request<CaptionDetail>(`${captionPath(captionId)}/approve`, post(body));
}

export function fetchStats(): Promise<Stats> {
  return request<Stats>("/api/stats");
}

export function exportUrl(budget: Budget): string {
  return `/api/export?budget=${budget}`;
}
