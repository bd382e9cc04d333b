/**
 * Typed client for the dialogue service HTTP API.
 *
 * Every method returns parsed JSON or throws ApiError carrying the server's
 * machine-readable code, so callers never string-match messages.  The one
 * piece of client-side validation lives here too: uploadDataset refuses a
 * file larger than the server-announced byte limit before any request is
 * made.
 */

export interface Prompt {
  kind: string;
  text: string;
  [extra: string]: unknown;
}

export interface SessionView {
  session_id: string;
  flow: string;
  state: string;
  prompt: Prompt;
  prediction?: PredictionPayload;
  summary?: DatasetSummary;
  job_id?: string;
  settings_total?: number;
  message?: string;
}

export interface PredictionPayload {
  kind: "prediction";
  horizon: number;
  probability: string;
  disclaimer: string;
}

export interface DatasetSummary {
  rows: number;
  label_column: string;
  columns: { name: string; role: string; categories: number }[];
  class_balance: Record<string, number>;
  preview: { header: string[]; rows: string[][] };
}

export interface JobSnapshot {
  job_id: string;
  status: "queued" | "running" | "succeeded" | "failed";
  progress?: { settings_done: number; settings_total: number };
  validation_auc?: number;
  best_setting?: Record<string, unknown>;
  best_cv_auc?: number;
  per_setting_cv_auc?: [number, number][];
  roc_svg?: string;
  model_download?: string;
  roc_download?: string;
  provenance?: string;
  error?: { code: string; message: string; [extra: string]: unknown };
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail?: Record<string, unknown>,
  ) {
    super(message);
  }
}

/** Thrown before any network activity when a file exceeds the upload cap. */
export class FileTooLarge extends Error {
  constructor(public size: number, public limit: number) {
    super(`this file is ${size} bytes; the server accepts at most ${limit}`);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `${response.status} ${response.statusText}`;
  let detail: Record<string, unknown> | undefined;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
      detail = body.detail;
    }
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  return new ApiError(response.status, code, message, detail);
}

export class Client {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  openSession(flow: "prediction" | "training"): Promise<SessionView> {
    return this.post("/api/sessions", { flow });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/api/sessions/${id}`);
  }

  answer(id: string, value: string): Promise<SessionView> {
    return this.post(`/api/sessions/${id}/answer`, { value });
  }

  async uploadDataset(id: string, file: Blob, limit: number,
                      label?: string): Promise<SessionView> {
    if (file.size > limit) {
      throw new FileTooLarge(file.size, limit);
    }
    const query = label ? `?label=${encodeURIComponent(label)}` : "";
    // a fixed-size body makes the client send Content-Length, which the
    // server requires before it will read the upload
    const body = await file.arrayBuffer();
    return this.request(`/api/sessions/${id}/dataset${query}`, {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body,
    });
  }

  confirmDataset(id: string): Promise<SessionView> {
    return this.post(`/api/sessions/${id}/confirm`, {});
  }

  /** grid may be {} for the server-side defaults or per-field value lists. */
  startTraining(id: string, grid: Record<string, unknown>): Promise<SessionView> {
    return this.post(`/api/sessions/${id}/train`,
                     Object.keys(grid).length ? { grid } : {});
  }

  submitSurvey(id: string, rating: number, comment?: string): Promise<SessionView> {
    return this.post(`/api/sessions/${id}/survey`, { rating, comment });
  }

  jobStatus(jobId: string): Promise<JobSnapshot> {
    return this.request(`/api/jobs/${jobId}`);
  }

  modelUrl(jobId: string): string {
    return `${this.base}/api/jobs/${jobId}/model`;
  }

  rocUrl(jobId: string): string {
    return `${this.base}/api/jobs/${jobId}/roc.svg`;
  }
}
