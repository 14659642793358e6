/** Typed client for the prediction service's JSON API (/api/v1).
 *
 * The only configuration is the base URL. A newer options request always
 * cancels the one still in flight, so the UI can never interleave stale
 * pages with fresh ones.
 */

export type Domain = "diploma" | "job";
export type Branch = "job" | "further_studies";

export interface ConceptRef {
  domain: Domain;
  index: number;
  /** Display label, when one is known. Never sent to the server. */
  label?: string;
}

export interface RankedConcept {
  domain: Domain;
  index: number;
  label: string;
  count: number;
}

export interface BranchShare {
  branch: Branch;
  target_kind: Domain;
  count: number;
  share: number;
}

export interface CurrentStep {
  kind: Domain;
  title?: string;
  concepts: Array<number | { domain: Domain; index: number }>;
}

export interface ContextStep {
  kind: Domain;
  title: string | null;
  concepts: Array<{ domain: Domain; index: number; label: string }>;
}

export interface OptionsRequest {
  current_step: CurrentStep;
  branch: Branch;
  goal?: { domain: Domain; index: number };
  page?: number;
}

export interface OptionsPage {
  context_step: ContextStep;
  branches: BranchShare[];
  top_concepts: RankedConcept[];
  more_available: boolean;
  page: number;
}

export interface CorpusStats {
  users: number;
  steps: number;
  diploma_steps: number;
  job_steps: number;
  mean_steps_per_user: number;
  dropped_profiles: number;
  dropped_steps: number;
}

export interface EvaluationRequest {
  target_kind: Domain;
  method: string;
  params?: Record<string, number | string>;
  jobs?: number;
}

export interface EvaluationJob {
  job_id: string;
  status: "queued" | "running" | "done" | "failed";
  report?: Record<string, unknown>;
  error_message?: string;
}

/** Structural subset of fetch so tests can hand in a stub server. */
export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export function isAbortError(err: unknown): boolean {
  return (
    typeof err === "object" &&
    err !== null &&
    (err as { name?: unknown }).name === "AbortError"
  );
}

interface ErrorBody {
  error?: { code?: string; message?: string };
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;
  private optionsController: AbortController | null = null;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl =
      fetchImpl ?? (globalThis.fetch.bind(globalThis) as FetchLike);
  }

  health(): Promise<{ status: string; corpus_loaded: boolean }> {
    return this.get("/api/v1/health");
  }

  stats(): Promise<CorpusStats> {
    return this.get("/api/v1/stats");
  }

  concepts(
    domain: Domain,
  ): Promise<{ domain: Domain; concepts: Array<Omit<RankedConcept, "count">> }> {
    return this.get(`/api/v1/concepts?domain=${encodeURIComponent(domain)}`);
  }

  /** Fetch one page of ranked next-step concepts, cancelling any
   * options request still in flight. */
  async options(request: OptionsRequest): Promise<OptionsPage> {
    this.optionsController?.abort();
    const controller = new AbortController();
    this.optionsController = controller;
    try {
      return await this.post<OptionsPage>(
        "/api/v1/options",
        request,
        controller.signal,
      );
    } finally {
      if (this.optionsController === controller) {
        this.optionsController = null;
      }
    }
  }

  submitEvaluation(
    request: EvaluationRequest,
  ): Promise<{ job_id: string; status: string }> {
    return this.post("/api/v1/evaluate", request);
  }

  evaluationJob(jobId: string): Promise<EvaluationJob> {
    return this.get(`/api/v1/evaluate/${encodeURIComponent(jobId)}`);
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.base + path, { method: "GET" });
    return this.unwrap<T>(res);
  }

  private async post<T>(
    path: string,
    body: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const res = await this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    return this.unwrap<T>(res);
  }

  private async unwrap<T>(res: {
    ok: boolean;
    status: number;
    json(): Promise<unknown>;
  }): Promise<T> {
    if (res.ok) {
      return (await res.json()) as T;
    }
    let code = `http_${res.status}`;
    let message = `request failed with status ${res.status}`;
    try {
      const body = (await res.json()) as ErrorBody;
      if (body.error) {
        code = body.error.code ?? code;
        message = body.error.message ?? message;
      }
    } catch {
      // non-JSON error body; keep the generic message
    }
    throw new ApiError(res.status, code, message);
  }
}
