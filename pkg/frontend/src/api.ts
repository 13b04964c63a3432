/**
 * Typed client for the diagnostic service REST API.
 *
 * Every number the UI displays comes from these responses; the client
 * performs no dose computation of its own.
 */

export interface PredictionResponse {
  task: string;
  label: string;
  confidence: number;
  confidence_percent: number;
  distribution: number[];
  inconclusive: boolean;
  threshold: number;
  case_id: string;
}

export interface DosePlanResponse {
  drug: string;
  disease: string;
  weight_kg_used: number;
  dose_mg: number;
  times_per_day: number;
  duration_days: number;
  route: string;
  warnings: string[];
  notes: string[];
  case_id?: string;
}

export interface MediaEntry {
  digest: string;
  kind: string;
  size: number;
}

export interface CaseRecordResponse {
  case_id: string;
  created_at: string;
  media: MediaEntry[];
  predictions: PredictionResponse[];
  dose_plan: DosePlanResponse | null;
}

export interface LabelSpaceResponse {
  task: string;
  labels: string[];
}

export interface HealthResponse {
  status: string;
  tasks: string[];
}

export interface DosageRequest {
  disease: string;
  age_band: string;
  weight_group: string;
  case_id?: string;
}

/** Image-task endpoint slugs and their task ids, as served. */
export const PREDICT_SLUGS: Record<string, string> = {
  breed: "breed",
  "disease-image": "disease_image",
  age: "age_group",
  weight: "weight_group",
};

export const VIDEO_SLUG = "disease-video";

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

async function parseError(response: Response): Promise<never> {
  let message = response.statusText;
  let code = "http_error";
  try {
    const body = (await response.json()) as { error?: string; code?: string };
    if (body.error) message = body.error;
    if (body.code) code = body.code;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(response.status, code, message);
}

export class TaurusApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => globalThis.fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.getJson("/healthz");
  }

  labels(task: string): Promise<LabelSpaceResponse> {
    return this.getJson(`/api/v1/labels/${encodeURIComponent(task)}`);
  }

  /** Multipart upload to /predict/{slug}; threads the case via X-Case-Id. */
  async predict(
    slug: string,
    file: File,
    caseId: string | null,
    signal?: AbortSignal,
  ): Promise<PredictionResponse> {
    const form = new FormData();
    form.append("file", file, file.name);
    const headers: Record<string, string> = {};
    if (caseId) headers["X-Case-Id"] = caseId;
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/predict/${slug}`, {
      method: "POST",
      body: form,
      headers,
      signal,
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as PredictionResponse;
  }

  async requestDose(request: DosageRequest): Promise<DosePlanResponse> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/dosage`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as DosePlanResponse;
  }

  fetchCase(caseId: string): Promise<CaseRecordResponse> {
    return this.getJson(`/api/v1/cases/${encodeURIComponent(caseId)}`);
  }
}
