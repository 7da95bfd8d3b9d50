import type {
  ApiErrorPayload,
  DispatchRequestBody,
  DispatchStatusPayload,
  PlantSummary,
  TimeseriesPayload,
  TrainStatusPayload,
} from "./types.js";

/** Error carrying the server's one-object error payload and HTTP status. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public payload: ApiErrorPayload,
  ) {
    super(payload.message);
    this.name = "ApiError";
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let payload: ApiErrorPayload;
  try {
    payload = (await response.json()) as ApiErrorPayload;
  } catch {
    payload = { code: "http_error", message: response.statusText };
  }
  return new ApiError(response.status, payload);
}

/** Thin typed client; every displayed value originates from these payloads. */
export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  listPlants(): Promise<PlantSummary[]> {
    return this.getJson("/api/plants");
  }

  timeseries(
    plant: string,
    start: string,
    end: string,
    fields: string[],
  ): Promise<TimeseriesPayload> {
    const query = new URLSearchParams({
      start,
      end,
      fields: fields.join(","),
    });
    return this.getJson(
      `/api/plants/${encodeURIComponent(plant)}/timeseries?${query}`,
    );
  }

  submitDispatch(body: DispatchRequestBody): Promise<{ run_id: string }> {
    return this.postJson("/api/dispatch", body);
  }

  dispatchStatus(runId: string): Promise<DispatchStatusPayload> {
    return this.getJson(`/api/dispatch/${encodeURIComponent(runId)}`);
  }

  /** Raw export bytes; the UI must pass these through unmodified. */
  async dispatchExport(runId: string): Promise<Blob> {
    const response = await this.fetchFn(
      `${this.base}/api/dispatch/${encodeURIComponent(runId)}/export.csv`,
    );
    if (!response.ok) throw await parseError(response);
    return response.blob();
  }

  submitTrain(
    plant: string,
    config: Record<string, unknown> = {},
  ): Promise<{ job_id: string }> {
    return this.postJson("/api/train", { plant, config });
  }

  trainStatus(jobId: string): Promise<TrainStatusPayload> {
    return this.getJson(`/api/train/${encodeURIComponent(jobId)}`);
  }
}
