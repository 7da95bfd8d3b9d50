/** Payload shapes of the hydrodispatch HTTP API (snake_case, as served). */

export interface PlantSummary {
  project_name: string;
  latitude: number;
  longitude: number;
  area_number: number;
  rated_head_ft: number;
  unit_count: number;
  trained: boolean;
}

export interface TimeseriesPayload {
  project_name: string;
  timestamps: string[];
  // requested fields arrive as parallel arrays; gaps are explicit nulls
  [field: string]: string | string[] | (number | null)[];
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface ApiErrorPayload {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}

export interface DispatchRowPayload {
  project: string;
  unit_id: string;
  pgen_ref: number;
  pmax_nominal: number;
  head_ft: number;
  pgen_calculated: number;
  pmax_available: number;
}

export interface CorrectionActionPayload {
  action: string;
  unit_id: string;
  from_mw: number;
  to_mw: number;
  note: string;
}

export interface CorrectionLogPayload {
  actions: CorrectionActionPayload[];
  warnings: string[];
  unresolved: string[];
  residual_mw: number;
}

export interface DispatchStatusPayload {
  run_id: string;
  status: JobStatus;
  rows?: DispatchRowPayload[];
  correction_logs?: Record<string, CorrectionLogPayload>;
  error?: { code: string; message: string };
}

export interface TrainStatusPayload {
  job_id: string;
  status: JobStatus;
  plant: string;
  report?: unknown;
  error?: { code: string; message: string };
}

export interface DispatchRequestBody {
  plants: string[];
  scenario: string;
  threshold: number;
  seed?: number;
}
