import type { DispatchRequestBody } from "./types.js";

/** Scenario form state: historical window or (water-year class, season). */

export type WaterYearClass = "dry" | "avg" | "wet";
export type SeasonName = "winter" | "spring" | "summer";

export interface ScenarioForm {
  plants: string[];
  mode: "historical" | "synthetic";
  // historical mode
  start?: string; // ISO timestamp, hour-aligned
  end?: string;
  // synthetic mode
  waterYear?: WaterYearClass;
  season?: SeasonName;
  threshold: number;
  seed?: number;
}

export const DEFAULT_FORM: ScenarioForm = {
  plants: [],
  mode: "synthetic",
  waterYear: "avg",
  season: "summer",
  threshold: 0.9,
};

/** Why the form cannot be submitted yet; empty list means valid. */
export function formProblems(form: ScenarioForm): string[] {
  const problems: string[] = [];
  if (form.plants.length === 0) problems.push("select at least one plant");
  if (form.mode === "historical") {
    if (!form.start || !form.end) {
      problems.push("historical mode needs a start and end timestamp");
    } else if (form.start >= form.end) {
      problems.push("window start must be before its end");
    }
  } else {
    if (!form.waterYear) problems.push("pick a water-year class");
    if (!form.season) problems.push("pick a season");
  }
  if (!(form.threshold > 0 && form.threshold <= 1.05)) {
    problems.push("efficiency threshold must be in (0, 1.05]");
  }
  if (form.seed !== undefined && !Number.isInteger(form.seed)) {
    problems.push("seed must be an integer");
  }
  return problems;
}

export function isValid(form: ScenarioForm): boolean {
  return formProblems(form).length === 0;
}

/**
 * Lossless mapping into the service's request body. The scenario string uses
 * the server's mini-syntax: dry|avg|wet:season or hist:START..END.
 */
export function toRequest(form: ScenarioForm): DispatchRequestBody {
  const problems = formProblems(form);
  if (problems.length > 0) {
    throw new Error(`form is not submittable: ${problems.join("; ")}`);
  }
  const scenario =
    form.mode === "historical"
      ? `hist:${form.start}..${form.end}`
      : `${form.waterYear}:${form.season}`;
  const body: DispatchRequestBody = {
    plants: [...form.plants],
    scenario,
    threshold: form.threshold,
  };
  if (form.seed !== undefined) body.seed = form.seed;
  return body;
}
