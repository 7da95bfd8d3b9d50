import { ApiClient, ApiError } from "./api.js";
import { renderLineChart } from "./charts.js";
import { triggerDownload } from "./download.js";
import { pollJob } from "./poll.js";
import {
  DEFAULT_FORM,
  formProblems,
  isValid,
  toRequest,
  type ScenarioForm,
  type SeasonName,
  type WaterYearClass,
} from "./scenario.js";
import { renderCorrectionLog, renderDispatchTable } from "./table.js";
import type { PlantSummary } from "./types.js";

const api = new ApiClient();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

// -- plant browser -----------------------------------------------------------

let plants: PlantSummary[] = [];
const form: ScenarioForm = { ...DEFAULT_FORM, plants: [] };

async function loadPlants(): Promise<void> {
  const banner = $("banner");
  banner.hidden = true;
  try {
    plants = await api.listPlants();
  } catch {
    banner.hidden = false;
    return;
  }
  const tbody = $("plant-rows");
  tbody.textContent = "";
  for (const plant of plants) {
    const tr = document.createElement("tr");
    const select = document.createElement("td");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.dataset.plant = plant.project_name;
    box.checked = form.plants.includes(plant.project_name);
    box.addEventListener("change", () => {
      form.plants = selectedPlants();
      refreshRunControls();
    });
    select.appendChild(box);
    tr.appendChild(select);
    for (const value of [
      plant.project_name,
      String(plant.latitude),
      String(plant.longitude),
      String(plant.area_number),
      String(plant.rated_head_ft),
      String(plant.unit_count),
      plant.trained ? "yes" : "no",
    ]) {
      const td = document.createElement("td");
      td.textContent = value;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  const explorerPlant = $<HTMLSelectElement>("explorer-plant");
  const previous = explorerPlant.value;
  explorerPlant.textContent = "";
  for (const plant of plants) {
    const option = document.createElement("option");
    option.value = plant.project_name;
    option.textContent = plant.project_name;
    explorerPlant.appendChild(option);
  }
  if (plants.some((p) => p.project_name === previous)) {
    explorerPlant.value = previous;
  }
  refreshRunControls();
}

function selectedPlants(): string[] {
  return Array.from(
    document.querySelectorAll<HTMLInputElement>("#plant-rows input:checked"),
  ).map((box) => box.dataset.plant ?? "");
}

// -- hydrology explorer --------------------------------------------------------

const FIELD_COLORS: Record<string, string> = {
  flow: "#1f77b4",
  head: "#2ca02c",
  storage: "#9467bd",
  total_mw: "#d62728",
};

async function refreshExplorer(): Promise<void> {
  const plant = $<HTMLSelectElement>("explorer-plant").value;
  if (!plant) return;
  const start = $<HTMLInputElement>("explorer-start").value;
  const end = $<HTMLInputElement>("explorer-end").value;
  const fields = Array.from(
    document.querySelectorAll<HTMLInputElement>(".field-box:checked"),
  ).map((box) => box.value);
  const target = $("explorer-chart");
  if (!start || !end || fields.length === 0) return;
  try {
    const payload = await api.timeseries(plant, start, end, fields);
    renderLineChart(
      target,
      payload.timestamps,
      fields.map((field) => ({
        label: field,
        values: payload[field] as (number | null)[],
        color: FIELD_COLORS[field] ?? "#333",
      })),
    );
  } catch (error) {
    target.textContent =
      error instanceof ApiError ? `${error.payload.message}` : "request failed";
  }
}

// -- dispatch runner -------------------------------------------------------------

let currentRunId: string | null = null;

function readForm(): void {
  form.mode = $<HTMLSelectElement>("mode").value as ScenarioForm["mode"];
  form.start = $<HTMLInputElement>("hist-start").value || undefined;
  form.end = $<HTMLInputElement>("hist-end").value || undefined;
  form.waterYear = $<HTMLSelectElement>("water-year").value as WaterYearClass;
  form.season = $<HTMLSelectElement>("season").value as SeasonName;
  form.threshold = Number($<HTMLInputElement>("threshold").value);
  const seedRaw = $<HTMLInputElement>("seed").value;
  form.seed = seedRaw === "" ? undefined : Number(seedRaw);
}

function refreshRunControls(): void {
  readForm();
  $<HTMLDivElement>("hist-controls").hidden = form.mode !== "historical";
  $<HTMLDivElement>("synth-controls").hidden = form.mode !== "synthetic";
  const problems = formProblems(form);
  $<HTMLButtonElement>("run-button").disabled = problems.length > 0;
  $("form-problems").textContent = problems.join("; ");
}

function showInlineError(message: string, offerTrain: boolean): void {
  const box = $("run-error");
  box.hidden = false;
  box.textContent = message;
  const trainButton = $<HTMLButtonElement>("train-button");
  trainButton.hidden = !offerTrain;
}

async function runDispatch(): Promise<void> {
  readForm();
  if (!isValid(form)) return;
  $("run-error").hidden = true;
  $<HTMLButtonElement>("train-button").hidden = true;
  const statusLine = $("run-status");
  let runId: string;
  try {
    ({ run_id: runId } = await api.submitDispatch(toRequest(form)));
  } catch (error) {
    if (error instanceof ApiError) {
      showInlineError(
        `${error.payload.code}: ${error.payload.message}`,
        error.status === 409,
      );
    } else {
      showInlineError("request failed", false);
    }
    return;
  }
  currentRunId = runId;
  statusLine.textContent = `run ${runId}: queued`;
  const final = await pollJob(() => api.dispatchStatus(runId), {
    intervalMs: 1000,
    onUpdate: (payload) => {
      if (currentRunId === runId) {
        statusLine.textContent = `run ${runId}: ${payload.status}`;
      }
    },
  });
  if (currentRunId !== runId) return; // a newer run owns the view
  if (final.status === "failed" || !final.rows) {
    showInlineError(final.error?.message ?? "run failed", false);
    return;
  }
  renderDispatchTable($("dispatch-table"), final.rows);
  renderCorrectionLog($("correction-log"), final.correction_logs ?? {});
  const download = $<HTMLButtonElement>("download-button");
  download.hidden = false;
  download.onclick = async () => {
    const blob = await api.dispatchExport(runId);
    triggerDownload(blob, `${runId}.csv`);
  };
}

async function trainSelected(): Promise<void> {
  readForm();
  const statusLine = $("run-status");
  for (const plant of form.plants) {
    try {
      const { job_id } = await api.submitTrain(plant, {});
      statusLine.textContent = `training ${plant} (${job_id})`;
      const final = await pollJob(() => api.trainStatus(job_id), {
        intervalMs: 1000,
      });
      statusLine.textContent = `training ${plant}: ${final.status}`;
    } catch (error) {
      if (error instanceof ApiError) {
        showInlineError(`${error.payload.code}: ${error.payload.message}`, false);
      }
    }
  }
  await loadPlants();
}

export function wirePage(): void {
  $("banner-retry").addEventListener("click", () => void loadPlants());
  $("select-all").addEventListener("change", (event) => {
    const checked = (event.target as HTMLInputElement).checked;
    document
      .querySelectorAll<HTMLInputElement>("#plant-rows input[type=checkbox]")
      .forEach((box) => (box.checked = checked));
    form.plants = selectedPlants();
    refreshRunControls();
  });
  $("explorer-refresh").addEventListener("click", () => void refreshExplorer());
  $<HTMLSelectElement>("explorer-plant").addEventListener("change", () =>
    void refreshExplorer(),
  );
  for (const id of ["mode", "hist-start", "hist-end", "water-year", "season",
                    "threshold", "seed"]) {
    $(id).addEventListener("change", refreshRunControls);
    $(id).addEventListener("input", refreshRunControls);
  }
  $("run-button").addEventListener("click", () => void runDispatch());
  $("train-button").addEventListener("click", () => void trainSelected());
  refreshRunControls();
  void loadPlants();
}

if (typeof document !== "undefined" && document.getElementById("app-root")) {
  wirePage();
}
