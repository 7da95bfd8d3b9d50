import type {
  CorrectionLogPayload,
  DispatchRowPayload,
} from "./types.js";

/** Column order matches the server's case export. */
export const DISPATCH_COLUMNS: ReadonlyArray<{
  header: string;
  key: keyof DispatchRowPayload;
}> = [
  { header: "Project", key: "project" },
  { header: "Unit ID", key: "unit_id" },
  { header: "Pgen (MW)", key: "pgen_ref" },
  { header: "Pmax (MW)", key: "pmax_nominal" },
  { header: "Head (ft)", key: "head_ft" },
  { header: "Pgen calculated (MW)", key: "pgen_calculated" },
  { header: "Pmax available (MW)", key: "pmax_available" },
];

/**
 * Render the dispatch table. Cells carry the payload values verbatim
 * (String(value), no rounding, no arithmetic): what the server sent is what
 * the user sees.
 */
export function renderDispatchTable(
  container: HTMLElement,
  rows: DispatchRowPayload[],
): HTMLTableElement {
  const table = document.createElement("table");
  table.className = "dispatch-table";
  const thead = document.createElement("thead");
  const headRow = document.createElement("tr");
  for (const col of DISPATCH_COLUMNS) {
    const th = document.createElement("th");
    th.textContent = col.header;
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  table.appendChild(thead);
  const tbody = document.createElement("tbody");
  for (const row of rows) {
    const tr = document.createElement("tr");
    for (const col of DISPATCH_COLUMNS) {
      const td = document.createElement("td");
      td.textContent = String(row[col.key]);
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  container.textContent = "";
  container.appendChild(table);
  return table;
}

export function renderCorrectionLog(
  container: HTMLElement,
  logs: Record<string, CorrectionLogPayload>,
): void {
  container.textContent = "";
  for (const [plant, log] of Object.entries(logs)) {
    const section = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent =
      `${plant}: ${log.actions.length} corrections, ` +
      `residual ${String(log.residual_mw)} MW`;
    section.appendChild(summary);
    const list = document.createElement("ul");
    for (const action of log.actions) {
      const item = document.createElement("li");
      item.textContent =
        `${action.action} ${action.unit_id}: ` +
        `${String(action.from_mw)} -> ${String(action.to_mw)} (${action.note})`;
      list.appendChild(item);
    }
    for (const warning of log.warnings) {
      const item = document.createElement("li");
      item.className = "warning";
      item.textContent = warning;
      list.appendChild(item);
    }
    for (const unit of log.unresolved) {
      const item = document.createElement("li");
      item.className = "warning";
      item.textContent = `${unit}: still outside its efficient band`;
      list.appendChild(item);
    }
    section.appendChild(list);
    container.appendChild(section);
  }
}
