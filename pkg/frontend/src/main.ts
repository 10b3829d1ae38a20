/** Dashboard wiring: one table, one inspector, state mirrored in the URL. */

import { ApiClient, ApiError, noteError } from "./api.js";
import type { DispositionState, ModelInfo, SequenceRow, SortKey } from "./api.js";
import { DEFAULT_VIEW, decodeView, encodeView } from "./state.js";
import type { ViewState } from "./state.js";
import { buildTable, stepSelection } from "./table.js";
import { LAYER_CHOICES, imageUrl, layerLabel } from "./inspector.js";

const api = new ApiClient("");

let view: ViewState = decodeView(window.location.search);
let rows: SequenceRow[] = [];
let model: ModelInfo | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const tableBody = el<HTMLTableSectionElement>("rows");
const banner = el<HTMLDivElement>("banner");
const bannerText = el<HTMLSpanElement>("banner-text");
const toast = el<HTMLDivElement>("toast");
const inspectorTitle = el<HTMLDivElement>("inspector-title");
const layerBar = el<HTMLDivElement>("layer-bar");
const normBar = el<HTMLDivElement>("norm-bar");
const image = el<HTMLImageElement>("inspector-image");
const imageNote = el<HTMLDivElement>("image-note");
const noteBox = el<HTMLTextAreaElement>("note");
const filterSelect = el<HTMLSelectElement>("filter");
const modelLine = el<HTMLDivElement>("model-line");

function pushUrl() {
  const qs = encodeView(view);
  history.replaceState(null, "", qs ? `?${qs}` : window.location.pathname);
}

function setView(patch: Partial<ViewState>) {
  view = { ...view, ...patch };
  pushUrl();
  render();
}

let toastTimer: number | undefined;
function showToast(message: string) {
  toast.textContent = message;
  toast.classList.add("visible");
  window.clearTimeout(toastTimer);
  toastTimer = window.setTimeout(() => toast.classList.remove("visible"), 4000);
}

async function refresh() {
  banner.classList.remove("visible");
  try {
    [rows, model] = await Promise.all([
      api.listSequences({ sort: view.sort, order: view.order }),
      model ? Promise.resolve(model) : api.getModel(),
    ]);
    modelLine.textContent =
      `model ${model.fingerprint.slice(0, 12)}… · ${model.training_pixel_count} training px` +
      (model.brightness_corrected ? " · brightness-corrected" : "");
  } catch (err) {
    // the table must never go silently empty
    bannerText.textContent = `could not reach the service: ${(err as Error).message}`;
    banner.classList.add("visible");
  }
  render();
}

function render() {
  renderTable();
  renderInspector();
}

function renderTable() {
  const visible = buildTable(rows, view);
  tableBody.replaceChildren();
  if (visible.length === 0) {
    const tr = document.createElement("tr");
    const td = document.createElement("td");
    td.colSpan = 9;
    td.className = "empty";
    td.textContent =
      view.filter === "all" ? "no sequences scored yet" : `no ${view.filter} sequences`;
    tr.appendChild(td);
    tableBody.appendChild(tr);
    return;
  }
  for (const row of visible) {
    const tr = document.createElement("tr");
    tr.classList.toggle("selected", row.selected);
    tr.classList.toggle("dim", row.deEmphasized);
    // thumbnails always use the global scale so hot rows glow hotter
    const thumbCell = document.createElement("td");
    const thumb = document.createElement("img");
    thumb.className = "thumb";
    thumb.loading = "lazy";
    thumb.alt = "";
    thumb.src = imageUrl(
      "",
      row.sequenceId,
      { kind: "heatmap" },
      "global",
      model ? model.fingerprint : null,
    );
    thumbCell.appendChild(thumb);
    tr.appendChild(thumbCell);
    const cells = [
      row.sequenceId,
      String(row.sol),
      row.eye,
      row.cells.max,
      row.cells.mean,
      row.cells.variance,
      row.cells.p99,
    ];
    for (const text of cells) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    const badge = document.createElement("td");
    const span = document.createElement("span");
    span.className = `badge ${row.disposition}`;
    span.textContent = row.disposition;
    badge.appendChild(span);
    tr.appendChild(badge);
    tr.addEventListener("click", () => setView({ selected: row.sequenceId }));
    tableBody.appendChild(tr);
  }
  for (const th of document.querySelectorAll<HTMLTableCellElement>("th[data-key]")) {
    const key = th.dataset.key as SortKey;
    th.classList.toggle("active", key === view.sort);
    th.textContent = key + (key === view.sort ? (view.order === "desc" ? " ↓" : " ↑") : "");
  }
}

function renderInspector() {
  const selected = rows.find((r) => r.sequence_id === view.selected);
  if (!selected) {
    inspectorTitle.textContent = "select a sequence";
    layerBar.replaceChildren();
    normBar.replaceChildren();
    image.removeAttribute("src");
    image.classList.remove("loaded");
    imageNote.textContent = "";
    return;
  }
  inspectorTitle.textContent =
    `${selected.sequence_id} · sol ${selected.sol} · ${selected.eye} eye`;

  layerBar.replaceChildren();
  for (const layer of LAYER_CHOICES) {
    const btn = document.createElement("button");
    btn.textContent = layerLabel(layer, model ? model.band_wavelengths : null);
    const active = JSON.stringify(layer) === JSON.stringify(view.layer);
    btn.classList.toggle("active", active);
    btn.addEventListener("click", () => setView({ layer }));
    layerBar.appendChild(btn);
  }

  normBar.replaceChildren();
  if (view.layer.kind === "heatmap") {
    for (const norm of ["local", "global"] as const) {
      const btn = document.createElement("button");
      btn.textContent = norm;
      btn.classList.toggle("active", norm === view.norm);
      btn.addEventListener("click", () => setView({ norm }));
      normBar.appendChild(btn);
    }
  }

  imageNote.textContent = "";
  const url = imageUrl(
    "",
    selected.sequence_id,
    view.layer,
    view.norm,
    model ? model.fingerprint : null,
  );
  image.classList.remove("loaded");
  image.onload = () => image.classList.add("loaded");
  image.onerror = () => {
    image.removeAttribute("src");
    imageNote.textContent = "image unavailable for this sequence";
  };
  image.src = url;
}

async function mark(state: DispositionState) {
  const selected = rows.find((r) => r.sequence_id === view.selected);
  if (!selected) {
    showToast("select a sequence first");
    return;
  }
  const note = noteBox.value;
  const problem = noteError(note);
  if (problem) {
    showToast(problem);
    return;
  }
  const previous = selected.disposition;
  selected.disposition = state; // optimistic; rolled back on failure
  renderTable();
  try {
    await api.setDisposition(selected.sequence_id, state, note);
    noteBox.value = "";
  } catch (err) {
    selected.disposition = previous;
    renderTable();
    showToast(err instanceof ApiError ? err.message : "disposition update failed");
  }
}

function wire() {
  for (const th of document.querySelectorAll<HTMLTableCellElement>("th[data-key]")) {
    th.addEventListener("click", () => {
      const key = th.dataset.key as SortKey;
      // clicking the active header flips direction, a new one sorts desc
      const order = key === view.sort && view.order === "desc" ? "asc" : "desc";
      view = { ...view, sort: key, order };
      pushUrl();
      void refresh();
    });
  }
  filterSelect.value = view.filter;
  filterSelect.addEventListener("change", () => {
    setView({ filter: filterSelect.value as ViewState["filter"] });
  });
  el<HTMLButtonElement>("mark-reviewed").addEventListener("click", () => void mark("reviewed"));
  el<HTMLButtonElement>("mark-flagged").addEventListener("click", () => void mark("flagged"));
  el<HTMLButtonElement>("retry").addEventListener("click", () => void refresh());
  document.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLTextAreaElement || ev.target instanceof HTMLInputElement) return;
    if (ev.key === "j" || ev.key === "ArrowDown") {
      setView({ selected: stepSelection(buildTable(rows, view), view.selected, 1) });
      ev.preventDefault();
    } else if (ev.key === "k" || ev.key === "ArrowUp") {
      setView({ selected: stepSelection(buildTable(rows, view), view.selected, -1) });
      ev.preventDefault();
    }
  });
  window.addEventListener("popstate", () => {
    view = decodeView(window.location.search);
    filterSelect.value = view.filter;
    void refresh();
  });
}

wire();
void refresh();
