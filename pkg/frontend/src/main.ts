/**
 * Console bootstrap: URL drives state, state drives one fetch, the fetch
 * result renders one view. Navigation rewrites the URL and re-enters the
 * loop; stale in-flight requests are aborted first.
 */

import { ApiClient, ApiError, MethodInfo, SliceInfo } from "./api.js";
import { escapeXml } from "./charts.js";
import { DEFAULT_STATE, UiState, decodeState, encodeState, withState } from "./state.js";
import { renderAthleteMissing, renderCaseReview } from "./views/caseReview.js";
import { renderConsensus, renderNotMaterialized } from "./views/consensus.js";
import { renderScreening } from "./views/screening.js";

const api = new ApiClient("");
let methodsCache: MethodInfo[] = [];
let slicesCache: SliceInfo[] = [];
let generation = 0;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function banner(message: string, hint = ""): void {
  el("banner").innerHTML = message
    ? `<div class="banner">${escapeXml(message)}${hint ? `<span class="hint">${escapeXml(hint)}</span>` : ""}</div>`
    : "";
}

function renderChrome(state: UiState): void {
  const tabs: [string, string][] = [
    ["screening", "Screening"],
    ["consensus", "Consensus"],
  ];
  const nav = tabs
    .map(([view, label]) => {
      const href = encodeState(withState(state, { view: view as UiState["view"], athleteId: "", cursor: "" }));
      return `<a class="navtab${state.view === view ? " active" : ""}" href="${href}" data-nav>${label}</a>`;
    })
    .join("");
  const sliceOptions = slicesCache
    .map((s) => `<option value="${escapeXml(s.event_code)}"${s.event_code === state.eventCode ? " selected" : ""}>${escapeXml(s.event_code)} (${s.athletes} athletes)</option>`)
    .join("");
  el("chrome").innerHTML = `
    <nav>${nav}</nav>
    <div class="slice-bar">
      <label>event <select id="f-event">${sliceOptions}</select></label>
      <label>from <input id="f-from" type="date" value="${state.dateFrom}"></label>
      <label>to <input id="f-to" type="date" value="${state.dateTo}"></label>
      <label><input id="f-wind" type="checkbox" ${state.windLegalOnly ? "checked" : ""}> wind-legal only</label>
    </div>`;

  el("f-event").addEventListener("change", (e) => {
    navigate(withState(state, { eventCode: (e.target as HTMLSelectElement).value, cursor: "", athleteId: "" }));
  });
  el("f-from").addEventListener("change", (e) => {
    navigate(withState(state, { dateFrom: (e.target as HTMLInputElement).value || DEFAULT_STATE.dateFrom, cursor: "" }));
  });
  el("f-to").addEventListener("change", (e) => {
    navigate(withState(state, { dateTo: (e.target as HTMLInputElement).value || DEFAULT_STATE.dateTo, cursor: "" }));
  });
  el("f-wind").addEventListener("change", (e) => {
    navigate(withState(state, { windLegalOnly: (e.target as HTMLInputElement).checked, cursor: "" }));
  });
}

async function pollRunUntilDone(runId: string, onTick: (text: string) => void): Promise<void> {
  for (;;) {
    const status = await api.run(runId);
    const done = Object.values(status.method_status).filter((m) => m.status === "done").length;
    onTick(`run ${status.run_id}: ${status.status} (${done}/${Object.keys(status.method_status).length} methods)`);
    if (status.status === "done" || status.status === "failed") {
      if (status.status === "failed") throw new ApiError(500, "run_failed", status.error ?? "detection failed");
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
}

function wireDetectionTrigger(state: UiState): void {
  const button = document.getElementById("run-detection");
  if (!button) return;
  button.addEventListener("click", async () => {
    (button as HTMLButtonElement).disabled = true;
    const progress = el("run-progress");
    try {
      const { run_id } = await api.detect(state);
      await pollRunUntilDone(run_id, (text) => (progress.textContent = text));
      await render(state); // auto-refresh once materialized
    } catch (err) {
      progress.textContent = err instanceof Error ? err.message : String(err);
      (button as HTMLButtonElement).disabled = false;
    }
  });
}

async function render(state: UiState): Promise<void> {
  const myGeneration = ++generation;
  api.cancel();
  banner("");
  renderChrome(state);
  const main = el("view");
  main.setAttribute("aria-busy", "true");
  try {
    if (!methodsCache.length) methodsCache = await api.methods();
    if (!slicesCache.length) {
      slicesCache = await api.slices();
      if (!state.eventCode && slicesCache.length) {
        navigate(withState(state, { eventCode: slicesCache[0].event_code }), true);
        return;
      }
      renderChrome(state);
    }

    let html: string;
    if (state.view === "athlete") {
      try {
        const view = await api.athlete(state);
        html = renderCaseReview(state, view);
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) html = renderAthleteMissing(state);
        else throw err;
      }
    } else if (state.view === "consensus") {
      try {
        const board = await api.consensus(state);
        html = renderConsensus(state, board, methodsCache);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) html = renderNotMaterialized(state, err.hint);
        else throw err;
      }
    } else {
      try {
        const page = await api.screen(state);
        html = renderScreening(state, page, methodsCache);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) html = renderNotMaterialized(state, err.hint);
        else if (err instanceof ApiError && err.status === 410) {
          navigate(withState(state, { cursor: "" }), true);
          return;
        } else throw err;
      }
    }
    if (myGeneration !== generation) return; // a newer navigation superseded us
    main.innerHTML = html;
    wireDetectionTrigger(state);
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") return;
    if (myGeneration !== generation) return;
    if (err instanceof ApiError) banner(`${err.code}: ${err.message}`, err.hint);
    else banner(String(err));
    main.innerHTML = `<div class="empty">Nothing to show.</div>`;
  } finally {
    main.removeAttribute("aria-busy");
  }
}

function navigate(state: UiState, replace = false): void {
  const url = location.pathname + encodeState(state);
  if (replace) history.replaceState(null, "", url);
  else history.pushState(null, "", url);
  void render(state);
}

function currentState(): UiState {
  return decodeState(location.search);
}

document.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("a[data-nav]");
  if (!target) return;
  event.preventDefault();
  navigate(decodeState(new URL((target as HTMLAnchorElement).href).search));
});

window.addEventListener("popstate", () => void render(currentState()));

void render(currentState());
