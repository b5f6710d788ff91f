/**
 * Consensus board: athletes flagged by several methods, strongest
 * agreement first. Rows with 3+ methods are visually prioritized; filters
 * cover the minimum method count, sanction status and a method subset.
 */

import { ConsensusBoard, MethodInfo } from "../api.js";
import { escapeXml } from "../charts.js";
import { methodColor } from "../colors.js";
import { UiState, encodeState, withState } from "../state.js";

export function renderConsensus(state: UiState, board: ConsensusBoard, methods: MethodInfo[]): string {
  const minOptions = [2, 3, 4, 5]
    .map((k) => {
      const href = encodeState(withState(state, { minMethods: k }));
      return `<a class="tab${state.minMethods === k ? " active" : ""}" href="${href}" data-nav>≥${k}</a>`;
    })
    .join("");

  const sanctionToggle = encodeState(withState(state, { sanctionedOnly: !state.sanctionedOnly }));
  const methodBoxes = methods
    .map((m) => {
      const selected = state.methods.length === 0 || state.methods.includes(m.method_id);
      const next = state.methods.includes(m.method_id)
        ? state.methods.filter((x) => x !== m.method_id)
        : [...state.methods, m.method_id];
      const href = encodeState(withState(state, { methods: next }));
      return `<a class="chip${selected ? " on" : ""}" style="border-color:${methodColor(m.method_id)}" href="${href}" data-nav>${escapeXml(m.method_id)}</a>`;
    })
    .join("");

  if (!board.entries.length) {
    return `<div class="filters"><span>minimum methods: ${minOptions}</span>
      <a class="chip${state.sanctionedOnly ? " on" : ""}" href="${sanctionToggle}" data-nav>sanctioned only</a></div>
      <div class="filters">${methodBoxes}</div>
      <div class="empty">No athletes flagged by ≥${state.minMethods} methods with these filters.</div>`;
  }

  const rows = board.entries
    .map((e) => {
      const href = encodeState(withState(state, { view: "athlete", athleteId: e.athlete_id }));
      const chips = e.methods_flagging
        .map((m) => `<span class="swatch" style="background:${methodColor(m)}" title="${escapeXml(m)}"></span>`)
        .join("");
      const priority = e.method_count >= 3 ? " priority" : "";
      return `<tr class="consensus-row${priority}" data-count="${e.method_count}">
        <td><a href="${href}" data-nav class="athlete-link">${escapeXml(e.athlete_id)}</a></td>
        <td class="num"><span class="badge">${e.method_count}</span></td>
        <td>${chips}</td>
        <td>${e.is_sanctioned ? "<span class='flag-sanctioned'>sanctioned</span>" : ""}</td>
        <td class="num">${e.best_normalized_rank.toFixed(3)}</td>
      </tr>`;
    })
    .join("");

  return `<div class="filters"><span>minimum methods: ${minOptions}</span>
      <a class="chip${state.sanctionedOnly ? " on" : ""}" href="${sanctionToggle}" data-nav>sanctioned only</a></div>
    <div class="filters">${methodBoxes}</div>
    <p class="meta">${board.entries.length} athletes · methods materialized: ${board.methods_materialized.join(", ")}</p>
    <table class="grid">
      <thead><tr><th>athlete</th><th>methods</th><th>which</th><th>status</th><th>best rank</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderNotMaterialized(state: UiState, hint: string): string {
  return `<div class="empty">
    <p>No detection results exist for this slice yet${hint ? ` (${escapeXml(hint)})` : ""}.</p>
    <button id="run-detection" class="cta">Run detection on ${escapeXml(state.eventCode)}</button>
    <p id="run-progress" class="meta"></p>
  </div>`;
}
