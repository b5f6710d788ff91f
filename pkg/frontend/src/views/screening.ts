/**
 * Screening workflow: flagged-athlete table for one method with
 * cross-method agreement badges. Rows link to case review.
 */

import { MethodInfo, ScreeningPage } from "../api.js";
import { escapeXml } from "../charts.js";
import { methodColor } from "../colors.js";
import { UiState, encodeState, withState } from "../state.js";

export function renderScreening(state: UiState, page: ScreeningPage, methods: MethodInfo[]): string {
  const tabs = methods
    .map((m) => {
      const href = encodeState(withState(state, { method: m.method_id, cursor: "" }));
      const active = m.method_id === state.method ? " active" : "";
      return `<a class="tab${active}" style="border-color:${methodColor(m.method_id)}" href="${href}" data-nav>${escapeXml(m.method_id)}</a>`;
    })
    .join("");

  if (!page.rows.length) {
    return `<div class="tabs">${tabs}</div>
      <div class="empty">No athletes flagged by <b>${escapeXml(state.method)}</b> in this slice.
      Try another method, widen the date window, or run detection from the consensus board.</div>`;
  }

  const rows = page.rows
    .map((row) => {
      const href = encodeState(withState(state, { view: "athlete", athleteId: row.athlete_id }));
      const score = row.best_score === null ? "–" : row.best_score.toFixed(3);
      return `<tr>
        <td><a href="${href}" data-nav class="athlete-link">${escapeXml(row.athlete_id)}</a></td>
        <td class="num">${score}</td>
        <td class="num">${row.flag_count}</td>
        <td><span class="badge" data-agreement="${row.agreement}" title="methods flagging this athlete">${row.agreement}</span></td>
        <td class="note">${escapeXml(row.explanation)}</td>
      </tr>`;
    })
    .join("");

  const nextHref = page.next_cursor
    ? `<a class="pager" href="${encodeState(withState(state, { cursor: page.next_cursor }))}" data-nav>next page →</a>`
    : "";
  const firstHref = state.cursor
    ? `<a class="pager" href="${encodeState(withState(state, { cursor: "" }))}" data-nav>← first page</a>`
    : "";

  return `<div class="tabs">${tabs}</div>
    <p class="meta">${page.total_flagged} athletes flagged by <b>${escapeXml(page.method_id)}</b></p>
    <table class="grid">
      <thead><tr><th>athlete</th><th>best score</th><th>flags</th><th>agreement</th><th>why</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <div class="pagers">${firstHref}${nextHref}</div>`;
}
