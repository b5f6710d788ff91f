/**
 * Case review: one athlete's trajectory with method-colored flag markers,
 * the API-provided distribution summary, per-flag explanations, and links
 * back to source competitions.
 */

import { CaseReview } from "../api.js";
import { boxPlot, escapeXml, histogramChart, trajectoryChart } from "../charts.js";
import { methodColor } from "../colors.js";
import { UiState, encodeState, withState } from "../state.js";

export function renderCaseReview(state: UiState, view: CaseReview): string {
  const back = encodeState(withState(state, { view: "screening", athleteId: "" }));
  const flaggedMethods = [...new Set(view.explanations.map((e) => e.method_id))].sort();
  const legend = flaggedMethods
    .map((m) => `<span class="legend-item"><span class="swatch" style="background:${methodColor(m)}"></span>${escapeXml(m)}</span>`)
    .join("");

  const explanations = view.explanations
    .map(
      (e) => `<li><span class="swatch" style="background:${methodColor(e.method_id)}"></span>
        <b>${escapeXml(e.method_id)}</b> · ${e.date} · ${e.time_seconds.toFixed(2)}s —
        ${escapeXml(e.explanation)}</li>`,
    )
    .join("");

  const competitions = view.competitions
    .map((c) => `<li>${escapeXml(c.date)} · ${escapeXml(c.name)} (${escapeXml(c.venue)}) <code>${escapeXml(c.competition_id)}</code></li>`)
    .join("");

  const sanctioned = view.is_sanctioned
    ? `<span class="flag-sanctioned">sanctioned</span>`
    : `<span class="flag-clean">no sanction on record</span>`;

  return `<p><a href="${back}" data-nav>← back to screening</a></p>
    <h2>${escapeXml(view.athlete_id)} ${view.athlete_name ? "· " + escapeXml(view.athlete_name) : ""} ${sanctioned}</h2>
    <div class="legend">${legend || "<span class='meta'>no performances flagged</span>"}</div>
    ${trajectoryChart(view)}
    <div class="panel-row">
      <div class="panel"><h3>Distribution</h3>${histogramChart(view.distribution.histogram)}</div>
      <div class="panel"><h3>Spread</h3>${boxPlot(view.distribution.five_number)}</div>
    </div>
    <div class="panel"><h3>Flag explanations</h3>
      ${explanations ? `<ul class="explanations">${explanations}</ul>` : "<p class='meta'>none</p>"}
    </div>
    <div class="panel"><h3>Source competitions</h3><ul class="competitions">${competitions}</ul></div>`;
}

export function renderAthleteMissing(state: UiState): string {
  const back = encodeState(withState(state, { view: "screening", athleteId: "" }));
  return `<p><a href="${back}" data-nav>← back to screening</a></p>
    <div class="empty">Athlete <b>${escapeXml(state.athleteId)}</b> has no performances in this slice.
    Check the event code and date window.</div>`;
}
