/**
 * SVG chart builders for case review. Pure string builders: inputs are API
 * payloads, outputs are SVG markup. Only coordinate scaling happens here;
 * all statistics (quartiles, histogram bins) arrive precomputed from the
 * API so the console can never drift from the engine.
 */

import { CaseReview, TrajectoryPoint } from "./api.js";
import { methodColor } from "./colors.js";

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function scale(value: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((value - lo) / (hi - lo)) * (outHi - outLo);
}

const W = 760;
const H = 300;
const PAD = { left: 56, right: 16, top: 16, bottom: 36 };

function dateNumber(iso: string): number {
  return Date.parse(iso);
}

export function trajectoryChart(view: CaseReview): string {
  const points = view.trajectory;
  if (!points.length) return `<svg class="chart" viewBox="0 0 ${W} ${H}"></svg>`;

  const xs = points.map((p) => dateNumber(p.date));
  const ys = points.map((p) => p.time_seconds);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const ySpan = Math.max(...ys) - Math.min(...ys) || 0.1;
  const yLo = Math.min(...ys) - ySpan * 0.15;
  const yHi = Math.max(...ys) + ySpan * 0.15;

  const px = (p: TrajectoryPoint) => scale(dateNumber(p.date), xLo, xHi, PAD.left, W - PAD.right);
  const py = (p: TrajectoryPoint) => scale(p.time_seconds, yLo, yHi, H - PAD.bottom, PAD.top);

  const path = points
    .map((p, i) => `${i === 0 ? "M" : "L"}${px(p).toFixed(1)},${py(p).toFixed(1)}`)
    .join(" ");

  const markers = points
    .map((p) => {
      const x = px(p).toFixed(1);
      const y = py(p).toFixed(1);
      const flaggedBy = Object.entries(p.methods).filter(([, m]) => m.flagged);
      const base = `<circle cx="${x}" cy="${y}" r="3.5" class="pt${flaggedBy.length ? " pt-flagged" : ""}">` +
        `<title>${escapeXml(`${p.date} — ${p.time_seconds.toFixed(2)}s (${p.round})`)}</title></circle>`;
      // one colored ring per flagging method, radius stepped so all stay visible
      const rings = flaggedBy
        .map(([methodId, m], i) => {
          const tip = `${methodId}: score ${m.score === null ? "n/a" : m.score.toFixed(3)}`;
          return `<circle cx="${x}" cy="${y}" r="${6 + i * 3.5}" class="ring" stroke="${methodColor(methodId)}" data-method="${escapeXml(methodId)}"><title>${escapeXml(tip)}</title></circle>`;
        })
        .join("");
      return base + rings;
    })
    .join("");

  const yTicks = [yLo + ySpan * 0.1, (yLo + yHi) / 2, yHi - ySpan * 0.1]
    .map((v) => {
      const y = scale(v, yLo, yHi, H - PAD.bottom, PAD.top).toFixed(1);
      return `<text x="${PAD.left - 8}" y="${y}" class="tick" text-anchor="end">${v.toFixed(2)}</text>` +
        `<line x1="${PAD.left}" x2="${W - PAD.right}" y1="${y}" y2="${y}" class="grid"/>`;
    })
    .join("");

  const xLabels = [points[0], points[points.length - 1]]
    .map((p) => `<text x="${px(p).toFixed(1)}" y="${H - 10}" class="tick" text-anchor="middle">${p.date}</text>`)
    .join("");

  return `<svg class="chart" viewBox="0 0 ${W} ${H}" role="img" aria-label="performance trajectory">` +
    `${yTicks}${xLabels}<path d="${path}" class="traj"/>${markers}</svg>`;
}

export function histogramChart(histogram: { counts: number[]; edges: number[] }): string {
  const { counts, edges } = histogram;
  const w = 360;
  const h = 180;
  const pad = { left: 34, right: 8, top: 8, bottom: 26 };
  const maxCount = Math.max(...counts, 1);
  const bars = counts
    .map((count, i) => {
      const x0 = scale(i, 0, counts.length, pad.left, w - pad.right);
      const x1 = scale(i + 1, 0, counts.length, pad.left, w - pad.right);
      const y = scale(count, 0, maxCount, h - pad.bottom, pad.top);
      const label = `${edges[i].toFixed(2)}–${edges[i + 1].toFixed(2)}s: ${count}`;
      return `<rect x="${x0.toFixed(1)}" y="${y.toFixed(1)}" width="${(x1 - x0 - 1).toFixed(1)}" height="${(h - pad.bottom - y).toFixed(1)}" class="bar"><title>${escapeXml(label)}</title></rect>`;
    })
    .join("");
  const lo = edges[0].toFixed(2);
  const hi = edges[edges.length - 1].toFixed(2);
  return `<svg class="chart chart-small" viewBox="0 0 ${w} ${h}" role="img" aria-label="time histogram">${bars}` +
    `<text x="${pad.left}" y="${h - 8}" class="tick">${lo}s</text>` +
    `<text x="${w - pad.right}" y="${h - 8}" class="tick" text-anchor="end">${hi}s</text></svg>`;
}

export function boxPlot(five: { min: number; q1: number; median: number; q3: number; max: number }): string {
  const w = 360;
  const h = 90;
  const pad = 34;
  const lo = five.min;
  const hi = five.max;
  const x = (v: number) => scale(v, lo, hi, pad, w - pad).toFixed(1);
  const mid = h / 2;
  const boxTop = mid - 18;
  const boxH = 36;
  return `<svg class="chart chart-small" viewBox="0 0 ${w} ${h}" role="img" aria-label="five-number summary">` +
    `<line x1="${x(five.min)}" x2="${x(five.max)}" y1="${mid}" y2="${mid}" class="whisker"/>` +
    `<line x1="${x(five.min)}" x2="${x(five.min)}" y1="${mid - 12}" y2="${mid + 12}" class="whisker"/>` +
    `<line x1="${x(five.max)}" x2="${x(five.max)}" y1="${mid - 12}" y2="${mid + 12}" class="whisker"/>` +
    `<rect x="${x(five.q1)}" y="${boxTop}" width="${(Number(x(five.q3)) - Number(x(five.q1))).toFixed(1)}" height="${boxH}" class="box"><title>${escapeXml(`Q1 ${five.q1.toFixed(2)}s · median ${five.median.toFixed(2)}s · Q3 ${five.q3.toFixed(2)}s`)}</title></rect>` +
    `<line x1="${x(five.median)}" x2="${x(five.median)}" y1="${boxTop}" y2="${boxTop + boxH}" class="median"/>` +
    `<text x="${x(five.min)}" y="${h - 4}" class="tick" text-anchor="middle">${five.min.toFixed(2)}</text>` +
    `<text x="${x(five.max)}" y="${h - 4}" class="tick" text-anchor="middle">${five.max.toFixed(2)}</text></svg>`;
}
