import { describe, expect, it } from "vitest";

import { CaseReview, ConsensusBoard, MethodInfo, ScreeningPage } from "../src/api";
import { boxPlot, histogramChart, trajectoryChart } from "../src/charts";
import { DEFAULT_STATE, withState } from "../src/state";
import { renderCaseReview } from "../src/views/caseReview";
import { renderConsensus } from "../src/views/consensus";
import { renderScreening } from "../src/views/screening";

const METHODS: MethodInfo[] = [
  { method_id: "zscore", category: "ST", complexity_note: "" },
  { method_id: "iforest", category: "ML", complexity_note: "" },
];

const STATE = withState(DEFAULT_STATE, { eventCode: "100m-men", method: "iforest" });

function page(rows: ScreeningPage["rows"]): ScreeningPage {
  return { slice: {}, method_id: "iforest", rows, next_cursor: null, total_flagged: rows.length };
}

const ROW = {
  athlete_id: "ATH000042",
  best_score: 0.71,
  rank_value: 0.71,
  flag_count: 2,
  explanation: "isolation score 0.710",
  agreement: 3,
};

describe("screening view", () => {
  it("renders one badge per row equal to the API agreement count", () => {
    const html = renderScreening(STATE, page([ROW, { ...ROW, athlete_id: "B", agreement: 1 }]), METHODS);
    expect(html).toContain('data-agreement="3"');
    expect(html).toContain('data-agreement="1"');
    const badges = [...html.matchAll(/data-agreement="(\d+)"/g)].map((m) => Number(m[1]));
    expect(badges).toEqual([3, 1]);
  });

  it("keeps slice filters in method tab links", () => {
    const html = renderScreening(STATE, page([ROW]), METHODS);
    expect(html).toContain("event=100m-men");
    expect(html).toContain("method=zscore");
  });

  it("renders an empty state with guidance when nothing is flagged", () => {
    const html = renderScreening(STATE, page([]), METHODS);
    expect(html).toContain("No athletes flagged");
  });

  it("is a pure function of state and data (deep-link determinism)", () => {
    const a = renderScreening(STATE, page([ROW]), METHODS);
    const b = renderScreening(structuredClone(STATE), structuredClone(page([ROW])), structuredClone(METHODS));
    expect(a).toBe(b);
  });

  it("escapes hostile text from the api", () => {
    const hostile = { ...ROW, explanation: '<img src=x onerror="pwn()">' };
    const html = renderScreening(STATE, page([hostile]), METHODS);
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });
});

const CASE: CaseReview = {
  athlete_id: "ATH000042",
  athlete_name: "Synthetic Athlete 42",
  event_code: "100m-men",
  is_sanctioned: true,
  trajectory: [
    { date: "2018-05-01", time_seconds: 10.52, wind_mps: 0.4, round: "final", competition_id: "C1",
      methods: { zscore: { flagged: false, score: 0.2 }, iforest: { flagged: false, score: 0.4 } } },
    { date: "2018-08-01", time_seconds: 10.05, wind_mps: 0.1, round: "final", competition_id: "C2",
      methods: { zscore: { flagged: true, score: 3.4 }, iforest: { flagged: true, score: 0.74 } } },
  ],
  distribution: {
    five_number: { min: 10.05, q1: 10.31, median: 10.49, q3: 10.6, max: 10.71 },
    histogram: { counts: [1, 0, 3], edges: [10.0, 10.25, 10.5, 10.75] },
  },
  explanations: [
    { method_id: "zscore", date: "2018-08-01", time_seconds: 10.05, explanation: "z=-3.40 vs career" },
    { method_id: "iforest", date: "2018-08-01", time_seconds: 10.05, explanation: "isolation score 0.740" },
  ],
  competitions: [{ competition_id: "C2", name: "Meet", date: "2018-08-01", venue: "Stadium" }],
};

describe("case review view", () => {
  it("marks a doubly-flagged performance with two method rings", () => {
    const svg = trajectoryChart(CASE);
    const rings = [...svg.matchAll(/class="ring"/g)];
    expect(rings.length).toBe(2);
    expect(svg).toContain('data-method="zscore"');
    expect(svg).toContain('data-method="iforest"');
  });

  it("box plot uses the five API numbers verbatim, no recomputation", () => {
    const svg = boxPlot(CASE.distribution.five_number);
    for (const v of [10.05, 10.71]) expect(svg).toContain(v.toFixed(2));
    expect(svg).toContain("Q1 10.31s");
    expect(svg).toContain("median 10.49s");
    expect(svg).toContain("Q3 10.60s");
  });

  it("histogram renders one bar per bin with API counts", () => {
    const svg = histogramChart(CASE.distribution.histogram);
    expect([...svg.matchAll(/<rect/g)].length).toBe(3);
    expect(svg).toContain("10.00–10.25s: 1");
  });

  it("shows per-method explanations and sanction status", () => {
    const html = renderCaseReview(STATE, CASE);
    expect(html).toContain("z=-3.40 vs career");
    expect(html).toContain("isolation score 0.740");
    expect(html).toContain("sanctioned");
  });

  it("is deterministic for deep links", () => {
    expect(renderCaseReview(STATE, CASE)).toBe(renderCaseReview(structuredClone(STATE), structuredClone(CASE)));
  });
});

describe("consensus view", () => {
  const board: ConsensusBoard = {
    slice: {},
    min_methods: 2,
    methods_materialized: ["zscore", "iforest"],
    entries: [
      { athlete_id: "A", methods_flagging: ["zscore", "iforest", "mad"], method_count: 3,
        is_sanctioned: false, best_normalized_rank: 0.1, top_scores: {} },
      { athlete_id: "B", methods_flagging: ["zscore", "iforest"], method_count: 2,
        is_sanctioned: true, best_normalized_rank: 0.2, top_scores: {} },
    ],
  };

  it("highlights 3+ agreement rows as priority", () => {
    const html = renderConsensus(STATE, board, METHODS);
    expect(html).toContain('class="consensus-row priority" data-count="3"');
    expect(html).toContain('class="consensus-row" data-count="2"');
  });

  it("marks sanctioned entries", () => {
    const html = renderConsensus(STATE, board, METHODS);
    expect(html.indexOf("flag-sanctioned")).toBeGreaterThan(-1);
  });

  it("min-methods links preserve the rest of the state", () => {
    const html = renderConsensus(withState(STATE, { view: "consensus" }), board, METHODS);
    expect(html).toContain("min=3");
    expect(html).toContain("event=100m-men");
  });
});
