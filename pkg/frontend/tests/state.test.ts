import { describe, expect, it } from "vitest";

import { DEFAULT_STATE, UiState, decodeState, encodeState, sliceParams, withState } from "../src/state";

const CASES: UiState[] = [
  DEFAULT_STATE,
  withState(DEFAULT_STATE, { eventCode: "100m-men", view: "consensus", minMethods: 3 }),
  withState(DEFAULT_STATE, {
    view: "athlete",
    eventCode: "200m-women",
    gender: "women",
    athleteId: "ATH000123",
    dateFrom: "2015-01-01",
    dateTo: "2020-12-31",
    windLegalOnly: false,
  }),
  withState(DEFAULT_STATE, { method: "iforest", cursor: "abc123==", sanctionedOnly: true }),
  withState(DEFAULT_STATE, { methods: ["zscore", "copula"], minMethods: 4 }),
];

describe("url state", () => {
  it("round-trips every state through the query string", () => {
    for (const state of CASES) {
      expect(decodeState(encodeState(state))).toEqual(state);
    }
  });

  it("defaults omit themselves from the url", () => {
    expect(encodeState(DEFAULT_STATE)).toBe("");
  });

  it("ignores junk and falls back to defaults", () => {
    const state = decodeState("?view=nonsense&min=-3&wind=weird");
    expect(state.view).toBe("screening");
    expect(state.minMethods).toBe(2);
    expect(state.windLegalOnly).toBe(true);
  });

  it("encode is deterministic", () => {
    for (const state of CASES) {
      expect(encodeState(state)).toBe(encodeState(structuredClone(state)));
    }
  });

  it("slice params carry exactly the slice fields", () => {
    const params = sliceParams(withState(DEFAULT_STATE, { eventCode: "100m-men" }));
    expect(Object.keys(params).sort()).toEqual([
      "date_from", "date_to", "event_code", "gender", "wind_legal_only",
    ]);
    expect(params.event_code).toBe("100m-men");
  });
});
