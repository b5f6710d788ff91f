/**
 * URL-as-state: every view the console can show is fully described by a
 * query string, so investigator case links are shareable and reloads
 * reproduce the exact view.
 */

export type ViewName = "screening" | "athlete" | "consensus";

export interface UiState {
  view: ViewName;
  eventCode: string;
  gender: string;
  dateFrom: string;
  dateTo: string;
  windLegalOnly: boolean;
  method: string; // screening: which method's ranking to show
  methods: string[]; // consensus: method subset filter (empty = all)
  minMethods: number;
  sanctionedOnly: boolean;
  athleteId: string;
  cursor: string;
}

export const DEFAULT_STATE: UiState = {
  view: "screening",
  eventCode: "",
  gender: "men",
  dateFrom: "1990-01-01",
  dateTo: "2100-01-01",
  windLegalOnly: true,
  method: "excess_performance",
  methods: [],
  minMethods: 2,
  sanctionedOnly: false,
  athleteId: "",
  cursor: "",
};

const VIEWS: ViewName[] = ["screening", "athlete", "consensus"];

export function encodeState(state: UiState): string {
  const params = new URLSearchParams();
  const put = (key: string, value: string, fallback: string) => {
    if (value !== fallback) params.set(key, value);
  };
  put("view", state.view, DEFAULT_STATE.view);
  put("event", state.eventCode, DEFAULT_STATE.eventCode);
  put("gender", state.gender, DEFAULT_STATE.gender);
  put("from", state.dateFrom, DEFAULT_STATE.dateFrom);
  put("to", state.dateTo, DEFAULT_STATE.dateTo);
  put("wind", state.windLegalOnly ? "legal" : "all", "legal");
  put("method", state.method, DEFAULT_STATE.method);
  put("methods", state.methods.join(","), "");
  put("min", String(state.minMethods), String(DEFAULT_STATE.minMethods));
  put("sanctioned", state.sanctionedOnly ? "1" : "0", "0");
  put("athlete", state.athleteId, "");
  put("cursor", state.cursor, "");
  const qs = params.toString();
  return qs ? `?${qs}` : "";
}

export function decodeState(search: string): UiState {
  const params = new URLSearchParams(search.startsWith("?") ? search.slice(1) : search);
  const view = params.get("view") ?? DEFAULT_STATE.view;
  const minRaw = Number(params.get("min") ?? DEFAULT_STATE.minMethods);
  return {
    view: (VIEWS as string[]).includes(view) ? (view as ViewName) : DEFAULT_STATE.view,
    eventCode: params.get("event") ?? DEFAULT_STATE.eventCode,
    gender: params.get("gender") ?? DEFAULT_STATE.gender,
    dateFrom: params.get("from") ?? DEFAULT_STATE.dateFrom,
    dateTo: params.get("to") ?? DEFAULT_STATE.dateTo,
    windLegalOnly: (params.get("wind") ?? "legal") !== "all",
    method: params.get("method") ?? DEFAULT_STATE.method,
    methods: (params.get("methods") ?? "").split(",").filter((m) => m.length > 0),
    minMethods: Number.isFinite(minRaw) && minRaw >= 1 ? Math.floor(minRaw) : DEFAULT_STATE.minMethods,
    sanctionedOnly: params.get("sanctioned") === "1",
    athleteId: params.get("athlete") ?? "",
    cursor: params.get("cursor") ?? "",
  };
}

export function withState(state: UiState, patch: Partial<UiState>): UiState {
  return { ...state, ...patch };
}

/** Slice-identifying query parameters shared by every read endpoint. */
export function sliceParams(state: UiState): Record<string, string> {
  return {
    event_code: state.eventCode,
    gender: state.gender,
    date_from: state.dateFrom,
    date_to: state.dateTo,
    wind_legal_only: state.windLegalOnly ? "true" : "false",
  };
}
