/**
 * Typed client for the screening API (see docs/api.md). Every number shown
 * in the console comes from these payloads; the UI never recomputes
 * statistics. In-flight requests are aborted when the view state changes,
 * so stale responses can never clobber a newer view.
 */

import { UiState, sliceParams } from "./state.js";

export interface MethodInfo {
  method_id: string;
  category: string;
  complexity_note: string;
}

export interface SliceInfo {
  event_code: string;
  date_from: string;
  date_to: string;
  athletes: number;
  performances: number;
}

export interface ScreenRow {
  athlete_id: string;
  best_score: number | null;
  rank_value: number | null;
  flag_count: number;
  explanation: string;
  agreement: number;
}

export interface ScreeningPage {
  slice: Record<string, unknown>;
  method_id: string;
  rows: ScreenRow[];
  next_cursor: string | null;
  total_flagged: number;
}

export interface TrajectoryPoint {
  date: string;
  time_seconds: number;
  wind_mps: number | null;
  round: string;
  competition_id: string;
  methods: Record<string, { flagged: boolean; score: number | null }>;
}

export interface CaseReview {
  athlete_id: string;
  athlete_name: string;
  event_code: string;
  is_sanctioned: boolean;
  trajectory: TrajectoryPoint[];
  distribution: {
    five_number: { min: number; q1: number; median: number; q3: number; max: number };
    histogram: { counts: number[]; edges: number[] };
  };
  explanations: { method_id: string; date: string; time_seconds: number; explanation: string }[];
  competitions: { competition_id: string; name: string; date: string; venue: string }[];
}

export interface ConsensusEntry {
  athlete_id: string;
  methods_flagging: string[];
  method_count: number;
  is_sanctioned: boolean;
  best_normalized_rank: number;
  top_scores: Record<string, number>;
}

export interface ConsensusBoard {
  slice: Record<string, unknown>;
  min_methods: number;
  methods_materialized: string[];
  entries: ConsensusEntry[];
}

export interface RunStatus {
  run_id: string;
  status: "queued" | "running" | "done" | "failed";
  method_status: Record<string, { status: string }>;
  error: string | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public hint: string = "",
  ) {
    super(message);
  }
}

export class ApiClient {
  private controller: AbortController | null = null;

  constructor(private base: string = "") {}

  /** Abort whatever is in flight; called on every state change. */
  cancel(): void {
    this.controller?.abort();
    this.controller = null;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    this.controller = new AbortController();
    const response = await fetch(this.base + path, { ...init, signal: this.controller.signal });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const err = (body as { error?: { code?: string; message?: string; hint?: string } }).error ?? {};
      throw new ApiError(response.status, err.code ?? "http_error", err.message ?? response.statusText, err.hint ?? "");
    }
    return body as T;
  }

  private query(params: Record<string, string>): string {
    const qs = new URLSearchParams(params);
    return `?${qs.toString()}`;
  }

  methods(): Promise<MethodInfo[]> {
    return this.request("/api/methods");
  }

  slices(): Promise<SliceInfo[]> {
    return this.request("/api/slices");
  }

  screen(state: UiState): Promise<ScreeningPage> {
    const params = { ...sliceParams(state), method: state.method };
    if (state.cursor) (params as Record<string, string>).cursor = state.cursor;
    return this.request(`/api/screen${this.query(params)}`);
  }

  athlete(state: UiState): Promise<CaseReview> {
    return this.request(`/api/athletes/${encodeURIComponent(state.athleteId)}${this.query(sliceParams(state))}`);
  }

  consensus(state: UiState): Promise<ConsensusBoard> {
    const params: Record<string, string> = {
      ...sliceParams(state),
      min_methods: String(state.minMethods),
      sanctioned_only: state.sanctionedOnly ? "true" : "false",
    };
    if (state.methods.length) params.methods = state.methods.join(",");
    return this.request(`/api/consensus${this.query(params)}`);
  }

  detect(state: UiState, methods: string[] = []): Promise<{ run_id: string; status: string }> {
    return this.request("/api/detect", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        slice: {
          event_code: state.eventCode,
          gender: state.gender,
          date_from: state.dateFrom,
          date_to: state.dateTo,
          wind_legal_only: state.windLegalOnly,
        },
        methods,
      }),
    });
  }

  run(runId: string): Promise<RunStatus> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}`);
  }
}
