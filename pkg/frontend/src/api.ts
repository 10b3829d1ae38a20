/**
 * Typed client for the triage service. Every number and image the
 * dashboard shows comes through here; nothing is computed client-side.
 */

export type SortKey = "max" | "mean" | "variance" | "p99";
export type SortOrder = "asc" | "desc";
export type DispositionState = "unreviewed" | "reviewed" | "flagged";

export interface ScoreSummary {
  max: number;
  mean: number;
  variance: number;
  p99: number;
}

export interface SequenceRow {
  sequence_id: string;
  sol: number;
  eye: "left" | "right";
  scores: ScoreSummary;
  disposition: DispositionState;
}

export interface ModelInfo {
  v: number;
  n_bands: number;
  band_wavelengths: number[];
  brightness_corrected: boolean;
  ridge_lambda: number;
  training_pixel_count: number;
  fingerprint: string;
  score_percentiles: Record<string, number> | null;
}

export interface DispositionEcho {
  v: number;
  sequence_id: string;
  state: DispositionState;
  note: string;
  updated_at: string;
}

export const NOTE_LIMIT = 2000;

/** Pre-flight check mirroring the server's note rules. */
export function noteError(note: string): string | null {
  if (note.length > NOTE_LIMIT) {
    return `note is ${note.length} characters; the limit is ${NOTE_LIMIT}`;
  }
  return null;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function bodyError(resp: Response): Promise<ApiError> {
  let message = `request failed with status ${resp.status}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(resp.status, message);
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  async listSequences(
    opts: { sort?: SortKey; order?: SortOrder; limit?: number; offset?: number } = {},
  ): Promise<SequenceRow[]> {
    const params = new URLSearchParams();
    if (opts.sort) params.set("sort", opts.sort);
    if (opts.order) params.set("order", opts.order);
    if (opts.limit !== undefined) params.set("limit", String(opts.limit));
    if (opts.offset !== undefined) params.set("offset", String(opts.offset));
    const qs = params.toString();
    const resp = await fetch(`${this.base}/api/sequences${qs ? "?" + qs : ""}`);
    if (!resp.ok) throw await bodyError(resp);
    return resp.json();
  }

  async getModel(): Promise<ModelInfo> {
    const resp = await fetch(`${this.base}/api/model`);
    if (!resp.ok) throw await bodyError(resp);
    return resp.json();
  }

  async setDisposition(
    sequenceId: string,
    state: DispositionState,
    note: string,
  ): Promise<DispositionEcho> {
    const problem = noteError(note);
    if (problem) throw new ApiError(0, problem);
    const resp = await fetch(
      `${this.base}/api/sequences/${encodeURIComponent(sequenceId)}/disposition`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ state, note }),
      },
    );
    if (!resp.ok) throw await bodyError(resp);
    return resp.json();
  }
}
