/**
 * View state and its URL round trip. The query string is the single
 * serialized form: reloading any URL reproduces the same table order,
 * selection, inspector layer, and filter.
 */

import type { SortKey, SortOrder, DispositionState } from "./api.js";

export type Layer =
  | { kind: "rgb" }
  | { kind: "band"; k: number }
  | { kind: "heatmap" };

export type NormMode = "local" | "global";
export type DispositionFilter = "all" | DispositionState;

export interface ViewState {
  sort: SortKey;
  order: SortOrder;
  filter: DispositionFilter;
  selected: string | null;
  layer: Layer;
  norm: NormMode;
}

export const DEFAULT_VIEW: ViewState = {
  sort: "max",
  order: "desc",
  filter: "all",
  selected: null,
  layer: { kind: "rgb" },
  norm: "local",
};

const SORT_KEYS: SortKey[] = ["max", "mean", "variance", "p99"];
const ORDERS: SortOrder[] = ["asc", "desc"];
const FILTERS: DispositionFilter[] = ["all", "unreviewed", "reviewed", "flagged"];

function layerToken(layer: Layer): string {
  switch (layer.kind) {
    case "rgb":
      return "rgb";
    case "band":
      return `band${layer.k}`;
    case "heatmap":
      return "heat";
  }
}

function parseLayer(token: string | null): Layer {
  if (token === "heat") return { kind: "heatmap" };
  if (token !== null) {
    const m = /^band([1-6])$/.exec(token);
    if (m) return { kind: "band", k: Number(m[1]) };
  }
  return { kind: "rgb" };
}

/** Serialize to a query string, omitting anything at its default. */
export function encodeView(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.sort !== DEFAULT_VIEW.sort) params.set("sort", state.sort);
  if (state.order !== DEFAULT_VIEW.order) params.set("order", state.order);
  if (state.filter !== DEFAULT_VIEW.filter) params.set("filter", state.filter);
  if (state.selected !== null) params.set("seq", state.selected);
  const token = layerToken(state.layer);
  if (token !== "rgb") params.set("layer", token);
  if (state.norm !== DEFAULT_VIEW.norm) params.set("norm", state.norm);
  return params.toString();
}

function pick<T extends string>(value: string | null, allowed: readonly T[], fallback: T): T {
  return allowed.includes(value as T) ? (value as T) : fallback;
}

/** Parse a query string; anything missing or malformed falls back to the default. */
export function decodeView(query: string): ViewState {
  const params = new URLSearchParams(query);
  return {
    sort: pick(params.get("sort"), SORT_KEYS, DEFAULT_VIEW.sort),
    order: pick(params.get("order"), ORDERS, DEFAULT_VIEW.order),
    filter: pick(params.get("filter"), FILTERS, DEFAULT_VIEW.filter),
    selected: params.get("seq"),
    layer: parseLayer(params.get("layer")),
    norm: pick(params.get("norm"), ["local", "global"] as const, DEFAULT_VIEW.norm),
  };
}
