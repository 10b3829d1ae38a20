/**
 * Inspector image addressing. URLs carry the model fingerprint as a
 * cache-buster so a refit invalidates every stale tile, and the heat map
 * URL carries the normalization mode explicitly.
 */

import type { Layer, NormMode } from "./state.js";

export const LAYER_CHOICES: Layer[] = [
  { kind: "rgb" },
  { kind: "band", k: 1 },
  { kind: "band", k: 2 },
  { kind: "band", k: 3 },
  { kind: "band", k: 4 },
  { kind: "band", k: 5 },
  { kind: "band", k: 6 },
  { kind: "heatmap" },
];

export function layerLabel(layer: Layer, wavelengths: number[] | null): string {
  switch (layer.kind) {
    case "rgb":
      return "RGB";
    case "band": {
      const nm = wavelengths ? wavelengths[layer.k - 1] : undefined;
      return nm === undefined ? `L${layer.k}` : `L${layer.k} ${nm} nm`;
    }
    case "heatmap":
      return "heat map";
  }
}

export function imageUrl(
  base: string,
  sequenceId: string,
  layer: Layer,
  norm: NormMode,
  fingerprint: string | null,
): string {
  const prefix = `${base}/api/sequences/${encodeURIComponent(sequenceId)}`;
  const bust = fingerprint === null ? "" : `fp=${fingerprint.slice(0, 16)}`;
  switch (layer.kind) {
    case "rgb":
      return `${prefix}/rgb.png${bust ? "?" + bust : ""}`;
    case "band":
      return `${prefix}/band/${layer.k}.png${bust ? "?" + bust : ""}`;
    case "heatmap":
      return `${prefix}/heatmap.png?norm=${norm}${bust ? "&" + bust : ""}`;
  }
}
