import { describe, expect, it } from "vitest";

import { noteError } from "../src/api.js";
import { LAYER_CHOICES, imageUrl, layerLabel } from "../src/inspector.js";

const FP = "abcdef0123456789deadbeefdeadbeefdeadbeefdeadbeefdeadbeefdeadbeef";

describe("imageUrl", () => {
  it("addresses each layer kind", () => {
    expect(imageUrl("", "s1", { kind: "rgb" }, "local", null)).toBe(
      "/api/sequences/s1/rgb.png",
    );
    expect(imageUrl("", "s1", { kind: "band", k: 4 }, "local", null)).toBe(
      "/api/sequences/s1/band/4.png",
    );
    expect(imageUrl("", "s1", { kind: "heatmap" }, "local", null)).toBe(
      "/api/sequences/s1/heatmap.png?norm=local",
    );
  });

  it("puts the normalization toggle in the query", () => {
    const url = imageUrl("", "s1", { kind: "heatmap" }, "global", null);
    expect(url).toContain("norm=global");
  });

  it("carries a fingerprint cache-buster on every layer", () => {
    for (const layer of LAYER_CHOICES) {
      const url = imageUrl("", "s1", layer, "local", FP);
      expect(url).toContain(`fp=${FP.slice(0, 16)}`);
    }
  });

  it("escapes awkward sequence ids", () => {
    const url = imageUrl("", "a b/c", { kind: "rgb" }, "local", null);
    expect(url).toBe("/api/sequences/a%20b%2Fc/rgb.png");
  });

  it("prefixes an explicit base", () => {
    const url = imageUrl("http://127.0.0.1:9000", "s1", { kind: "heatmap" }, "local", null);
    expect(url.startsWith("http://127.0.0.1:9000/api/")).toBe(true);
  });
});

describe("layerLabel", () => {
  it("names bands by wavelength when known", () => {
    expect(layerLabel({ kind: "band", k: 5 }, [527, 445, 751, 676, 867, 1012])).toBe(
      "L5 867 nm",
    );
    expect(layerLabel({ kind: "band", k: 5 }, null)).toBe("L5");
    expect(layerLabel({ kind: "rgb" }, null)).toBe("RGB");
  });
});

describe("noteError", () => {
  it("rejects notes past the limit before any network call", () => {
    expect(noteError("x".repeat(2000))).toBeNull();
    expect(noteError("x".repeat(2001))).toMatch(/limit/);
    expect(noteError("")).toBeNull();
  });
});
