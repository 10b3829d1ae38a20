import { describe, expect, it } from "vitest";

import { formatScore } from "../src/format.js";

describe("formatScore", () => {
  it("keeps three significant figures", () => {
    expect(formatScore(251.456)).toBe("251");
    expect(formatScore(34.289)).toBe("34.3");
    expect(formatScore(6.00021)).toBe("6");
    expect(formatScore(0.012345)).toBe("0.0123");
    expect(formatScore(1234.9)).toBe("1230");
  });

  it("handles zero and negatives", () => {
    expect(formatScore(0)).toBe("0");
    expect(formatScore(-34.289)).toBe("-34.3");
  });

  it("falls back to exponent notation at the extremes", () => {
    expect(formatScore(1234567)).toBe("1.23e+6");
    expect(formatScore(0.00005432)).toBe("5.43e-5");
  });
});
