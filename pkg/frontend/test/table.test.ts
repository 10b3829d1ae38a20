import { describe, expect, it } from "vitest";

import type { SequenceRow } from "../src/api.js";
import { DEFAULT_VIEW } from "../src/state.js";
import { buildTable, stepSelection } from "../src/table.js";

function row(id: string, max: number, disposition: SequenceRow["disposition"]): SequenceRow {
  return {
    sequence_id: id,
    sol: 1000,
    eye: "left",
    scores: { max, mean: max / 3, variance: 1.0, p99: max / 2 },
    disposition,
  };
}

const ROWS = [
  row("s3", 50.1, "unreviewed"),
  row("s1", 40.2, "reviewed"),
  row("s2", 30.3, "flagged"),
];

describe("buildTable", () => {
  it("preserves server order exactly", () => {
    const table = buildTable(ROWS, DEFAULT_VIEW);
    expect(table.map((r) => r.sequenceId)).toEqual(["s3", "s1", "s2"]);
  });

  it("never re-sorts even when the values disagree with the sort key", () => {
    const shuffled = [row("b", 1, "unreviewed"), row("a", 99, "unreviewed")];
    const table = buildTable(shuffled, DEFAULT_VIEW);
    expect(table.map((r) => r.sequenceId)).toEqual(["b", "a"]);
  });

  it("filters by disposition", () => {
    const flagged = buildTable(ROWS, { ...DEFAULT_VIEW, filter: "flagged" });
    expect(flagged.map((r) => r.sequenceId)).toEqual(["s2"]);
    expect(buildTable(ROWS, { ...DEFAULT_VIEW, filter: "reviewed" })).toHaveLength(1);
  });

  it("de-emphasizes reviewed rows only under the all filter", () => {
    const all = buildTable(ROWS, DEFAULT_VIEW);
    expect(all.find((r) => r.sequenceId === "s1")?.deEmphasized).toBe(true);
    expect(all.find((r) => r.sequenceId === "s3")?.deEmphasized).toBe(false);
    const only = buildTable(ROWS, { ...DEFAULT_VIEW, filter: "reviewed" });
    expect(only[0]?.deEmphasized).toBe(false);
  });

  it("formats cells to three significant figures", () => {
    const table = buildTable(ROWS, DEFAULT_VIEW);
    expect(table[0]?.cells.max).toBe("50.1");
    expect(table[0]?.cells.mean).toBe("16.7");
  });

  it("marks the selected row", () => {
    const table = buildTable(ROWS, { ...DEFAULT_VIEW, selected: "s1" });
    expect(table.map((r) => r.selected)).toEqual([false, true, false]);
  });
});

describe("stepSelection", () => {
  const visible = buildTable(ROWS, DEFAULT_VIEW);

  it("moves down and up the visible order", () => {
    expect(stepSelection(visible, "s3", 1)).toBe("s1");
    expect(stepSelection(visible, "s1", -1)).toBe("s3");
  });

  it("clamps at the ends", () => {
    expect(stepSelection(visible, "s2", 1)).toBe("s2");
    expect(stepSelection(visible, "s3", -1)).toBe("s3");
  });

  it("starts from the top when nothing is selected", () => {
    expect(stepSelection(visible, null, 1)).toBe("s3");
    expect(stepSelection([], null, 1)).toBeNull();
  });
});
