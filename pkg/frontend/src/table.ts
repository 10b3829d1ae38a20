/**
 * Table view model. Rows arrive ranked by the server and are never
 * re-sorted here; equal-key tie order is the server's to decide.
 */

import type { SequenceRow, SortKey } from "./api.js";
import type { ViewState } from "./state.js";
import { formatScore } from "./format.js";

export interface TableRowView {
  sequenceId: string;
  sol: number;
  eye: string;
  cells: Record<SortKey, string>;
  disposition: string;
  selected: boolean;
  deEmphasized: boolean;
}

export function buildTable(rows: SequenceRow[], state: ViewState): TableRowView[] {
  const out: TableRowView[] = [];
  for (const row of rows) {
    if (state.filter !== "all" && row.disposition !== state.filter) continue;
    out.push({
      sequenceId: row.sequence_id,
      sol: row.sol,
      eye: row.eye,
      cells: {
        max: formatScore(row.scores.max),
        mean: formatScore(row.scores.mean),
        variance: formatScore(row.scores.variance),
        p99: formatScore(row.scores.p99),
      },
      disposition: row.disposition,
      selected: row.sequence_id === state.selected,
      // reviewed work sinks visually once the filter shows everything
      deEmphasized: state.filter === "all" && row.disposition === "reviewed",
    });
  }
  return out;
}

/** Step the selection through the visible rows; clamps at either end. */
export function stepSelection(
  visible: TableRowView[],
  selected: string | null,
  delta: 1 | -1,
): string | null {
  if (visible.length === 0) return null;
  const index = visible.findIndex((r) => r.sequenceId === selected);
  if (index < 0) return visible[0]!.sequenceId;
  const next = Math.min(visible.length - 1, Math.max(0, index + delta));
  return visible[next]!.sequenceId;
}
