/** Display formatting for score values: three significant figures. */

export function formatScore(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  if (value === 0) return "0";
  const rounded = Number(value.toPrecision(3));
  // keep plain decimal notation while it stays readable
  if (Math.abs(rounded) >= 1e-3 && Math.abs(rounded) < 1e6) {
    return String(rounded);
  }
  return rounded.toExponential(2);
}
