// Single formatting path for every number the UI displays. Rendered text is
// a pure function of the payload value, so tests can assert byte equality
// between API responses and what the user sees.

export function formatValue(v: number): string {
  if (!Number.isFinite(v)) return String(v);
  const a = Math.abs(v);
  if (a !== 0 && (a >= 1e5 || a < 1e-3)) return v.toExponential(4);
  return v.toPrecision(6);
}

export function formatVector(xs: number[]): string {
  return `(${xs.map(formatValue).join(", ")})`;
}
