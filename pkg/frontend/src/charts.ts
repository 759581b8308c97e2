// Hand-rolled SVG charts: grouped bars per objective for a candidate pair,
// a parallel-coordinates alternative, and a tiny sparkline for progress.

const SVG = "http://www.w3.org/2000/svg";

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

/** Bar geometry is scaled per objective for display only; the numeric labels
 * carry the exact payload values. Lower is better for every objective. */
export function groupedBars(
  y1: number[],
  y2: number[],
  labels: string[],
  width = 420,
  height = 180,
): SVGSVGElement {
  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "pair-bars" });
  const n = y1.length;
  const groupW = width / n;
  const barW = Math.min(36, groupW / 3);
  for (let j = 0; j < n; j++) {
    const lo = Math.min(y1[j], y2[j], 0);
    const hi = Math.max(y1[j], y2[j], 0);
    const span = hi - lo || 1;
    const scale = (v: number) => ((v - lo) / span) * (height - 50);
    const cx = j * groupW + groupW / 2;
    const winner = y1[j] < y2[j] ? 0 : y2[j] < y1[j] ? 1 : -1;
    [y1[j], y2[j]].forEach((v, which) => {
      const h = Math.max(scale(v), 2);
      const x = cx + (which === 0 ? -barW - 3 : 3);
      const rect = el("rect", {
        x,
        y: height - 30 - h,
        width: barW,
        height: h,
        class: `bar bar-${which === 0 ? "a" : "b"}${winner === which ? " bar-winner" : ""}`,
        "data-objective": j,
        "data-side": which === 0 ? "a" : "b",
      });
      svg.appendChild(rect);
    });
    const label = el("text", { x: cx, y: height - 12, "text-anchor": "middle", class: "axis-label" });
    label.textContent = `${labels[j]} ↓`;
    svg.appendChild(label);
  }
  return svg;
}

export function parallelCoordinates(
  y1: number[],
  y2: number[],
  labels: string[],
  width = 420,
  height = 180,
): SVGSVGElement {
  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "pair-parcoords" });
  const n = y1.length;
  const xAt = (j: number) => 30 + (j * (width - 60)) / Math.max(n - 1, 1);
  const yAt = (j: number, v: number) => {
    const lo = Math.min(y1[j], y2[j]);
    const hi = Math.max(y1[j], y2[j]);
    const span = hi - lo || 1;
    return height - 35 - ((v - lo) / span) * (height - 60);
  };
  for (let j = 0; j < n; j++) {
    svg.appendChild(el("line", { x1: xAt(j), y1: 15, x2: xAt(j), y2: height - 35, class: "axis" }));
    const label = el("text", { x: xAt(j), y: height - 18, "text-anchor": "middle", class: "axis-label" });
    label.textContent = `${labels[j]} ↓`;
    svg.appendChild(label);
  }
  [
    [y1, "a"],
    [y2, "b"],
  ].forEach(([ys, side]) => {
    const pts = (ys as number[]).map((v, j) => `${xAt(j)},${yAt(j, v)}`).join(" ");
    svg.appendChild(el("polyline", { points: pts, class: `series series-${side}`, fill: "none" }));
  });
  return svg;
}

export function sparkline(values: number[], width = 160, height = 36): SVGSVGElement {
  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}`, class: "sparkline" });
  if (values.length >= 2) {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const span = hi - lo || 1;
    const pts = values
      .map(
        (v, i) =>
          `${(i * (width - 4)) / (values.length - 1) + 2},${height - 4 - ((v - lo) / span) * (height - 8)}`,
      )
      .join(" ");
    svg.appendChild(el("polyline", { points: pts, class: "spark", fill: "none" }));
  }
  return svg;
}
