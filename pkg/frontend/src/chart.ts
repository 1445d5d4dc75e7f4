/** SVG rendering for the discovery curve: cumulative true anomalies
 * (as labeled by the analyst) against the number of queries. Pure
 * string generation, no DOM required. */

import type { CurvePoint } from "./types.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  pad?: number;
}

const DEFAULTS: Required<ChartOptions> = { width: 420, height: 180, pad: 28 };

export function renderCurveSvg(
  points: CurvePoint[],
  budget: number,
  options: ChartOptions = {},
): string {
  const { width, height, pad } = { ...DEFAULTS, ...options };
  const xMax = Math.max(budget, points.length, 1);
  const yMax = Math.max(1, ...points.map((p) => p.cumulative));
  const x = (iter: number) => pad + ((width - 2 * pad) * iter) / xMax;
  const y = (cum: number) => height - pad - ((height - 2 * pad) * cum) / yMax;

  const parts: string[] = [];
  parts.push(
    `<svg class="curve" viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg" role="img" aria-label="discovery curve">`,
  );
  parts.push(
    `<line class="axis" x1="${pad}" y1="${height - pad}" x2="${width - pad}" y2="${height - pad}"/>`,
    `<line class="axis" x1="${pad}" y1="${pad}" x2="${pad}" y2="${height - pad}"/>`,
    `<text class="axis-label" x="${width - pad}" y="${height - 8}" text-anchor="end">queries</text>`,
    `<text class="axis-label" x="${pad}" y="${pad - 8}">anomalies</text>`,
  );

  if (points.length > 0) {
    // step-after path: the count is flat between queries and jumps on a hit
    let d = `M ${x(0).toFixed(2)} ${y(0).toFixed(2)}`;
    let prev = 0;
    for (const p of points) {
      d += ` H ${x(p.iteration).toFixed(2)}`;
      if (p.cumulative !== prev) {
        d += ` V ${y(p.cumulative).toFixed(2)}`;
        prev = p.cumulative;
      }
    }
    parts.push(`<path class="curve-line" d="${d}" fill="none"/>`);
    for (const p of points) {
      parts.push(
        `<circle class="curve-dot" cx="${x(p.iteration).toFixed(2)}" cy="${y(p.cumulative).toFixed(2)}" r="2.5"/>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("");
}

/** Count the plotted markers in a rendered chart (test helper). */
export function countMarkers(svg: string): number {
  return (svg.match(/<circle /g) ?? []).length;
}
