/** Dependency-free SVG line charts. Null values break the line into
 * separate segments: gaps stay visible, never interpolated. */

export interface SeriesSpec {
  label: string;
  values: (number | null)[];
  color: string;
}

const WIDTH = 860;
const HEIGHT = 220;
const PAD = { left: 56, right: 12, top: 12, bottom: 24 };

function scale(
  v: number,
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

/** Path segments for one series; a null value terminates the current run. */
export function segmentPaths(
  values: (number | null)[],
  lo: number,
  hi: number,
): string[] {
  const paths: string[] = [];
  let current: string[] = [];
  const innerW = WIDTH - PAD.left - PAD.right;
  values.forEach((v, i) => {
    if (v === null || Number.isNaN(v)) {
      if (current.length > 0) paths.push(current.join(" "));
      current = [];
      return;
    }
    const x = PAD.left + (values.length === 1 ? 0 : (i / (values.length - 1)) * innerW);
    const y = scale(v, lo, hi, HEIGHT - PAD.bottom, PAD.top);
    current.push(`${current.length === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`);
  });
  if (current.length > 0) paths.push(current.join(" "));
  return paths;
}

export function renderLineChart(
  container: HTMLElement,
  timestamps: string[],
  series: SeriesSpec[],
): void {
  const finite = series.flatMap((s) =>
    s.values.filter((v): v is number => v !== null && !Number.isNaN(v)),
  );
  container.textContent = "";
  if (finite.length === 0) {
    const empty = document.createElement("p");
    empty.className = "placeholder";
    empty.textContent = "no data in this window";
    container.appendChild(empty);
    return;
  }
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "chart");

  for (const spec of series) {
    for (const d of segmentPaths(spec.values, lo, hi)) {
      const path = document.createElementNS("http://www.w3.org/2000/svg", "path");
      path.setAttribute("d", d);
      path.setAttribute("fill", "none");
      path.setAttribute("stroke", spec.color);
      path.setAttribute("stroke-width", "1.5");
      path.setAttribute("data-series", spec.label);
      svg.appendChild(path);
    }
  }

  const axis = document.createElementNS("http://www.w3.org/2000/svg", "text");
  axis.setAttribute("x", "4");
  axis.setAttribute("y", String(PAD.top + 10));
  axis.setAttribute("class", "axis-label");
  axis.textContent = `${hi.toPrecision(5)}`;
  svg.appendChild(axis);
  const axisLo = document.createElementNS("http://www.w3.org/2000/svg", "text");
  axisLo.setAttribute("x", "4");
  axisLo.setAttribute("y", String(HEIGHT - PAD.bottom));
  axisLo.setAttribute("class", "axis-label");
  axisLo.textContent = `${lo.toPrecision(5)}`;
  svg.appendChild(axisLo);

  if (timestamps.length > 0) {
    const t0 = document.createElementNS("http://www.w3.org/2000/svg", "text");
    t0.setAttribute("x", String(PAD.left));
    t0.setAttribute("y", String(HEIGHT - 6));
    t0.setAttribute("class", "axis-label");
    t0.textContent = timestamps[0] ?? "";
    svg.appendChild(t0);
  }

  container.appendChild(svg);

  const legend = document.createElement("div");
  legend.className = "legend";
  for (const spec of series) {
    const item = document.createElement("span");
    item.style.color = spec.color;
    item.textContent = spec.label;
    legend.appendChild(item);
  }
  container.appendChild(legend);
}
